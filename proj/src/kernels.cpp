#include "msflow/kernels.hpp"

#include <cmath>

#ifdef MSFLOW_HAVE_OPENMP
#include <omp.h>
#endif

#include "msflow/errors.hpp"

namespace msflow::kernels {

namespace {

// below this size thread start-up costs more than the loop
constexpr Eigen::Index kParallelThreshold = 64;

void check_dims(const AdmittanceMatrix& y, const Eigen::VectorXd& delta, const Eigen::VectorXd& v) {
    if (delta.size() != y.y.rows() || v.size() != y.y.rows())
        throw Error(ErrorCode::DimensionMismatch, "state size does not match admittance matrix");
}

}  // namespace

int max_threads() {
#ifdef MSFLOW_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void power_terms_serial(const AdmittanceMatrix& y, const Eigen::VectorXd& delta,
                        const Eigen::VectorXd& v, Eigen::VectorXd& sp, Eigen::VectorXd& sq) {
    check_dims(y, delta, v);
    const Eigen::Index n = delta.size();
    sp.setZero(n);
    sq.setZero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index m = 0; m < n; ++m) {
            const double mag = y.magnitude(k, m);
            if (mag == 0.0) continue;
            const double arg = delta(k) - delta(m) - y.loss_angle(k, m);
            const double w = v(k) * v(m) * mag;
            sp(k) += w * std::sin(arg);
            sq(k) += w * std::cos(arg);
        }
    }
}

void power_terms(const AdmittanceMatrix& y, const Eigen::VectorXd& delta, const Eigen::VectorXd& v,
                 Eigen::VectorXd& sp, Eigen::VectorXd& sq) {
    check_dims(y, delta, v);
    const Eigen::Index n = delta.size();
    sp.resize(n);
    sq.resize(n);
    // e + jf = V, current injection I = Y V, S = V conj(I)
    const Eigen::VectorXd e = v.cwiseProduct(delta.array().cos().matrix());
    const Eigen::VectorXd f = v.cwiseProduct(delta.array().sin().matrix());

    // Y is symmetric, so row k is read as column k (contiguous)
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
    for (Eigen::Index k = 0; k < n; ++k) {
        const Complex* col = y.y.col(k).data();
        double ire = 0.0;
        double iim = 0.0;
        for (Eigen::Index m = 0; m < n; ++m) {
            const double g = col[m].real();
            const double b = col[m].imag();
            ire += g * e(m) - b * f(m);
            iim += g * f(m) + b * e(m);
        }
        sp(k) = e(k) * ire + f(k) * iim;
        sq(k) = e(k) * iim - f(k) * ire;
    }
}

void full_jacobian_serial(const AdmittanceMatrix& y, const Eigen::VectorXd& delta,
                          const Eigen::VectorXd& v, Eigen::MatrixXd& jf) {
    check_dims(y, delta, v);
    const Eigen::Index n = delta.size();
    jf.setZero(2 * n, 2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double dp_dd = 0.0, dp_dv = 0.0, dq_dd = 0.0, dq_dv = 0.0;
        for (Eigen::Index m = 0; m < n; ++m) {
            if (m == k) continue;
            const double mag = y.magnitude(k, m);
            if (mag == 0.0) continue;
            const double arg = delta(k) - delta(m) - y.loss_angle(k, m);
            const double sn = std::sin(arg);
            const double cs = std::cos(arg);
            const double vvy = v(k) * v(m) * mag;

            jf(k, m) = -vvy * cs;
            jf(k, n + m) = v(k) * mag * sn;
            jf(n + k, m) = -vvy * sn;
            jf(n + k, n + m) = -v(k) * mag * cs;

            dp_dd += vvy * cs;
            dp_dv += v(m) * mag * sn;
            dq_dd += vvy * sn;
            dq_dv += v(m) * mag * cs;
        }
        // self terms: |Y_kk| sin(-alpha_kk) = G_kk, |Y_kk| cos(alpha_kk) = B_kk
        const double mag = y.magnitude(k, k);
        const double alpha = y.loss_angle(k, k);
        jf(k, k) = dp_dd;
        jf(k, n + k) = 2.0 * v(k) * mag * std::sin(-alpha) + dp_dv;
        jf(n + k, k) = dq_dd;
        jf(n + k, n + k) = -2.0 * v(k) * mag * std::cos(alpha) - dq_dv;
    }
}

void full_jacobian(const AdmittanceMatrix& y, const Eigen::VectorXd& delta,
                   const Eigen::VectorXd& v, Eigen::MatrixXd& jf) {
    check_dims(y, delta, v);
    const Eigen::Index n = delta.size();
    Eigen::VectorXd sp, sq;
    power_terms(y, delta, v, sp, sq);
    const Eigen::VectorXd c = delta.array().cos();
    const Eigen::VectorXd s = delta.array().sin();
    jf.setZero(2 * n, 2 * n);

    // one thread per column pair (delta_m, V_m); column m of Y is row m by
    // symmetry, and both reads and writes stay contiguous
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
    for (Eigen::Index m = 0; m < n; ++m) {
        const Complex* col = y.y.col(m).data();
        double* jd = jf.col(m).data();
        double* jv = jf.col(n + m).data();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double g = col[k].real();
            const double b = col[k].imag();
            if (k == m || (g == 0.0 && b == 0.0)) continue;
            // cos/sin of delta_k - delta_m without a trig call per pair
            const double ckm = c(k) * c(m) + s(k) * s(m);
            const double skm = s(k) * c(m) - c(k) * s(m);
            const double gc_bs = g * ckm + b * skm;
            const double gs_bc = g * skm - b * ckm;
            jd[k] = v(k) * v(m) * gs_bc;
            jd[n + k] = -v(k) * v(m) * gc_bs;
            jv[k] = v(k) * gc_bs;
            jv[n + k] = v(k) * gs_bc;
        }
        const double gmm = col[m].real();
        const double bmm = col[m].imag();
        const double vm2 = v(m) * v(m);
        const double p_inj = sp(m);
        const double q_inj = -sq(m);
        jd[m] = -q_inj - bmm * vm2;
        jd[n + m] = p_inj - gmm * vm2;
        jv[m] = p_inj / v(m) + gmm * v(m);
        jv[n + m] = q_inj / v(m) - bmm * v(m);
    }
}

}  // namespace msflow::kernels

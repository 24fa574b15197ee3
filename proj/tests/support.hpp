#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "msflow/errors.hpp"
#include "msflow/marginal.hpp"
#include "msflow/network.hpp"
#include "msflow/powerflow.hpp"
#include "msflow/scenario.hpp"
#include "msflow/sensitivity.hpp"
#include "msflow/synthetic.hpp"

namespace testing {

using namespace msflow;

inline std::string case_path(const std::string& name) { return std::string(MSFLOW_CASES_DIR) + "/" + name; }
inline NetworkCase fourbus() { return load_case(case_path("fourbus.json")); }
inline NetworkCase fourbus_lossless() { return load_case(case_path("fourbus_lossless.json")); }
inline NetworkCase ninebus() { return load_case(case_path("ninebus.json")); }

inline Direction table_direction() { return Direction{{{2, -1.0}, {3, 1.0}}, {}}; }

inline double rel_err(double a, double b, double floor = 1.0) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double mw(const Grid& g, const SteadyState& s, int bus) {
    return s.p(static_cast<Eigen::Index>(g.net.index_of(bus))) * g.net.s_base_mva;
}

inline SolverOptions tight() {
    SolverOptions o;
    o.mismatch_tol = 1e-12;
    o.step_tol = 1e-14;
    return o;
}

// Random operating points near a case's base state: every independent bus
// power is scaled by a factor in [lo, hi] and the load flow is re-solved.
// Draws that do not converge are skipped.
struct StateGenerator {
    NetworkCase base;
    std::mt19937_64 rng;
    double lo = 0.3;
    double hi = 1.7;

    StateGenerator(NetworkCase c, std::uint64_t seed) : base(std::move(c)), rng(seed) {}

    NetworkCase next_case() {
        std::uniform_real_distribution<double> f(lo, hi);
        NetworkCase c = base;
        for (auto& b : c.buses) {
            b.p_mw *= f(rng);
            b.q_mvar *= f(rng);
        }
        return c;
    }

    std::vector<Scenario> draw(std::size_t count, const SolverOptions& opts = {}) {
        std::vector<Scenario> out;
        for (int attempt = 0; out.size() < count && attempt < 100 * static_cast<int>(count); ++attempt) {
            const auto c = next_case();
            try {
                out.push_back(prepare_scenario(c, SingleSlack{c.buses[to_per_unit(c).reference_bus()].id}, opts));
            } catch (const Error&) {
            }
        }
        return out;
    }
};

// Central difference of the bus mismatches with respect to (delta, V),
// bus powers held at the state's values.
inline Eigen::MatrixXd fd_full_jacobian(const Grid& g, const SteadyState& s, double h = 1e-6) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd j(2 * n, 2 * n);
    auto eval = [&](const Eigen::VectorXd& d, const Eigen::VectorXd& v) {
        const auto m = bus_mismatch(g, s.p, s.q, d, v, true);
        Eigen::VectorXd r(2 * n);
        r << m.dp, m.dq;
        return r;
    };
    for (Eigen::Index c = 0; c < 2 * n; ++c) {
        Eigen::VectorXd dp = s.delta, dm = s.delta, vp = s.v, vm = s.v;
        if (c < n) {
            dp(c) += h;
            dm(c) -= h;
        } else {
            vp(c - n) += h;
            vm(c - n) -= h;
        }
        j.col(c) = (eval(dp, vp) - eval(dm, vm)) / (2.0 * h);
    }
    return j;
}

inline double max_entry_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.rows(); ++i)
        for (Eigen::Index c = 0; c < analytic.cols(); ++c)
            worst = std::max(worst, std::abs(analytic(i, c) - fd(i, c)) / std::max(std::abs(analytic(i, c)), 1.0));
    return worst;
}

struct FdItl {
    Eigen::VectorXd dp;
    Eigen::VectorXd dq;
};

// d(pi)/dP_m and d(pi)/dQ_m by re-solving the load flow with the injection
// perturbed by +-eps, pi being the sum of all bus powers.
inline FdItl fd_itl(const Grid& g, const Partition& part, const Injections& inj, const SteadyState& s,
                    double eps = 1e-6) {
    const auto n = static_cast<Eigen::Index>(g.size());
    FdItl out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    const auto opts = tight();
    auto pi_at = [&](const Injections& x) { return newton_solve(g, part, x, opts, &s).balance; };
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto k = static_cast<std::size_t>(m);
        if (part.p_row(k) || part.distributed()) {
            Injections up = inj, dn = inj;
            up.p(m) += eps;
            dn.p(m) -= eps;
            out.dp(m) = (pi_at(up) - pi_at(dn)) / (2.0 * eps);
        }
        if (part.q_row(k)) {
            Injections up = inj, dn = inj;
            up.q(m) += eps;
            dn.q(m) -= eps;
            out.dq(m) = (pi_at(up) - pi_at(dn)) / (2.0 * eps);
        }
    }
    return out;
}

inline MsResult table_ms(const NetworkCase& c, int slack, const ContinuationOptions& opts = {}) {
    const auto sc = prepare_scenario(c, SingleSlack{slack});
    return continuation_to_ms(sc.grid, sc.partition, sc.injections, table_direction(), opts, &sc.base);
}

}  // namespace testing

#include "msflow/powerflow.hpp"

#include <cmath>

#include "msflow/errors.hpp"
#include "msflow/kernels.hpp"

namespace msflow {

Grid Grid::from_network(PerUnitNetwork net) {
    Grid g{std::move(net), {}};
    g.y = build_ybus(g.net);
    return g;
}

BusMismatch bus_mismatch(const Grid& grid, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& delta, const Eigen::VectorXd& v, bool serial) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (p.size() != n || q.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "injection size does not match network");
    Eigen::VectorXd sp, sq;
    if (serial)
        kernels::power_terms_serial(grid.y, delta, v, sp, sq);
    else
        kernels::power_terms(grid.y, delta, v, sp, sq);
    return {p + sp, q - sq};
}

Eigen::VectorXd mismatch(const Grid& grid, const Partition& part, const Injections& inj,
                         const Eigen::VectorXd& delta, const Eigen::VectorXd& v,
                         double slack_power, bool serial) {
    const Eigen::VectorXd p = inj.p + part.alpha() * (part.distributed() ? slack_power : 0.0);
    const auto bus = bus_mismatch(grid, p, inj.q, delta, v, serial);
    const auto& eqs = part.equations();
    Eigen::VectorXd r(static_cast<Eigen::Index>(eqs.size()));
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(eqs[i].bus);
        r(static_cast<Eigen::Index>(i)) = eqs[i].balance == Balance::Active ? bus.dp(k) : bus.dq(k);
    }
    return r;
}

Eigen::MatrixXd full_jacobian(const Grid& grid, const Eigen::VectorXd& delta,
                              const Eigen::VectorXd& v, bool serial) {
    Eigen::MatrixXd jf;
    if (serial)
        kernels::full_jacobian_serial(grid.y, delta, v, jf);
    else
        kernels::full_jacobian(grid.y, delta, v, jf);
    return jf;
}

JacobianBundle reduced_jacobians(const Eigen::MatrixXd& jf, const Partition& part) {
    const auto n = static_cast<Eigen::Index>(part.bus_count());
    if (jf.rows() != 2 * n || jf.cols() != 2 * n)
        throw Error(ErrorCode::DimensionMismatch, "full Jacobian size does not match partition");

    const auto& rows = part.jf_rows();
    const auto& cols = part.jf_columns();
    const auto dim = static_cast<Eigen::Index>(part.dimension());

    JacobianBundle out;
    out.full = jf;
    out.load_flow.resize(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            const auto c = cols[static_cast<std::size_t>(j)];
            if (c >= 0) {
                out.load_flow(i, j) = jf(rows[static_cast<std::size_t>(i)], c);
            } else {
                // d(dP_k)/dP_S = alpha_k, zero on reactive rows
                const auto& eq = part.equations()[static_cast<std::size_t>(i)];
                out.load_flow(i, j) = eq.balance == Balance::Active
                                          ? part.alpha()(static_cast<Eigen::Index>(eq.bus))
                                          : 0.0;
            }
        }
    }

    if (!part.distributed()) {
        const auto b = static_cast<Eigen::Index>(part.slack_bus());
        Eigen::MatrixXd ja(dim + 1, dim + 1);
        ja.topLeftCorner(dim, dim) = out.load_flow;
        for (Eigen::Index i = 0; i < dim; ++i) ja(i, dim) = jf(rows[static_cast<std::size_t>(i)], b);
        for (Eigen::Index j = 0; j < dim; ++j) ja(dim, j) = jf(b, cols[static_cast<std::size_t>(j)]);
        ja(dim, dim) = jf(b, b);
        out.augmented = std::move(ja);
    }
    return out;
}

JacobianBundle jacobians(const Grid& grid, const Partition& part, const SteadyState& state) {
    return reduced_jacobians(full_jacobian(grid, state.delta, state.v), part);
}

Eigen::MatrixXd dependent_jacobian(const Eigen::MatrixXd& jf, const Partition& part) {
    const auto n = static_cast<Eigen::Index>(part.bus_count());
    const auto b = part.slack_bus();
    const auto lf = reduced_jacobians(jf, part).load_flow;
    const auto dim = lf.rows();

    std::vector<std::size_t> q_buses;
    for (std::size_t k = 0; k < part.bus_count(); ++k)
        if (part.voltage_fixed(k)) q_buses.push_back(k);

    const Eigen::Index total = dim + 1 + static_cast<Eigen::Index>(q_buses.size());
    if (total != 2 * n) throw Error(ErrorCode::DimensionMismatch, "dependent partition is not square");

    std::vector<Eigen::Index> rows = part.jf_rows();
    rows.push_back(static_cast<Eigen::Index>(b));
    for (auto k : q_buses) rows.push_back(n + static_cast<Eigen::Index>(k));

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(total, total);
    const auto& cols = part.jf_columns();
    for (Eigen::Index i = 0; i < total; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            m(i, j) = jf(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    // dP_b / dP_b and dQ_k / dQ_k
    m(dim, dim) = 1.0;
    for (std::size_t i = 0; i < q_buses.size(); ++i) {
        const auto r = dim + 1 + static_cast<Eigen::Index>(i);
        m(r, r) = 1.0;
    }
    return m;
}

SteadyState flat_start(const Grid& grid, const Partition& part) {
    const auto n = static_cast<Eigen::Index>(grid.size());
    SteadyState s;
    s.delta = Eigen::VectorXd::Zero(n);
    s.v = Eigen::VectorXd::Ones(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& bus = grid.net.buses[static_cast<std::size_t>(k)];
        if (part.voltage_fixed(static_cast<std::size_t>(k))) s.v(k) = bus.v;
    }
    s.delta(static_cast<Eigen::Index>(part.angle_ref())) =
        grid.net.buses[part.angle_ref()].delta;
    return s;
}

void complete_state(const Grid& grid, const Partition& part, const Injections& inj,
                    SteadyState& state) {
    Eigen::VectorXd sp, sq;
    kernels::power_terms(grid.y, state.delta, state.v, sp, sq);
    const auto n = static_cast<Eigen::Index>(grid.size());
    state.p = inj.p;
    state.q = inj.q;
    if (part.distributed()) {
        state.p += part.alpha() * state.slack_power;
    } else {
        const auto b = static_cast<Eigen::Index>(part.slack_bus());
        state.p(b) = -sp(b);
        state.slack_power = state.p(b);
    }
    for (Eigen::Index k = 0; k < n; ++k)
        if (part.voltage_fixed(static_cast<std::size_t>(k))) state.q(k) = sq(k);
    state.balance = state.p.sum();
    state.losses = branch_losses(grid.net, state.delta, state.v);
}

SteadyState newton_solve(const Grid& grid, const Partition& part, const Injections& inj,
                         const SolverOptions& opts, const SteadyState* warm) {
    SteadyState s = warm ? *warm : flat_start(grid, part);
    if (!warm && part.distributed()) s.slack_power = 0.0;
    s.residual_history.clear();
    s.iterations = 0;

    Eigen::VectorXd x = part.pack(s.delta, s.v, s.slack_power);
    auto residual_at = [&](const Eigen::VectorXd& xx) {
        Eigen::VectorXd d = s.delta, v = s.v;
        double ps = s.slack_power;
        part.unpack(xx, d, v, ps);
        if ((v.array() <= 0.0).any()) return Eigen::VectorXd(Eigen::VectorXd::Constant(xx.size(), INFINITY));
        return mismatch(grid, part, inj, d, v, ps, opts.serial_kernels);
    };

    Eigen::VectorXd f = residual_at(x);
    bool converged = false;
    for (;;) {
        const double r = f.lpNorm<Eigen::Infinity>();
        s.residual_history.push_back(r);
        s.mismatch_norm = r;
        if (r < opts.mismatch_tol) {
            converged = true;
            break;
        }
        if (s.iterations >= opts.max_iterations) break;

        part.unpack(x, s.delta, s.v, s.slack_power);
        const auto jlf =
            reduced_jacobians(full_jacobian(grid, s.delta, s.v, opts.serial_kernels), part).load_flow;
        const Eigen::VectorXd dx = jlf.partialPivLu().solve(-f);
        if (!dx.allFinite())
            throw Error(ErrorCode::SingularJacobian, "load-flow Jacobian is singular during Newton iteration");

        const double f_norm = f.norm();
        double damping = 1.0;
        Eigen::VectorXd x_try, f_try;
        for (;;) {
            x_try = x + damping * dx;
            f_try = residual_at(x_try);
            if (f_try.allFinite() && f_try.norm() < f_norm) break;
            damping *= 0.5;
            if (damping < opts.min_damping)
                throw Error(ErrorCode::StepFloor,
                            "step halving reached the damping floor after " +
                                std::to_string(s.iterations) + " iterations (mismatch " +
                                std::to_string(r) + " pu)");
        }
        x = x_try;
        f = f_try;
        ++s.iterations;
        s.step_norm = (damping * dx).lpNorm<Eigen::Infinity>();
        // a vanishing full step fixes the state to step_tol even if roundoff keeps
        // the mismatch just above a very tight tolerance
        if (damping == 1.0 && s.step_norm < opts.step_tol &&
            f.lpNorm<Eigen::Infinity>() < 1e3 * opts.mismatch_tol) {
            s.mismatch_norm = f.lpNorm<Eigen::Infinity>();
            s.residual_history.push_back(s.mismatch_norm);
            converged = true;
            break;
        }
    }
    if (!converged)
        throw Error(ErrorCode::MaxIterations, "Newton did not converge in " +
                                                  std::to_string(opts.max_iterations) +
                                                  " iterations (mismatch " +
                                                  std::to_string(s.mismatch_norm) + " pu)");

    part.unpack(x, s.delta, s.v, s.slack_power);
    complete_state(grid, part, inj, s);
    return s;
}

}  // namespace msflow

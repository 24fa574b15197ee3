#include "msflow/marginal.hpp"

#include <cmath>

#include "msflow/errors.hpp"

namespace msflow {

namespace {

Eigen::Index idx(std::size_t k) { return static_cast<Eigen::Index>(k); }

int det_sign(const Eigen::MatrixXd& m) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    double s = lu.permutationP().determinant();
    const auto d = lu.matrixLU().diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) == 0.0) return 0;
        if (d(i) < 0.0) s = -s;
    }
    return s < 0.0 ? -1 : 1;
}

// derivative of the reduced residual with respect to t
Eigen::VectorXd residual_t(const Partition& part, const Injections& dir) {
    const auto& eqs = part.equations();
    Eigen::VectorXd ft(idx(eqs.size()));
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        const auto k = idx(eqs[i].bus);
        ft(idx(i)) = eqs[i].balance == Balance::Active ? dir.p(k) : dir.q(k);
    }
    return ft;
}

Eigen::MatrixXd load_flow_jacobian(const Grid& grid, const Partition& part, const Eigen::VectorXd& delta,
                                   const Eigen::VectorXd& v) {
    return reduced_jacobians(full_jacobian(grid, delta, v), part).load_flow;
}

double sigma_of(const Grid& grid, const Partition& part, const SteadyState& s) {
    return smallest_singular(load_flow_jacobian(grid, part, s.delta, s.v)).sigma;
}

}  // namespace

Injections MsResult::injections_at(double tt) const {
    return {base.p + tt * direction.p, base.q + tt * direction.q};
}

double marginal_threshold(double sigma_base, double rel) { return rel * sigma_base; }

Injections direction_vectors(const Grid& grid, const Partition& part, const Direction& dir) {
    const auto n = idx(grid.size());
    Injections d{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    const double s = grid.net.s_base_mva;
    auto bus_index = [&](int id) {
        try {
            return grid.net.index_of(id);
        } catch (const Error&) {
            throw Error(ErrorCode::InvalidDirection, "direction references unknown bus " + std::to_string(id));
        }
    };
    for (const auto& [id, mw] : dir.dp_mw) {
        const auto k = bus_index(id);
        if (!std::isfinite(mw)) throw Error(ErrorCode::InvalidDirection, "non-finite direction component");
        if (!part.distributed() && k == part.slack_bus() && mw != 0.0)
            throw Error(ErrorCode::InvalidDirection,
                        "direction must not change the slack bus power (bus " + std::to_string(id) + ")");
        d.p(idx(k)) += mw / s;
    }
    for (const auto& [id, mvar] : dir.dq_mvar) {
        const auto k = bus_index(id);
        if (!std::isfinite(mvar)) throw Error(ErrorCode::InvalidDirection, "non-finite direction component");
        if (part.voltage_fixed(k) && mvar != 0.0)
            throw Error(ErrorCode::InvalidDirection,
                        "reactive direction on voltage-controlled bus " + std::to_string(id));
        d.q(idx(k)) += mvar / s;
    }
    if (d.p.lpNorm<Eigen::Infinity>() == 0.0 && d.q.lpNorm<Eigen::Infinity>() == 0.0)
        throw Error(ErrorCode::InvalidDirection, "direction is zero");
    return d;
}

MsResult continuation_to_ms(const Grid& grid, const Partition& part, const Injections& base,
                            const Direction& dir, const ContinuationOptions& opts,
                            const SteadyState* base_state) {
    const Injections dpu = direction_vectors(grid, part, dir);
    const double dir_norm_mw = std::sqrt(dpu.p.squaredNorm() + dpu.q.squaredNorm()) * grid.net.s_base_mva;
    const double dir_inf = std::max(dpu.p.lpNorm<Eigen::Infinity>(), dpu.q.lpNorm<Eigen::Infinity>());

    MsResult res{.partition = part, .base = base, .direction = dpu};
    SteadyState current;
    try {
        current = newton_solve(grid, part, base, opts.corrector, base_state);
    } catch (const Error& e) {
        throw Error(ErrorCode::BaseCaseInfeasible, std::string("base case does not solve: ") + e.what());
    }
    res.sigma_base = sigma_of(grid, part, current);
    res.threshold = marginal_threshold(res.sigma_base, opts.sigma_rel_threshold);

    double t = 0.0;
    double dt = opts.initial_step_mw / dir_norm_mw;
    double sigma = res.sigma_base;
    int sign = det_sign(load_flow_jacobian(grid, part, current.delta, current.v));
    res.trace.push_back({0.0, current, sigma});
    const Eigen::VectorXd ft = residual_t(part, dpu);

    auto try_corrector = [&](double t_new, const SteadyState& start) -> std::optional<SteadyState> {
        try {
            auto s = newton_solve(grid, part, res.injections_at(t_new), opts.corrector, &start);
            // stay on the branch we started on: det J_LF changes sign across the fold
            if (det_sign(load_flow_jacobian(grid, part, s.delta, s.v)) != sign) return std::nullopt;
            return s;
        } catch (const Error&) {
            return std::nullopt;
        }
    };

    while (dt >= opts.min_step && sigma >= res.threshold) {
        if (t * dir_inf > opts.max_transfer_pu || static_cast<int>(res.trace.size()) > opts.max_points)
            throw Error(ErrorCode::NoProgressBeforeFloor,
                        "direction does not stress the system within the loading cap (t = " +
                            std::to_string(t) + ")");

        // tangent predictor: J_LF dx/dt = -dF/dt
        std::optional<SteadyState> next;
        const auto jlf = load_flow_jacobian(grid, part, current.delta, current.v);
        const Eigen::VectorXd tangent = jlf.partialPivLu().solve(-ft);
        if (tangent.allFinite()) {
            SteadyState predicted = current;
            Eigen::VectorXd x = part.pack(current.delta, current.v, current.slack_power) + dt * tangent;
            part.unpack(x, predicted.delta, predicted.v, predicted.slack_power);
            next = try_corrector(t + dt, predicted);
        }
        if (!next) next = try_corrector(t + dt, current);
        if (!next) {
            dt *= 0.5;
            continue;
        }
        t += dt;
        current = std::move(*next);
        sigma = sigma_of(grid, part, current);
        res.trace.push_back({t, current, sigma});
    }

    res.t = t;
    res.state = current;
    res.sigma_min = sigma;
    res.null_vector = smallest_singular(load_flow_jacobian(grid, part, current.delta, current.v)).u;

    if (opts.refine) {
        try {
            auto refined = poc_refine(grid, res, opts.poc);
            refined.trace = std::move(res.trace);
            return refined;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::RefinementDiverged) throw;
            res.refinement.message = e.what();
        }
    }
    // unrefined: multipliers from the last continuation point, not checked
    // against the threshold
    const auto jac = jacobians(grid, part, current);
    res.lambda = left_null_lambda(jac, part, std::numeric_limits<double>::infinity()).lambda;
    return res;
}

MsResult poc_refine(const Grid& grid, const MsResult& candidate, const PocOptions& opts) {
    const auto& part = candidate.partition;
    const auto dim = idx(part.dimension());
    const auto total = 2 * dim + 1;
    const Eigen::VectorXd ft = residual_t(part, candidate.direction);
    const double dir_inf =
        std::max(candidate.direction.p.lpNorm<Eigen::Infinity>(), candidate.direction.q.lpNorm<Eigen::Infinity>());

    Eigen::VectorXd delta = candidate.state.delta;
    Eigen::VectorXd v = candidate.state.v;
    double ps = candidate.state.slack_power;
    Eigen::VectorXd x = part.pack(delta, v, ps);
    double t = candidate.t;
    Eigen::VectorXd mu = candidate.null_vector.size() == dim
                             ? candidate.null_vector
                             : smallest_singular(load_flow_jacobian(grid, part, delta, v)).u;
    mu.normalize();

    auto jlf_at = [&](const Eigen::VectorXd& xx) {
        Eigen::VectorXd d = delta, vv = v;
        double p = ps;
        part.unpack(xx, d, vv, p);
        return load_flow_jacobian(grid, part, d, vv);
    };
    auto residual = [&](const Eigen::VectorXd& xx, double tt, const Eigen::VectorXd& m,
                        const Eigen::MatrixXd& j) {
        Eigen::VectorXd d = delta, vv = v;
        double p = ps;
        part.unpack(xx, d, vv, p);
        Eigen::VectorXd g(total);
        g.head(dim) = mismatch(grid, part, candidate.injections_at(tt), d, vv, p);
        g.segment(dim, dim) = j.transpose() * m;
        g(total - 1) = m.squaredNorm() - 1.0;
        return g;
    };

    auto fail = [](const std::string& why) -> Error {
        return Error(ErrorCode::RefinementDiverged, "point-of-collapse refinement diverged: " + why);
    };

    PocReport report;
    Eigen::MatrixXd jlf = jlf_at(x);
    Eigen::VectorXd g = residual(x, t, mu, jlf);
    for (;;) {
        report.residual = g.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(report.residual)) throw fail("non-finite residual");
        if (report.residual < opts.tol) break;
        if (report.iterations >= opts.max_iterations)
            throw fail("no convergence in " + std::to_string(opts.max_iterations) + " iterations");

        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(total, total);
        k.topLeftCorner(dim, dim) = jlf;
        k.block(0, dim, dim, 1) = ft;
        // d(J_LF^T mu)/dx by central differences of the analytic Jacobian
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
            Eigen::VectorXd xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            k.block(dim, j, dim, 1) = (jlf_at(xp).transpose() * mu - jlf_at(xm).transpose() * mu) / (2.0 * h);
        }
        k.block(dim, dim + 1, dim, dim) = jlf.transpose();
        k.block(total - 1, dim + 1, 1, dim) = 2.0 * mu.transpose();

        const Eigen::VectorXd step = k.partialPivLu().solve(-g);
        if (!step.allFinite()) throw fail("singular extended Jacobian");
        const double size = std::max(step.head(dim).lpNorm<Eigen::Infinity>(), std::abs(step(dim)) * dir_inf);
        if (size > opts.max_step)
            throw fail("Newton update " + std::to_string(size) + " exceeds the trust radius");

        x += step.head(dim);
        t += step(dim);
        mu += step.tail(dim);
        ++report.iterations;
        jlf = jlf_at(x);
        g = residual(x, t, mu, jlf);
    }

    MsResult out = candidate;
    out.trace.clear();
    out.t = t;
    part.unpack(x, delta, v, ps);
    out.state.delta = delta;
    out.state.v = v;
    out.state.slack_power = ps;
    out.state.mismatch_norm = g.head(dim).lpNorm<Eigen::Infinity>();
    out.state.iterations = report.iterations;
    complete_state(grid, part, out.injections_at(t), out.state);

    const auto jac = jacobians(grid, part, out.state);
    const auto triple = smallest_singular(jac.load_flow);
    out.sigma_min = triple.sigma;
    if (!(triple.sigma < candidate.threshold))
        throw fail("converged point has sigma_min " + std::to_string(triple.sigma) + " above threshold");
    out.null_vector = mu.normalized();
    out.lambda = left_null_lambda(jac, part, candidate.threshold).lambda;
    report.refined = true;
    out.refinement = report;
    return out;
}

RelocationVerdict slack_relocation_check(const Grid& grid, const MsResult& ms, int new_slack) {
    const Partition part(grid.net, SingleSlack{new_slack});
    const auto jac = jacobians(grid, part, ms.state);
    RelocationVerdict out;
    out.new_slack = new_slack;
    out.threshold = ms.threshold;
    out.sigma_min = smallest_singular(jac.load_flow).sigma;
    out.marginal = out.sigma_min < ms.threshold;
    if (out.marginal) out.lambda = left_null_lambda(jac, part, ms.threshold).lambda;
    return out;
}

DistributedIdentities distributed_ms_identities(const Grid& grid, const MsResult& ms,
                                                const SlackModel& new_slack) {
    DistributedIdentities out;
    const auto& alpha = ms.partition.alpha();
    out.sum_alpha_lambda = alpha.dot(ms.lambda.p);

    const Partition part(grid.net, new_slack);
    const auto coeff = itl(grid, part, ms.state);
    for (std::size_t m = 0; m < part.bus_count(); ++m)
        if (coeff.has_p[m]) out.itl_weighted_sum += coeff.dp(idx(m)) * alpha(idx(m));
    return out;
}

LosslessNullCheck lossless_null_combination(const Grid& grid, const MsResult& ms, double beta) {
    if (!grid.net.lossless())
        throw Error(ErrorCode::NotLossless, "network has resistive branches or conductive shunts");
    const auto& part = ms.partition;
    if (part.distributed())
        throw Error(ErrorCode::InvalidSlack, "null combination check needs a single slack bus");
    const auto jac = jacobians(grid, part, ms.state);
    const double sigma = smallest_singular(jac.load_flow).sigma;
    if (!(sigma < ms.threshold))
        throw Error(ErrorCode::NotMarginal, "state is not marginal (sigma_min " + std::to_string(sigma) + ")");

    const auto& ja = *jac.augmented;
    const auto rows = ja.rows();
    Eigen::VectorXd w = ms.lambda.stacked(part);
    w(rows - 1) = 0.0;
    for (std::size_t i = 0; i < part.equations().size(); ++i)
        if (part.equations()[i].balance == Balance::Active) w(idx(i)) += beta;
    w(rows - 1) += beta;

    LosslessNullCheck out;
    out.residual = (ja.transpose() * w).norm();
    out.singular_values = singular_values(ja);
    for (Eigen::Index i = 0; i < out.singular_values.size(); ++i)
        if (out.singular_values(i) < ms.threshold) ++out.small_singular_count;
    return out;
}

}  // namespace msflow

#include "msflow/sensitivity.hpp"

#include <cmath>

#include "msflow/errors.hpp"

namespace msflow {

namespace {

// J_LF with reciprocal condition below this is treated as singular for the
// adjoint solve
constexpr double kSingularRcond = 1e-11;

Eigen::Index idx(std::size_t k) { return static_cast<Eigen::Index>(k); }

}  // namespace

SingularTriple smallest_singular(const Eigen::MatrixXd& j) {
    if (!j.allFinite()) throw Error(ErrorCode::DimensionMismatch, "matrix has non-finite entries");
    if (j.rows() == 0 || j.rows() != j.cols())
        throw Error(ErrorCode::DimensionMismatch, "smallest_singular expects a nonempty square matrix");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto last = j.cols() - 1;
    SingularTriple t;
    t.sigma = svd.singularValues()(last);
    t.u = svd.matrixU().col(last);
    t.v = svd.matrixV().col(last);
    Eigen::Index imax = 0;
    t.u.cwiseAbs().maxCoeff(&imax);
    if (t.u(imax) < 0.0) {
        t.u = -t.u;
        t.v = -t.v;
    }
    return t;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& j) {
    if (!j.allFinite()) throw Error(ErrorCode::DimensionMismatch, "matrix has non-finite entries");
    return Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues();
}

ItlVector itl(const Grid& grid, const Partition& part, const SteadyState& state) {
    return itl(jacobians(grid, part, state), part);
}

ItlVector itl(const JacobianBundle& jac, const Partition& part) {
    const auto& jlf = jac.load_flow;
    const auto dim = jlf.rows();
    const auto n = static_cast<Eigen::Index>(part.bus_count());

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jlf.transpose());
    if (lu.rcond() < kSingularRcond)
        throw Error(ErrorCode::SingularJacobian,
                    "load-flow Jacobian is singular; use the left null vector at a marginal state");

    // mu are the multipliers with the slack multiplier scaled to one
    Eigen::VectorXd rhs(dim);
    if (part.distributed()) {
        rhs.setZero();
        rhs(dim - 1) = 1.0;
    } else {
        const auto& ja = *jac.augmented;
        rhs = -ja.row(dim).head(dim).transpose();
    }
    const Eigen::VectorXd mu = lu.solve(rhs);

    ItlVector out;
    out.slack = part.model();
    out.dp = Eigen::VectorXd::Zero(n);
    out.dq = Eigen::VectorXd::Zero(n);
    out.has_p.assign(part.bus_count(), false);
    out.has_q.assign(part.bus_count(), false);
    for (std::size_t k = 0; k < part.bus_count(); ++k) {
        if (auto r = part.p_row(k)) {
            out.dp(idx(k)) = 1.0 - mu(*r);
            out.has_p[k] = true;
        }
        if (auto r = part.q_row(k)) {
            out.dq(idx(k)) = -mu(*r);
            out.has_q[k] = true;
        }
    }
    return out;
}

std::string_view to_string(Normalization n) {
    switch (n) {
    case Normalization::SlackOne: return "slack-one";
    case Normalization::UnitEuclidean: return "unit-euclidean";
    case Normalization::SupNorm: return "sup-norm";
    }
    return "?";
}

double LagrangeVector::slack_component(const Partition& part) const {
    if (part.distributed()) return part.alpha().dot(p);
    return p(idx(part.slack_bus()));
}

Eigen::VectorXd LagrangeVector::stacked(const Partition& part) const {
    const auto& eqs = part.equations();
    const auto extra = part.distributed() ? 0 : 1;
    Eigen::VectorXd out(static_cast<Eigen::Index>(eqs.size()) + extra);
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        const auto k = idx(eqs[i].bus);
        out(idx(i)) = eqs[i].balance == Balance::Active ? p(k) : q(k);
    }
    if (!part.distributed()) out(out.size() - 1) = p(idx(part.slack_bus()));
    return out;
}

LagrangeVector LagrangeVector::normalized(Normalization norm, const Partition& part) const {
    const Eigen::VectorXd v = stacked(part);
    double factor = 1.0;
    if (norm == Normalization::SlackOne) {
        const double s = slack_component(part);
        if (s == 0.0)
            throw Error(ErrorCode::SlackRatioUndefined, "slack multiplier is zero; slack-one scaling undefined");
        factor = 1.0 / s;
    } else {
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        const double scale = norm == Normalization::UnitEuclidean ? v.norm() : std::abs(v(imax));
        if (scale == 0.0) throw Error(ErrorCode::SlackRatioUndefined, "zero multiplier vector");
        factor = (v(imax) < 0.0 ? -1.0 : 1.0) / scale;
    }

    LagrangeVector out = *this;
    out.p *= factor;
    out.q *= factor;
    out.normalization = norm;
    if (part.distributed()) out.s = part.alpha().dot(out.p);
    return out;
}

LagrangeVector lagrange_from_itl(const ItlVector& itl, double lambda_ref, const Partition& part) {
    const auto n = static_cast<Eigen::Index>(part.bus_count());
    LagrangeVector out;
    out.p = Eigen::VectorXd::Zero(n);
    out.q = Eigen::VectorXd::Zero(n);
    out.has_q = itl.has_q;
    for (std::size_t k = 0; k < part.bus_count(); ++k) {
        if (itl.has_p[k]) out.p(idx(k)) = (1.0 - itl.dp(idx(k))) * lambda_ref;
        if (itl.has_q[k]) out.q(idx(k)) = -itl.dq(idx(k)) * lambda_ref;
    }
    if (part.distributed())
        out.s = lambda_ref;
    else
        out.p(idx(part.slack_bus())) = lambda_ref;
    out.normalization = Normalization::SlackOne;
    return out;
}

ItlVector slack_change_ratio(const ItlVector& itl_b, const Partition& part_b, std::size_t new_slack,
                             double zero_tol) {
    if (part_b.distributed())
        throw Error(ErrorCode::InvalidSlack, "slack change ratio needs a single slack bus");
    const auto b = part_b.slack_bus();
    if (new_slack >= part_b.bus_count())
        throw Error(ErrorCode::InvalidSlack, "new slack bus out of range");
    if (new_slack == b) return itl_b;
    if (!part_b.voltage_fixed(new_slack))
        throw Error(ErrorCode::InvalidSlack, "new slack bus must hold its voltage (PV or VD)");

    const double ratio = 1.0 - itl_b.dp(idx(new_slack));
    if (std::abs(ratio) <= zero_tol)
        throw Error(ErrorCode::SlackRatioUndefined,
                    "ITL of bus " + std::to_string(part_b.bus_id(new_slack)) +
                        " is one under the current slack; it cannot serve as the new reference");

    ItlVector out = itl_b;
    out.slack = SingleSlack{part_b.bus_id(new_slack)};
    for (std::size_t m = 0; m < part_b.bus_count(); ++m) {
        const auto i = idx(m);
        if (m == new_slack) {
            out.dp(i) = 0.0;
            out.has_p[m] = false;
        } else if (m == b) {
            out.dp(i) = 1.0 - 1.0 / ratio;
            out.has_p[m] = true;
        } else {
            out.dp(i) = 1.0 - (1.0 - itl_b.dp(i)) / ratio;
        }
        if (out.has_q[m]) out.dq(i) = itl_b.dq(i) / ratio;
    }
    return out;
}

NullLambda left_null_lambda(const JacobianBundle& jac, const Partition& part, double threshold,
                            Normalization norm) {
    const auto& jlf = jac.load_flow;
    const auto dim = jlf.rows();
    const auto triple = smallest_singular(jlf);
    if (!(triple.sigma < threshold))
        throw Error(ErrorCode::NotMarginal, "sigma_min " + std::to_string(triple.sigma) +
                                                " is not below the marginal threshold " +
                                                std::to_string(threshold));

    const auto n = static_cast<Eigen::Index>(part.bus_count());
    LagrangeVector lam;
    lam.p = Eigen::VectorXd::Zero(n);
    lam.q = Eigen::VectorXd::Zero(n);
    lam.has_q.assign(part.bus_count(), false);
    const auto& eqs = part.equations();
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        const auto k = idx(eqs[i].bus);
        if (eqs[i].balance == Balance::Active) {
            lam.p(k) = triple.u(idx(i));
        } else {
            lam.q(k) = triple.u(idx(i));
            lam.has_q[eqs[i].bus] = true;
        }
    }

    NullLambda out;
    out.sigma_min = triple.sigma;
    if (part.distributed()) {
        lam.s = part.alpha().dot(lam.p);
    } else {
        // least-squares slack multiplier for J_LF^T u + lambda_b g = 0
        const auto& ja = *jac.augmented;
        const Eigen::VectorXd g = ja.row(dim).head(dim).transpose();
        const Eigen::VectorXd r = jlf.transpose() * triple.u;
        const double gg = g.squaredNorm();
        lam.p(idx(part.slack_bus())) = gg > 0.0 ? -g.dot(r) / gg : 0.0;
    }
    lam.normalization = Normalization::UnitEuclidean;
    out.lambda = lam.normalized(norm, part);
    out.slack_component = out.lambda.slack_component(part);
    if (!part.distributed()) {
        const Eigen::VectorXd at = jac.augmented->transpose() * out.lambda.stacked(part);
        out.identity_residual = std::abs(at(dim));
    }
    return out;
}

KktResidual kkt_residual(const Grid& grid, const Partition& part, const SteadyState& state,
                         const LagrangeVector& lambda, const ObjectiveGradient& grad) {
    const auto n = static_cast<Eigen::Index>(part.bus_count());
    if (lambda.p.size() != n || grad.dp.size() != n || grad.dq.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "multiplier or gradient size does not match network");

    KktResidual out;
    const auto bus = bus_mismatch(grid, state.p, state.q, state.delta, state.v);
    out.mismatch = std::sqrt(bus.dp.squaredNorm() + bus.dq.squaredNorm());

    const auto jac = jacobians(grid, part, state);
    const auto dim = jac.load_flow.rows();
    Eigen::VectorXd jt_lambda;
    if (part.distributed()) {
        jt_lambda = jac.load_flow.transpose() * lambda.stacked(part);
    } else {
        // constraint rows: J_LF rows plus the slack balance row, dependent columns only
        Eigen::MatrixXd rect = jac.augmented->leftCols(dim);
        jt_lambda = rect.transpose() * lambda.stacked(part);
    }

    // dependent variables (angles and magnitudes, not P_S)
    const Eigen::Index nx = part.distributed() ? dim - 1 : dim;
    Eigen::VectorXd gx = -jt_lambda.head(nx);
    if (grad.dx) {
        if (grad.dx->size() != nx)
            throw Error(ErrorCode::DimensionMismatch, "objective gradient over X has wrong size");
        gx += *grad.dx;
    }
    out.grad_x = gx.norm();
    if (part.distributed()) out.slack_balance = std::abs(grad.d_slack_power - jt_lambda(dim - 1));

    std::vector<double> gy;
    for (Eigen::Index k = 0; k < n; ++k) gy.push_back(grad.dp(k) - lambda.p(k));
    for (std::size_t k = 0; k < part.bus_count(); ++k)
        if (part.q_row(k)) gy.push_back(grad.dq(idx(k)) - lambda.q(idx(k)));
    out.grad_y_components = Eigen::Map<Eigen::VectorXd>(gy.data(), static_cast<Eigen::Index>(gy.size()));
    out.grad_y = out.grad_y_components.norm();
    return out;
}

}  // namespace msflow

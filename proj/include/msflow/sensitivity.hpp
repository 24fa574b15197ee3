#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "msflow/partition.hpp"
#include "msflow/powerflow.hpp"

namespace msflow {

struct SingularTriple {
    double sigma = 0.0;
    Eigen::VectorXd u;  // left
    Eigen::VectorXd v;  // right
};

/// Smallest singular value and its unit singular vectors from a full dense
/// SVD. The sign is fixed so the largest-magnitude entry of `u` is positive.
SingularTriple smallest_singular(const Eigen::MatrixXd& j);

/// All singular values, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& j);

/// Incremental transmission loss coefficients d(pi)/dP_m and d(pi)/dQ_m,
/// where pi is the sum of all bus powers (load convention) and the slack
/// model absorbs the change. Entries without meaning are flagged off: the
/// single slack bus in `has_p`, buses with a voltage setpoint in `has_q`.
struct ItlVector {
    Eigen::VectorXd dp;
    Eigen::VectorXd dq;
    std::vector<bool> has_p;
    std::vector<bool> has_q;
    SlackModel slack;
};

/// Reduced-gradient ITL via one adjoint solve with J_LF^T.
/// Throws SingularJacobian when J_LF is numerically singular (at an MS).
ItlVector itl(const Grid& grid, const Partition& part, const SteadyState& state);
ItlVector itl(const JacobianBundle& jac, const Partition& part);

enum class Normalization { SlackOne, UnitEuclidean, SupNorm };

std::string_view to_string(Normalization n);

/// Multipliers of the balance equations. `p(k)` for every bus (the slack bus
/// entry is the slack multiplier), `q(k)` for buses with a reactive balance
/// row in J_LF. Under distributed slack `s` holds alpha^T lambda^P.
struct LagrangeVector {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
    std::vector<bool> has_q;
    std::optional<double> s;
    Normalization normalization = Normalization::SlackOne;

    /// lambda_b^P under single slack, lambda^S under distributed.
    double slack_component(const Partition& part) const;
    /// Stacked in the row order of the augmented Jacobian (single slack) or
    /// of J_LF (distributed).
    Eigen::VectorXd stacked(const Partition& part) const;
    LagrangeVector normalized(Normalization n, const Partition& part) const;
};

LagrangeVector lagrange_from_itl(const ItlVector& itl, double lambda_ref, const Partition& part);

/// Re-reference single-slack ITLs from bus b to bus k using the common ratio
/// (1 - ITL_k) of the old reference. Throws SlackRatioUndefined when
/// |1 - ITL_b(k)| <= `zero_tol`.
ItlVector slack_change_ratio(const ItlVector& itl_b, const Partition& part_b, std::size_t new_slack,
                             double zero_tol = 1e-7);

struct NullLambda {
    LagrangeVector lambda;
    double sigma_min = 0.0;
    double slack_component = 0.0;
    double identity_residual = 0.0;  // slack-angle column of J_A^T lambda (single slack)
};

/// Multipliers at a marginal state from the left singular vector of J_LF,
/// completed with the slack component that best satisfies J_A^T lambda = 0.
/// Throws NotMarginal when sigma_min(J_LF) >= threshold.
NullLambda left_null_lambda(const JacobianBundle& jac, const Partition& part, double threshold,
                            Normalization norm = Normalization::UnitEuclidean);

/// Gradient of the objective with respect to bus powers (every bus) and,
/// optionally, to the dependent variables in J_LF column order.
struct ObjectiveGradient {
    Eigen::VectorXd dp;
    Eigen::VectorXd dq;
    double d_slack_power = 0.0;  // distributed slack only
    std::optional<Eigen::VectorXd> dx;
};

struct KktResidual {
    double grad_x = 0.0;   // dependent variables
    double grad_y = 0.0;   // independent bus powers
    double mismatch = 0.0;
    Eigen::VectorXd grad_y_components;  // per bus P (all buses), then Q of PQ rows
    std::optional<double> slack_balance;  // |df/dP_S - alpha^T lambda^P|
};

/// First-order conditions of min f(P, Q) s.t. the load-flow equations,
/// with the Lagrangian L = f - dP^T lambda^P - dQ^T lambda^Q.
KktResidual kkt_residual(const Grid& grid, const Partition& part, const SteadyState& state,
                         const LagrangeVector& lambda, const ObjectiveGradient& grad);

}  // namespace msflow

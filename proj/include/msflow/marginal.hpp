#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msflow/partition.hpp"
#include "msflow/powerflow.hpp"
#include "msflow/sensitivity.hpp"

namespace msflow {

/// Power change per unit of the loading parameter t, physical units.
struct Direction {
    std::map<int, double> dp_mw;
    std::map<int, double> dq_mvar;
};

/// Validated per-unit direction. Throws InvalidDirection for a zero
/// direction, unknown buses, a component on the single slack bus, or a
/// reactive component on a bus with a voltage setpoint.
Injections direction_vectors(const Grid& grid, const Partition& part, const Direction& dir);

struct PocOptions {
    double tol = 1e-9;
    int max_iterations = 20;
    // largest accepted Newton update of (angles, magnitudes, t * |dir|);
    // anything bigger means the guess was not near a marginal state
    double max_step = 0.5;
};

struct ContinuationOptions {
    double initial_step_mw = 10.0;  // per unit Euclidean norm of the direction
    double min_step = 1e-6;         // in units of t
    double sigma_rel_threshold = 1e-6;
    double max_transfer_pu = 100.0;  // cap on t * |dir|_inf
    int max_points = 100000;
    SolverOptions corrector{.mismatch_tol = 1e-10, .step_tol = 1e-12, .max_iterations = 30};
    PocOptions poc{};
    bool refine = true;
};

struct TracePoint {
    double t = 0.0;
    SteadyState state;
    double sigma_min = 0.0;
};

struct PocReport {
    bool refined = false;
    int iterations = 0;
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::string message;
};

struct MsResult {
    Partition partition;
    Injections base;       // powers at t = 0
    Injections direction;  // pu per unit t
    double t = 0.0;
    SteadyState state;
    LagrangeVector lambda;         // unit Euclidean
    Eigen::VectorXd null_vector;   // left singular vector of J_LF, row order
    double sigma_min = 0.0;
    double sigma_base = 0.0;
    double threshold = 0.0;
    std::vector<TracePoint> trace;
    PocReport refinement;

    Injections injections_at(double tt) const;
};

/// Marginal threshold on sigma_min(J_LF) relative to its value at the base state.
double marginal_threshold(double sigma_base, double rel = 1e-6);

/// Natural-parameter continuation along `dir` with a tangent predictor and
/// step halving, followed by point-of-collapse refinement of the last point.
MsResult continuation_to_ms(const Grid& grid, const Partition& part, const Injections& base,
                            const Direction& dir, const ContinuationOptions& opts = {},
                            const SteadyState* base_state = nullptr);

/// Newton on {dF(x, t) = 0, J_LF(x)^T mu = 0, mu^T mu = 1} in (x, t, mu),
/// started from the candidate's state, t and null vector. Throws
/// RefinementDiverged.
MsResult poc_refine(const Grid& grid, const MsResult& candidate, const PocOptions& opts = {});

struct RelocationVerdict {
    int new_slack = 0;
    bool marginal = false;
    double sigma_min = 0.0;
    double threshold = 0.0;
    std::optional<LagrangeVector> lambda;
};

/// Same physical state, slack moved to `new_slack` (bus id).
RelocationVerdict slack_relocation_check(const Grid& grid, const MsResult& ms, int new_slack);

struct DistributedIdentities {
    double sum_alpha_lambda = 0.0;   // alpha^T lambda^P under the MS slack
    double itl_weighted_sum = 0.0;   // sum_m ITL_new(m) alpha_m
};

DistributedIdentities distributed_ms_identities(const Grid& grid, const MsResult& ms,
                                                const SlackModel& new_slack);

struct LosslessNullCheck {
    double residual = 0.0;
    int small_singular_count = 0;
    Eigen::VectorXd singular_values;  // of J_A, descending
};

/// Checks that beta [e; 0; 1] + [lambda^P; lambda^Q; 0] is a left null vector
/// of the augmented Jacobian at a lossless marginal state.
LosslessNullCheck lossless_null_combination(const Grid& grid, const MsResult& ms, double beta);

}  // namespace msflow

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "msflow/network.hpp"
#include "msflow/partition.hpp"

namespace msflow {

/// Immutable per-unit network plus its admittance matrix.
struct Grid {
    PerUnitNetwork net;
    AdmittanceMatrix y;

    static Grid from_network(PerUnitNetwork net);
    static Grid from_case(const NetworkCase& c) { return from_network(to_per_unit(c)); }
    std::size_t size() const { return net.size(); }
};

struct SolverOptions {
    double mismatch_tol = 1e-8;  // pu, infinity norm
    double step_tol = 1e-10;
    int max_iterations = 50;
    double min_damping = 1e-6;
    bool serial_kernels = false;
};

struct SteadyState {
    Eigen::VectorXd delta;  // rad
    Eigen::VectorXd v;      // pu
    Eigen::VectorXd p;      // pu, load convention, every bus
    Eigen::VectorXd q;
    double slack_power = 0.0;  // P_b or P_S
    double balance = 0.0;      // sum of all bus P: the balance term of the loss equation
    double losses = 0.0;       // series I^2 R
    int iterations = 0;
    double mismatch_norm = 0.0;
    double step_norm = 0.0;
    std::vector<double> residual_history;
};

/// Residuals of the reduced system, ordered as `part.equations()`.
Eigen::VectorXd mismatch(const Grid& grid, const Partition& part, const Injections& inj,
                         const Eigen::VectorXd& delta, const Eigen::VectorXd& v,
                         double slack_power, bool serial = false);

/// Residuals dP_k, dQ_k of every bus for fully specified bus powers.
struct BusMismatch {
    Eigen::VectorXd dp;
    Eigen::VectorXd dq;
};
BusMismatch bus_mismatch(const Grid& grid, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& delta, const Eigen::VectorXd& v,
                         bool serial = false);

Eigen::MatrixXd full_jacobian(const Grid& grid, const Eigen::VectorXd& delta,
                              const Eigen::VectorXd& v, bool serial = false);

struct JacobianBundle {
    Eigen::MatrixXd full;
    Eigen::MatrixXd load_flow;
    // single slack only: J_LF bordered by the slack dP row (last) and the
    // slack angle column (last)
    std::optional<Eigen::MatrixXd> augmented;
};

JacobianBundle reduced_jacobians(const Eigen::MatrixXd& jf, const Partition& part);
JacobianBundle jacobians(const Grid& grid, const Partition& part, const SteadyState& state);

/// The square matrix of every balance equation against every dependent
/// variable (single slack): J_LF unknowns, then P_b, then Q of each bus with
/// a voltage setpoint. Rows: J_LF rows, dP_b, dQ of the same buses.
Eigen::MatrixXd dependent_jacobian(const Eigen::MatrixXd& jf, const Partition& part);

/// Flat start: angles 0 except the reference (case value), magnitudes 1 pu
/// except setpoint buses.
SteadyState flat_start(const Grid& grid, const Partition& part);

/// Fill the dependent powers of a state by substitution into the nodal
/// equations.
void complete_state(const Grid& grid, const Partition& part, const Injections& inj,
                    SteadyState& state);

SteadyState newton_solve(const Grid& grid, const Partition& part, const Injections& inj,
                         const SolverOptions& opts = {}, const SteadyState* warm = nullptr);

}  // namespace msflow

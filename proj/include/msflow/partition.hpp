#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "msflow/network.hpp"

namespace msflow {

/// One bus balances active power and fixes the angle reference.
struct SingleSlack {
    int bus = 0;
};

/// Active-power balancing shared by several buses, P_k += alpha_k * P_S.
/// `angle_ref` fixes the angle; it must hold its voltage magnitude (PV or VD).
struct DistributedSlack {
    std::map<int, double> alpha;
    int angle_ref = 0;
    bool require_nonnegative = true;
};

using SlackModel = std::variant<SingleSlack, DistributedSlack>;

std::string describe(const SlackModel& slack);

enum class Quantity { Angle, Magnitude, SlackPower };
enum class Balance { Active, Reactive };

struct Unknown {
    Quantity quantity;
    std::size_t bus;  // unused for SlackPower
};

struct Equation {
    Balance balance;
    std::size_t bus;
};

/// Which quantities are dependent under a slack model, and how they map onto
/// rows and columns of the load-flow Jacobian.
///
/// Single slack b: unknowns are the angles of every bus except b followed by
/// the magnitudes of buses without a voltage setpoint; equations are dP of
/// every bus except b followed by dQ of the same PQ buses. Distributed slack
/// adds P_S as the last unknown and keeps the dP row of the angle reference.
class Partition {
  public:
    Partition(const PerUnitNetwork& net, const SlackModel& slack);

    std::size_t bus_count() const { return n_; }
    std::size_t dimension() const { return unknowns_.size(); }
    bool distributed() const { return !slack_bus_.has_value(); }
    std::size_t angle_ref() const { return angle_ref_; }
    /// Slack bus index (single slack only).
    std::size_t slack_bus() const;
    const Eigen::VectorXd& alpha() const { return alpha_; }
    bool voltage_fixed(std::size_t bus) const { return v_fixed_[bus]; }
    const SlackModel& model() const { return model_; }
    int bus_id(std::size_t bus) const { return ids_[bus]; }

    const std::vector<Unknown>& unknowns() const { return unknowns_; }
    const std::vector<Equation>& equations() const { return equations_; }

    /// Column of the full Jacobian for each unknown (-1 for P_S).
    const std::vector<Eigen::Index>& jf_columns() const { return jf_cols_; }
    /// Row of the full Jacobian for each equation.
    const std::vector<Eigen::Index>& jf_rows() const { return jf_rows_; }

    /// Row of dP_k in the reduced system, if present.
    std::optional<Eigen::Index> p_row(std::size_t bus) const;
    std::optional<Eigen::Index> q_row(std::size_t bus) const;

    Eigen::VectorXd pack(const Eigen::VectorXd& delta, const Eigen::VectorXd& v,
                         double slack_power) const;
    void unpack(const Eigen::VectorXd& x, Eigen::VectorXd& delta, Eigen::VectorXd& v,
                double& slack_power) const;

  private:
    std::size_t n_ = 0;
    std::vector<int> ids_;
    SlackModel model_;
    std::optional<std::size_t> slack_bus_;
    std::size_t angle_ref_ = 0;
    Eigen::VectorXd alpha_;
    std::vector<bool> v_fixed_;
    std::vector<Unknown> unknowns_;
    std::vector<Equation> equations_;
    std::vector<Eigen::Index> jf_cols_;
    std::vector<Eigen::Index> jf_rows_;
    std::vector<Eigen::Index> p_row_;
    std::vector<Eigen::Index> q_row_;
};

/// Specified bus powers in per-unit, load convention.
struct Injections {
    Eigen::VectorXd p;
    Eigen::VectorXd q;

    static Injections from_network(const PerUnitNetwork& net);
};

}  // namespace msflow

#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace msflow {

using Complex = std::complex<double>;

enum class BusKind { PQ, PV, VD };

std::string_view to_string(BusKind kind);

// Physical-unit case description. Powers follow the load convention:
// positive P/Q is consumption, negative is generation.
struct BusSpec {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double p_mw = 0.0;
    double q_mvar = 0.0;
    std::optional<double> v_kv;  // required for PV and VD buses
    double delta_rad = 0.0;
    double shunt_g_s = 0.0;
    double shunt_b_s = 0.0;
};

struct BranchSpec {
    int from = 0;
    int to = 0;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double b_s = 0.0;  // total line charging
};

struct NetworkCase {
    double s_base_mva = 100.0;
    double v_base_kv = 0.0;
    std::vector<BusSpec> buses;
    std::vector<BranchSpec> branches;

    /// Position of the bus with the given id; throws MissingEndpoint.
    std::size_t index_of(int id) const;
};

/// Parses and validates the JSON case format. Unknown keys are rejected.
NetworkCase parse_case(std::string_view text);
NetworkCase load_case(const std::filesystem::path& path);
std::string dump_case(const NetworkCase& c);

/// Structural checks shared by the parser and programmatic builders.
void validate(const NetworkCase& c);

struct PuBus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double p = 0.0;
    double q = 0.0;
    double v = 1.0;
    double delta = 0.0;
    Complex shunt{};
};

struct PuBranch {
    std::size_t from = 0;
    std::size_t to = 0;
    Complex z{};
    double b = 0.0;
};

struct PerUnitNetwork {
    double s_base_mva = 100.0;
    double v_base_kv = 1.0;
    std::vector<PuBus> buses;
    std::vector<PuBranch> branches;

    std::size_t size() const { return buses.size(); }
    std::size_t index_of(int id) const;
    /// The case's own Vδ bus.
    std::size_t reference_bus() const;
    double z_base() const { return v_base_kv * v_base_kv / s_base_mva; }
    bool lossless() const;
};

PerUnitNetwork to_per_unit(const NetworkCase& c);
NetworkCase from_per_unit(const PerUnitNetwork& net);

/// Dense nodal admittance matrix in per-unit with the polar data used by the
/// load-flow equations. `loss_angle(k, m)` is measured from the mutual
/// admittance -Y_km, so a purely reactive branch has loss angle 0 and a
/// resistive one has atan(r/x).
struct AdmittanceMatrix {
    Eigen::MatrixXcd y;
    Eigen::MatrixXd magnitude;
    Eigen::MatrixXd loss_angle;

    std::size_t size() const { return static_cast<std::size_t>(y.rows()); }
};

AdmittanceMatrix build_ybus(const PerUnitNetwork& net);

/// Sum of series I^2 R losses over all branches, per-unit.
double branch_losses(const PerUnitNetwork& net, const Eigen::VectorXd& delta,
                     const Eigen::VectorXd& v);

}  // namespace msflow

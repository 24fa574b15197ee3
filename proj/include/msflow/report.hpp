#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "msflow/marginal.hpp"
#include "msflow/powerflow.hpp"
#include "msflow/sensitivity.hpp"

namespace msflow::report {

using Json = nlohmann::ordered_json;

/// Rounds to 6 significant digits so printed reports are stable across
/// platforms; -0 becomes 0.
double round6(double x);

Json state(const Grid& grid, const Partition& part, const SteadyState& s);
Json itl(const Grid& grid, const Partition& part, const ItlVector& coeff, double sigma_min);
Json lambda(const Grid& grid, const Partition& part, const LagrangeVector& lam, double sigma_min);
Json marginal(const Grid& grid, const MsResult& ms);
Json relocation(const RelocationVerdict& v);

/// Columns t, P_<id>..., V_<id>..., sigma_min with P in MW and V in kV.
std::string nose_csv(const Grid& grid, const MsResult& ms);

struct TableRow {
    std::string label;
    std::vector<double> p_mw;
    std::vector<double> lambda;
};

/// Bus columns with one P row and one lambda row per scenario.
std::string table(const std::vector<int>& bus_ids, const std::vector<TableRow>& rows);

std::string dump(const Json& j);

}  // namespace msflow::report

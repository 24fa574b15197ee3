#include "msflow/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace msflow::report {

namespace {

Eigen::Index idx(std::size_t k) { return static_cast<Eigen::Index>(k); }

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

Json number_or_null(bool present, double x) { return present ? Json(round6(x)) : Json(nullptr); }

Json slack_json(const SlackModel& m) {
    Json j;
    if (const auto* s = std::get_if<SingleSlack>(&m)) {
        j["type"] = "single";
        j["bus"] = s->bus;
    } else {
        const auto& d = std::get<DistributedSlack>(m);
        j["type"] = "distributed";
        Json a = Json::object();
        for (const auto& [bus, w] : d.alpha) a[std::to_string(bus)] = round6(w);
        j["alpha"] = a;
        j["angle_ref"] = d.angle_ref;
    }
    return j;
}

}  // namespace

double round6(double x) {
    if (!std::isfinite(x)) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    const double r = std::strtod(buf, nullptr);
    return r == 0.0 ? 0.0 : r;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json state(const Grid& grid, const Partition& part, const SteadyState& s) {
    const double sb = grid.net.s_base_mva;
    const double vb = grid.net.v_base_kv;
    Json j;
    j["slack"] = slack_json(part.model());
    Json buses = Json::array();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto& b = grid.net.buses[k];
        Json e;
        e["id"] = b.id;
        e["kind"] = std::string(to_string(b.kind));
        e["delta_deg"] = round6(deg(s.delta(idx(k))));
        e["v_kv"] = round6(s.v(idx(k)) * vb);
        e["p_mw"] = round6(s.p(idx(k)) * sb);
        e["q_mvar"] = round6(s.q(idx(k)) * sb);
        buses.push_back(e);
    }
    j["buses"] = buses;
    j["slack_power_mw"] = round6(s.slack_power * sb);
    j["losses_mw"] = round6(s.losses * sb);
    j["balance_mw"] = round6(s.balance * sb);
    j["iterations"] = s.iterations;
    j["mismatch_norm"] = round6(s.mismatch_norm);
    return j;
}

Json itl(const Grid& grid, const Partition& part, const ItlVector& coeff, double sigma_min) {
    Json j;
    j["slack"] = slack_json(part.model());
    Json buses = Json::array();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Json e;
        e["id"] = grid.net.buses[k].id;
        e["itl_p"] = number_or_null(coeff.has_p[k], coeff.dp(idx(k)));
        e["itl_q"] = number_or_null(coeff.has_q[k], coeff.dq(idx(k)));
        buses.push_back(e);
    }
    j["buses"] = buses;
    j["sigma_min"] = round6(sigma_min);
    return j;
}

Json lambda(const Grid& grid, const Partition& part, const LagrangeVector& lam, double sigma_min) {
    Json j;
    j["slack"] = slack_json(part.model());
    j["normalization"] = std::string(to_string(lam.normalization));
    Json buses = Json::array();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Json e;
        e["id"] = grid.net.buses[k].id;
        e["lambda_p"] = round6(lam.p(idx(k)));
        e["lambda_q"] = number_or_null(lam.has_q[k], lam.q(idx(k)));
        buses.push_back(e);
    }
    j["buses"] = buses;
    j["slack_component"] = round6(lam.slack_component(part));
    j["sigma_min"] = round6(sigma_min);
    return j;
}

Json marginal(const Grid& grid, const MsResult& ms) {
    Json j = state(grid, ms.partition, ms.state);
    j["t"] = round6(ms.t);
    j["sigma_min"] = round6(ms.sigma_min);
    j["sigma_base"] = round6(ms.sigma_base);
    j["threshold"] = round6(ms.threshold);
    j["lambda"] = lambda(grid, ms.partition, ms.lambda, ms.sigma_min)["buses"];
    j["lambda_slack"] = round6(ms.lambda.slack_component(ms.partition));
    Json r;
    r["refined"] = ms.refinement.refined;
    r["iterations"] = ms.refinement.iterations;
    r["residual"] = ms.refinement.refined ? Json(round6(ms.refinement.residual)) : Json(nullptr);
    if (!ms.refinement.message.empty()) r["message"] = ms.refinement.message;
    j["refinement"] = r;
    j["trace_points"] = ms.trace.size();
    return j;
}

Json relocation(const RelocationVerdict& v) {
    Json j;
    j["new_slack"] = v.new_slack;
    j["marginal"] = v.marginal;
    j["sigma_min"] = round6(v.sigma_min);
    j["threshold"] = round6(v.threshold);
    return j;
}

std::string nose_csv(const Grid& grid, const MsResult& ms) {
    std::ostringstream os;
    os << "t";
    for (const auto& b : grid.net.buses) os << ",P_" << b.id;
    for (const auto& b : grid.net.buses) os << ",V_" << b.id;
    os << ",sigma_min\n";
    os << std::setprecision(6);
    const double sb = grid.net.s_base_mva;
    const double vb = grid.net.v_base_kv;
    auto row = [&](double t, const SteadyState& s, double sigma) {
        os << round6(t);
        for (Eigen::Index k = 0; k < s.p.size(); ++k) os << ',' << round6(s.p(k) * sb);
        for (Eigen::Index k = 0; k < s.v.size(); ++k) os << ',' << round6(s.v(k) * vb);
        os << ',' << round6(sigma) << '\n';
    };
    for (const auto& pt : ms.trace) row(pt.t, pt.state, pt.sigma_min);
    if (ms.refinement.refined) row(ms.t, ms.state, ms.sigma_min);
    return os.str();
}

std::string table(const std::vector<int>& bus_ids, const std::vector<TableRow>& rows) {
    std::size_t label_w = 6;
    for (const auto& r : rows) label_w = std::max(label_w, r.label.size() + 4);
    constexpr int col = 11;
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(label_w)) << "Bus" << std::right;
    for (int id : bus_ids) os << std::setw(col) << id;
    os << '\n';
    auto line = [&](const std::string& label, const std::vector<double>& vals) {
        os << std::left << std::setw(static_cast<int>(label_w)) << label << std::right << std::fixed
           << std::setprecision(4);
        for (double x : vals) os << std::setw(col) << (std::abs(x) < 5e-5 ? 0.0 : x);
        os << '\n';
    };
    for (const auto& r : rows) {
        os << r.label << '\n';
        line("  P", r.p_mw);
        line("  lambda", r.lambda);
    }
    return os.str();
}

}  // namespace msflow::report

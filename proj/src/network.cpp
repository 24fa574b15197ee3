#include "msflow/network.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "msflow/errors.hpp"

namespace msflow {

using nlohmann::json;

std::string_view to_string(BusKind kind) {
    switch (kind) {
    case BusKind::PQ: return "PQ";
    case BusKind::PV: return "PV";
    case BusKind::VD: return "VD";
    }
    return "?";
}

namespace {

[[noreturn]] void schema(const std::string& msg) {
    throw Error(ErrorCode::Schema, "case file: " + msg);
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (auto a : allowed) ok = ok || it.key() == a;
        if (!ok) schema("unknown key '" + it.key() + "' in " + where);
    }
}

double number(const json& obj, const char* key, const std::string& where,
              std::optional<double> fallback = std::nullopt) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (fallback) return *fallback;
        schema(std::string("missing '") + key + "' in " + where);
    }
    if (!it->is_number()) schema(std::string("'") + key + "' must be a number in " + where);
    double x = it->get<double>();
    if (!std::isfinite(x)) schema(std::string("'") + key + "' is not finite in " + where);
    return x;
}

int integer(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) schema(std::string("missing '") + key + "' in " + where);
    if (!it->is_number_integer()) schema(std::string("'") + key + "' must be an integer in " + where);
    return it->get<int>();
}

BusKind parse_kind(const json& j, const std::string& where) {
    if (!j.is_string()) schema("'kind' must be a string in " + where);
    auto s = j.get<std::string>();
    if (s == "PQ") return BusKind::PQ;
    if (s == "PV") return BusKind::PV;
    if (s == "VD") return BusKind::VD;
    schema("unknown bus kind '" + s + "' in " + where);
}

}  // namespace

std::size_t NetworkCase::index_of(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    throw Error(ErrorCode::MissingEndpoint, "bus " + std::to_string(id) + " not in case");
}

void validate(const NetworkCase& c) {
    if (!(c.s_base_mva > 0.0) || !(c.v_base_kv > 0.0))
        throw Error(ErrorCode::NonpositiveBase, "s_base_mva and v_base_kv must be positive");
    if (c.buses.empty()) throw Error(ErrorCode::Schema, "case file: no buses");

    std::unordered_map<int, std::size_t> pos;
    int vd_count = 0;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const auto& b = c.buses[i];
        if (!pos.emplace(b.id, i).second)
            throw Error(ErrorCode::DuplicateBus, "duplicate bus id " + std::to_string(b.id));
        if (b.kind != BusKind::PQ && !b.v_kv)
            throw Error(ErrorCode::Schema,
                        "case file: bus " + std::to_string(b.id) + " needs a voltage magnitude");
        if (b.v_kv && !(*b.v_kv > 0.0))
            throw Error(ErrorCode::Schema,
                        "case file: bus " + std::to_string(b.id) + " has nonpositive voltage");
        if (b.kind == BusKind::VD) ++vd_count;
    }
    if (vd_count == 0) throw Error(ErrorCode::NoSlackBus, "case has no VD bus");
    if (vd_count > 1) throw Error(ErrorCode::Schema, "case file: more than one VD bus");

    // union-find for connectivity
    std::vector<std::size_t> parent(c.buses.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& br : c.branches) {
        auto f = pos.find(br.from);
        auto t = pos.find(br.to);
        if (f == pos.end() || t == pos.end())
            throw Error(ErrorCode::MissingEndpoint, "branch " + std::to_string(br.from) + "-" +
                                                        std::to_string(br.to) +
                                                        " references a missing bus");
        if (br.from == br.to)
            throw Error(ErrorCode::Schema,
                        "case file: branch from and to are both " + std::to_string(br.from));
        parent[find(f->second)] = find(t->second);
    }
    for (std::size_t i = 1; i < parent.size(); ++i)
        if (find(i) != find(0)) throw Error(ErrorCode::Schema, "case file: network is not connected");
}

NetworkCase parse_case(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        schema(std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) schema("top level must be an object");
    reject_unknown(doc, {"s_base_mva", "v_base_kv", "buses", "branches"}, "case");

    NetworkCase c;
    c.s_base_mva = number(doc, "s_base_mva", "case", 100.0);
    c.v_base_kv = number(doc, "v_base_kv", "case");

    auto buses = doc.find("buses");
    if (buses == doc.end() || !buses->is_array()) schema("'buses' must be an array");
    if (buses->empty()) schema("no buses");
    for (std::size_t i = 0; i < buses->size(); ++i) {
        const auto& jb = (*buses)[i];
        std::string where = "buses[" + std::to_string(i) + "]";
        if (!jb.is_object()) schema(where + " must be an object");
        reject_unknown(jb,
                       {"id", "kind", "p_mw", "q_mvar", "v_kv", "delta_rad", "shunt_g_s", "shunt_b_s"},
                       where);
        BusSpec b;
        b.id = integer(jb, "id", where);
        if (!jb.contains("kind")) schema("missing 'kind' in " + where);
        b.kind = parse_kind(jb["kind"], where);
        b.p_mw = number(jb, "p_mw", where, 0.0);
        b.q_mvar = number(jb, "q_mvar", where, 0.0);
        if (jb.contains("v_kv")) b.v_kv = number(jb, "v_kv", where);
        b.delta_rad = number(jb, "delta_rad", where, 0.0);
        b.shunt_g_s = number(jb, "shunt_g_s", where, 0.0);
        b.shunt_b_s = number(jb, "shunt_b_s", where, 0.0);
        c.buses.push_back(b);
    }

    auto branches = doc.find("branches");
    if (branches != doc.end()) {
        if (!branches->is_array()) schema("'branches' must be an array");
        for (std::size_t i = 0; i < branches->size(); ++i) {
            const auto& jl = (*branches)[i];
            std::string where = "branches[" + std::to_string(i) + "]";
            if (!jl.is_object()) schema(where + " must be an object");
            reject_unknown(jl, {"from", "to", "r_ohm", "x_ohm", "b_s"}, where);
            BranchSpec br;
            br.from = integer(jl, "from", where);
            br.to = integer(jl, "to", where);
            br.r_ohm = number(jl, "r_ohm", where, 0.0);
            br.x_ohm = number(jl, "x_ohm", where, 0.0);
            br.b_s = number(jl, "b_s", where, 0.0);
            c.branches.push_back(br);
        }
    }

    validate(c);
    return c;
}

NetworkCase load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Schema, "cannot open case file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::string dump_case(const NetworkCase& c) {
    nlohmann::ordered_json doc;
    doc["s_base_mva"] = c.s_base_mva;
    doc["v_base_kv"] = c.v_base_kv;
    doc["buses"] = nlohmann::ordered_json::array();
    for (const auto& b : c.buses) {
        nlohmann::ordered_json jb;
        jb["id"] = b.id;
        jb["kind"] = std::string(to_string(b.kind));
        jb["p_mw"] = b.p_mw;
        if (b.kind == BusKind::PQ) jb["q_mvar"] = b.q_mvar;
        if (b.v_kv) jb["v_kv"] = *b.v_kv;
        if (b.kind == BusKind::VD) jb["delta_rad"] = b.delta_rad;
        if (b.shunt_g_s != 0.0) jb["shunt_g_s"] = b.shunt_g_s;
        if (b.shunt_b_s != 0.0) jb["shunt_b_s"] = b.shunt_b_s;
        doc["buses"].push_back(jb);
    }
    doc["branches"] = nlohmann::ordered_json::array();
    for (const auto& br : c.branches) {
        nlohmann::ordered_json jl;
        jl["from"] = br.from;
        jl["to"] = br.to;
        jl["r_ohm"] = br.r_ohm;
        jl["x_ohm"] = br.x_ohm;
        if (br.b_s != 0.0) jl["b_s"] = br.b_s;
        doc["branches"].push_back(jl);
    }
    return doc.dump(2);
}

std::size_t PerUnitNetwork::index_of(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    throw Error(ErrorCode::MissingEndpoint, "bus " + std::to_string(id) + " not in network");
}

std::size_t PerUnitNetwork::reference_bus() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind == BusKind::VD) return i;
    throw Error(ErrorCode::NoSlackBus, "network has no VD bus");
}

bool PerUnitNetwork::lossless() const {
    for (const auto& br : branches)
        if (br.z.real() != 0.0) return false;
    for (const auto& b : buses)
        if (b.shunt.real() != 0.0) return false;
    return true;
}

PerUnitNetwork to_per_unit(const NetworkCase& c) {
    validate(c);
    PerUnitNetwork net;
    net.s_base_mva = c.s_base_mva;
    net.v_base_kv = c.v_base_kv;
    const double zb = c.v_base_kv * c.v_base_kv / c.s_base_mva;

    net.buses.reserve(c.buses.size());
    for (const auto& b : c.buses) {
        PuBus pb;
        pb.id = b.id;
        pb.kind = b.kind;
        pb.p = b.p_mw / c.s_base_mva;
        pb.q = b.q_mvar / c.s_base_mva;
        pb.v = b.v_kv ? *b.v_kv / c.v_base_kv : 1.0;
        pb.delta = b.delta_rad;
        pb.shunt = Complex(b.shunt_g_s, b.shunt_b_s) * zb;
        net.buses.push_back(pb);
    }
    for (const auto& br : c.branches) {
        PuBranch pb;
        pb.from = c.index_of(br.from);
        pb.to = c.index_of(br.to);
        pb.z = Complex(br.r_ohm, br.x_ohm) / zb;
        pb.b = br.b_s * zb;
        net.branches.push_back(pb);
    }
    return net;
}

NetworkCase from_per_unit(const PerUnitNetwork& net) {
    NetworkCase c;
    c.s_base_mva = net.s_base_mva;
    c.v_base_kv = net.v_base_kv;
    const double zb = net.z_base();
    for (const auto& b : net.buses) {
        BusSpec s;
        s.id = b.id;
        s.kind = b.kind;
        s.p_mw = b.p * net.s_base_mva;
        s.q_mvar = b.q * net.s_base_mva;
        if (b.kind != BusKind::PQ) s.v_kv = b.v * net.v_base_kv;
        s.delta_rad = b.delta;
        s.shunt_g_s = b.shunt.real() / zb;
        s.shunt_b_s = b.shunt.imag() / zb;
        c.buses.push_back(s);
    }
    for (const auto& br : net.branches) {
        BranchSpec s;
        s.from = net.buses[br.from].id;
        s.to = net.buses[br.to].id;
        s.r_ohm = br.z.real() * zb;
        s.x_ohm = br.z.imag() * zb;
        s.b_s = br.b / zb;
        c.branches.push_back(s);
    }
    return c;
}

AdmittanceMatrix build_ybus(const PerUnitNetwork& net) {
    const auto n = static_cast<Eigen::Index>(net.size());
    AdmittanceMatrix a;
    a.y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : net.branches) {
        if (br.z == Complex{})
            throw Error(ErrorCode::ZeroImpedance,
                        "branch " + std::to_string(net.buses[br.from].id) + "-" +
                            std::to_string(net.buses[br.to].id) + " has zero impedance");
        const Complex y = 1.0 / br.z;
        const Complex half_charging(0.0, br.b / 2.0);
        const auto f = static_cast<Eigen::Index>(br.from);
        const auto t = static_cast<Eigen::Index>(br.to);
        a.y(f, f) += y + half_charging;
        a.y(t, t) += y + half_charging;
        a.y(f, t) -= y;
        a.y(t, f) -= y;
    }
    for (Eigen::Index k = 0; k < n; ++k) a.y(k, k) += net.buses[static_cast<std::size_t>(k)].shunt;

    a.magnitude = a.y.cwiseAbs();
    a.loss_angle = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index m = 0; m < n; ++m) {
            if (a.magnitude(k, m) == 0.0) continue;
            double alpha = std::arg(a.y(k, m)) - std::numbers::pi / 2.0;
            if (alpha <= -std::numbers::pi) alpha += 2.0 * std::numbers::pi;
            a.loss_angle(k, m) = alpha;
        }
    }
    return a;
}

double branch_losses(const PerUnitNetwork& net, const Eigen::VectorXd& delta,
                     const Eigen::VectorXd& v) {
    double total = 0.0;
    for (const auto& br : net.branches) {
        const auto f = static_cast<Eigen::Index>(br.from);
        const auto t = static_cast<Eigen::Index>(br.to);
        const Complex vf = std::polar(v(f), delta(f));
        const Complex vt = std::polar(v(t), delta(t));
        const Complex i = (vf - vt) / br.z;
        total += std::norm(i) * br.z.real();
    }
    return total;
}

}  // namespace msflow

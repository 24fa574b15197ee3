#include "msflow/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "msflow/errors.hpp"
#include "msflow/marginal.hpp"
#include "msflow/report.hpp"
#include "msflow/scenario.hpp"

namespace msflow {

namespace {

using report::Json;

struct RunConfig {
    std::string case_path;
    std::optional<double> sbase;
    bool quiet = false;
    std::string out_path;
    std::string format;

    std::optional<int> slack;
    std::string distributed;
    std::optional<int> angle_ref;
    bool allow_negative_alpha = false;
    double tol = 1e-8;
    int max_iter = 50;

    std::string direction;
    double tol_sigma = 1e-6;
    double step_mw = 10.0;
    bool no_refine = false;

    std::string relocate_to;
    std::optional<int> new_slack;
    std::string new_distributed;
    std::string norm;
    std::string slacks;
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

int parse_int(const std::string& s, ErrorCode code, const std::string& what) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(trim(s), &used);
    } catch (const std::exception&) {
        throw Error(code, "cannot parse " + what + " '" + s + "'");
    }
    if (used != trim(s).size()) throw Error(code, "cannot parse " + what + " '" + s + "'");
    return v;
}

double parse_double(const std::string& s, ErrorCode code, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(trim(s), &used);
    } catch (const std::exception&) {
        throw Error(code, "cannot parse " + what + " '" + s + "'");
    }
    if (used != trim(s).size()) throw Error(code, "cannot parse " + what + " '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!trim(item).empty()) out.push_back(item);
    return out;
}

// "bus:value,bus:value"
std::map<int, double> parse_bus_map(const std::string& text, ErrorCode code, const std::string& what) {
    std::map<int, double> out;
    for (const auto& item : split(text, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw Error(code, what + " entry '" + item + "' is not bus:value");
        const int bus = parse_int(item.substr(0, colon), code, what + " bus");
        if (out.count(bus)) throw Error(code, what + " lists bus " + std::to_string(bus) + " twice");
        out[bus] = parse_double(item.substr(colon + 1), code, what + " value");
    }
    if (out.empty()) throw Error(code, what + " is empty");
    return out;
}

std::vector<int> parse_ids(const std::string& text, ErrorCode code) {
    std::vector<int> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_int(item, code, "bus id"));
    if (out.empty()) throw Error(code, "empty bus list");
    return out;
}

int case_reference_id(const NetworkCase& c) {
    for (const auto& b : c.buses)
        if (b.kind == BusKind::VD) return b.id;
    throw Error(ErrorCode::NoSlackBus, "case has no VD bus");
}

SlackModel distributed_model(const std::string& text, const RunConfig& cfg, const NetworkCase& c) {
    DistributedSlack d;
    d.alpha = parse_bus_map(text, ErrorCode::InvalidSlack, "participation vector");
    d.angle_ref = cfg.angle_ref.value_or(case_reference_id(c));
    d.require_nonnegative = !cfg.allow_negative_alpha;
    return d;
}

SlackModel slack_model(const RunConfig& cfg, const NetworkCase& c) {
    if (!cfg.distributed.empty()) return distributed_model(cfg.distributed, cfg, c);
    return SingleSlack{cfg.slack.value_or(case_reference_id(c))};
}

Direction parse_direction(const std::string& text) {
    if (text.empty()) throw Error(ErrorCode::InvalidDirection, "--direction is required");
    Direction d;
    // "bus:dP" or "bus:dP:dQ"
    for (const auto& item : split(text, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() < 2 || parts.size() > 3)
            throw Error(ErrorCode::InvalidDirection, "direction entry '" + item + "' is not bus:dP[:dQ]");
        const int bus = parse_int(parts[0], ErrorCode::InvalidDirection, "direction bus");
        if (d.dp_mw.count(bus))
            throw Error(ErrorCode::InvalidDirection, "direction lists bus " + std::to_string(bus) + " twice");
        d.dp_mw[bus] = parse_double(parts[1], ErrorCode::InvalidDirection, "direction value");
        if (parts.size() == 3) d.dq_mvar[bus] = parse_double(parts[2], ErrorCode::InvalidDirection, "direction value");
    }
    return d;
}

Normalization parse_norm(const std::string& s) {
    if (s == "slack-one") return Normalization::SlackOne;
    if (s == "unit-euclidean") return Normalization::UnitEuclidean;
    if (s == "sup-norm") return Normalization::SupNorm;
    throw Error(ErrorCode::Schema, "unknown normalization '" + s + "'");
}

class Runner {
  public:
    Runner(const RunConfig& cfg, std::ostream& err) : cfg_(cfg), err_(err) {
        if (!std::filesystem::is_regular_file(cfg.case_path))
            throw Error(ErrorCode::Schema, "case file not found: " + cfg.case_path);
        case_ = load_case(cfg.case_path);
        if (cfg.sbase) {
            case_.s_base_mva = *cfg.sbase;
            validate(case_);
        }
        solver_.mismatch_tol = cfg.tol;
        solver_.max_iterations = cfg.max_iter;
    }

    std::string solve() {
        require_format({"json"});
        const auto sc = scenario(slack_model(cfg_, case_));
        return report::dump(report::state(sc.grid, sc.partition, sc.base));
    }

    std::string itl() {
        require_format({"json"});
        const auto sc = scenario(slack_model(cfg_, case_));
        const auto jac = jacobians(sc.grid, sc.partition, sc.base);
        const auto coeff = msflow::itl(jac, sc.partition);
        return report::dump(
            report::itl(sc.grid, sc.partition, coeff, smallest_singular(jac.load_flow).sigma));
    }

    std::string lambda() {
        require_format({"json"});
        const auto sc = scenario(slack_model(cfg_, case_));
        if (!cfg_.direction.empty()) {
            const auto ms = marginal_state(sc);
            const auto norm = parse_norm(cfg_.norm.empty() ? "unit-euclidean" : cfg_.norm);
            return report::dump(report::lambda(sc.grid, ms.partition, ms.lambda.normalized(norm, ms.partition),
                                               ms.sigma_min));
        }
        const auto jac = jacobians(sc.grid, sc.partition, sc.base);
        const auto coeff = msflow::itl(jac, sc.partition);
        auto lam = lagrange_from_itl(coeff, 1.0, sc.partition);
        if (!cfg_.norm.empty()) lam = lam.normalized(parse_norm(cfg_.norm), sc.partition);
        return report::dump(
            report::lambda(sc.grid, sc.partition, lam, smallest_singular(jac.load_flow).sigma));
    }

    std::string ms_direction() {
        require_format({"json"});
        const auto sc = scenario(slack_model(cfg_, case_));
        const auto ms = marginal_state(sc);
        return report::dump(report::marginal(sc.grid, ms));
    }

    std::string nose() {
        require_format({"csv"});
        const auto sc = scenario(slack_model(cfg_, case_));
        return report::nose_csv(sc.grid, marginal_state(sc));
    }

    std::string slack_swap() {
        require_format({"json"});
        const auto model = slack_model(cfg_, case_);
        if (!std::holds_alternative<SingleSlack>(model))
            throw Error(ErrorCode::InvalidSlack, "slack-swap starts from a single slack bus");
        const auto sc = scenario(model);
        const auto ms = marginal_state(sc);
        const int old_id = std::get<SingleSlack>(model).bus;

        Json j;
        j["marginal_state"] = report::marginal(sc.grid, ms);
        Json list = Json::array();
        for (int id : parse_ids(cfg_.relocate_to, ErrorCode::InvalidSlack)) {
            if (id == old_id) throw Error(ErrorCode::InvalidSlack, "new slack equals the current slack");
            const auto verdict = slack_relocation_check(sc.grid, ms, id);
            Json e = report::relocation(verdict);
            if (verdict.lambda) {
                const Partition part(sc.grid.net, SingleSlack{id});
                e["lambda"] = report::lambda(sc.grid, part, *verdict.lambda, verdict.sigma_min)["buses"];
            } else {
                const Partition part(sc.grid.net, SingleSlack{id});
                const auto coeff = msflow::itl(sc.grid, part, ms.state);
                e["itl_old_slack"] = report::round6(coeff.dp(static_cast<Eigen::Index>(sc.grid.net.index_of(old_id))));
            }
            list.push_back(e);
        }
        j["relocations"] = list;
        return report::dump(j);
    }

    std::string ms_identities() {
        require_format({"json"});
        const auto model = slack_model(cfg_, case_);
        const auto sc = scenario(model);
        const auto ms = marginal_state(sc);

        Json j;
        j["marginal_state"] = report::marginal(sc.grid, ms);
        j["sum_alpha_lambda"] = report::round6(ms.partition.alpha().dot(ms.lambda.p));

        std::optional<SlackModel> target;
        if (!cfg_.new_distributed.empty())
            target = distributed_model(cfg_.new_distributed, cfg_, case_);
        else if (cfg_.new_slack)
            target = SingleSlack{*cfg_.new_slack};
        if (target) {
            const auto ids = distributed_ms_identities(sc.grid, ms, *target);
            Json t;
            t["slack"] = describe(*target);
            t["itl_weighted_sum"] = report::round6(ids.itl_weighted_sum);
            j["re_referenced"] = t;
        }

        if (sc.grid.net.lossless() && !ms.partition.distributed()) {
            Json checks = Json::array();
            auto add = [&](const std::string& label, double beta) {
                const auto r = lossless_null_combination(sc.grid, ms, beta);
                Json e;
                e["beta"] = label;
                e["residual"] = report::round6(r.residual);
                e["small_singular_values"] = r.small_singular_count;
                checks.push_back(e);
            };
            add("0", 0.0);
            for (std::size_t k = 0; k < sc.grid.size(); ++k) {
                if (k == ms.partition.slack_bus()) continue;
                add("-lambda_" + std::to_string(sc.grid.net.buses[k].id),
                    -ms.lambda.p(static_cast<Eigen::Index>(k)));
            }
            j["lossless_null_space"] = checks;
        }
        return report::dump(j);
    }

    std::string report_table() {
        const std::string fmt = cfg_.format.empty() ? "table" : cfg_.format;
        if (fmt != "table" && fmt != "json") throw Error(ErrorCode::Schema, "report-table supports table or json");

        const int ref = case_reference_id(case_);
        std::vector<report::TableRow> rows;
        const auto base = scenario(SingleSlack{ref});
        {
            const auto coeff = msflow::itl(base.grid, base.partition, base.base);
            const auto lam = lagrange_from_itl(coeff, 1.0, base.partition);
            rows.push_back({"Base case, slack bus " + std::to_string(ref), mw(base.grid, base.base.p),
                            std::vector<double>(lam.p.data(), lam.p.data() + lam.p.size())});
        }
        const auto norm = parse_norm(cfg_.norm.empty() ? "unit-euclidean" : cfg_.norm);
        const std::vector<int> slacks =
            cfg_.slacks.empty() ? std::vector<int>{ref} : parse_ids(cfg_.slacks, ErrorCode::InvalidSlack);
        for (int s : slacks) {
            const auto sc = scenario(SingleSlack{s});
            const auto ms = marginal_state(sc);
            const auto lam = ms.lambda.normalized(norm, ms.partition);
            rows.push_back({"MS, slack bus " + std::to_string(s), mw(sc.grid, ms.state.p),
                            std::vector<double>(lam.p.data(), lam.p.data() + lam.p.size())});
        }

        std::vector<int> ids;
        for (const auto& b : case_.buses) ids.push_back(b.id);
        if (fmt == "table") return report::table(ids, rows);
        Json j = Json::array();
        for (const auto& r : rows) {
            Json e;
            e["scenario"] = r.label;
            Json p = Json::array(), l = Json::array();
            for (double x : r.p_mw) p.push_back(report::round6(x));
            for (double x : r.lambda) l.push_back(report::round6(x));
            e["bus_ids"] = ids;
            e["p_mw"] = p;
            e["lambda"] = l;
            j.push_back(e);
        }
        return report::dump(j);
    }

  private:
    void require_format(std::initializer_list<const char*> allowed) const {
        if (cfg_.format.empty()) return;
        for (const char* f : allowed)
            if (cfg_.format == f) return;
        throw Error(ErrorCode::Schema, "output format '" + cfg_.format + "' is not available here");
    }

    Scenario scenario(const SlackModel& model) const { return prepare_scenario(case_, model, solver_); }

    MsResult marginal_state(const Scenario& sc) const {
        ContinuationOptions opts;
        opts.sigma_rel_threshold = cfg_.tol_sigma;
        opts.initial_step_mw = cfg_.step_mw;
        opts.refine = !cfg_.no_refine;
        auto ms = continuation_to_ms(sc.grid, sc.partition, sc.injections, parse_direction(cfg_.direction), opts,
                                     &sc.base);
        if (!ms.refinement.refined && !cfg_.no_refine && !cfg_.quiet)
            err_ << "warning: " << ms.refinement.message << "; reporting the last continuation point\n";
        return ms;
    }

    static std::vector<double> mw(const Grid& grid, const Eigen::VectorXd& p) {
        std::vector<double> out(static_cast<std::size_t>(p.size()));
        for (Eigen::Index k = 0; k < p.size(); ++k) out[static_cast<std::size_t>(k)] = p(k) * grid.net.s_base_mva;
        return out;
    }

    const RunConfig& cfg_;
    std::ostream& err_;
    NetworkCase case_;
    SolverOptions solver_;
};

void add_case_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--case", cfg.case_path, "Case file (JSON)")->required();
    auto* slack = sub->add_option("--slack", cfg.slack, "Single slack bus id (default: the case's VD bus)");
    auto* dist = sub->add_option("--distributed", cfg.distributed, "Distributed slack \"bus:alpha,...\"");
    slack->excludes(dist);
    sub->add_option("--angle-ref", cfg.angle_ref, "Angle reference under distributed slack");
    sub->add_flag("--allow-negative-alpha", cfg.allow_negative_alpha, "Accept negative participation factors");
    sub->add_option("--tol", cfg.tol, "Mismatch tolerance, pu")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", cfg.max_iter, "Newton iteration limit")->check(CLI::PositiveNumber);
    sub->add_option("--format", cfg.format, "Output format: json, csv or table");
}

void add_direction_options(CLI::App* sub, RunConfig& cfg, bool required) {
    auto* d = sub->add_option("--direction", cfg.direction, "Power change per unit t, \"bus:dP[:dQ],...\" in MW/MVAr");
    if (required) d->required();
    sub->add_option("--tol-sigma", cfg.tol_sigma, "Marginal threshold relative to the base sigma_min")
        ->check(CLI::PositiveNumber);
    sub->add_option("--step", cfg.step_mw, "Initial continuation step, MW along the direction")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--no-refine", cfg.no_refine, "Skip point-of-collapse refinement");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Load flow, loss sensitivities and marginal states of AC networks"};
    app.name("msflow");
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--sbase", cfg.sbase, "Override the case power base, MVA");
    app.add_flag("--quiet", cfg.quiet, "Suppress warnings");
    app.add_option("--out", cfg.out_path, "Write the result to a file instead of stdout");

    auto* solve = app.add_subcommand("solve", "Solve the load flow");
    auto* itl = app.add_subcommand("itl", "Incremental transmission loss coefficients");
    auto* lambda = app.add_subcommand("lambda", "Lagrange multipliers at the base or marginal state");
    auto* ms = app.add_subcommand("ms-direction", "Marginal state along a direction");
    auto* nose = app.add_subcommand("nose", "Continuation trace as CSV");
    auto* swap = app.add_subcommand("slack-swap", "Marginality after moving the slack bus");
    auto* ident = app.add_subcommand("ms-identities", "Multiplier identities at a marginal state");
    auto* table = app.add_subcommand("report-table", "Bus powers and multipliers per scenario");

    for (auto* sub : {solve, itl, lambda, ms, nose, swap, ident, table}) add_case_options(sub, cfg);
    add_direction_options(lambda, cfg, false);
    lambda->add_option("--norm", cfg.norm, "slack-one, unit-euclidean or sup-norm");
    for (auto* sub : {ms, nose, swap, ident, table}) add_direction_options(sub, cfg, true);
    swap->add_option("--to", cfg.relocate_to, "New slack bus ids, comma separated")->required();
    auto* ns = ident->add_option("--new-slack", cfg.new_slack, "Re-reference ITLs to this single slack");
    auto* nd = ident->add_option("--new-distributed", cfg.new_distributed, "Re-reference ITLs to \"bus:alpha,...\"");
    ns->excludes(nd);
    table->add_option("--slacks", cfg.slacks, "Slack buses for the marginal-state rows");
    table->add_option("--norm", cfg.norm, "Multiplier normalization of the marginal-state rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        Runner run(cfg, err);
        std::string text;
        if (*solve) text = run.solve();
        else if (*itl) text = run.itl();
        else if (*lambda) text = run.lambda();
        else if (*ms) text = run.ms_direction();
        else if (*nose) text = run.nose();
        else if (*swap) text = run.slack_swap();
        else if (*ident) text = run.ms_identities();
        else text = run.report_table();

        if (cfg.out_path.empty()) {
            out << text;
        } else {
            std::ofstream f(cfg.out_path, std::ios::binary);
            if (!f) {
                err << "error: cannot write " << cfg.out_path << "\n";
                return 2;
            }
            f << text;
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.is_input_error() ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace msflow

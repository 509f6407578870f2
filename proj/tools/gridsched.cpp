// gridsched command-line tool.
//
//   gridsched run        — execute one scenario in a chosen mode and write
//                          the full result set (scenario echo, network CSV,
//                          per-home schedules, prices, iteration log,
//                          metrics JSON) into an output directory.
//   gridsched reproduce  — canned experiment bundles on the reference
//                          scenario (load comparison, line loading, savings
//                          tables, w sweep).
//   gridsched init       — write the built-in reference scenario to a JSON
//                          file for editing.
//
// Exit codes: 0 success, 1 validation/usage error, 2 finished but the
// negotiation did not converge (outputs are still written and flagged).

#include "gridsched/coordinator.hpp"
#include "gridsched/metrics.hpp"
#include "gridsched/model.hpp"
#include "gridsched/scenario_json.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gridsched;

namespace {

int log_level() {
    const char* env = std::getenv("GRIDSCHED_LOG");
    if (env == nullptr) return 0;
    const std::string v(env);
    if (v == "debug" || v == "2") return 2;
    if (v == "info" || v == "1") return 1;
    return 0;
}

// Fixed shortest-float formatting so identical runs produce byte-identical
// files regardless of locale.
std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

struct RunConfig {
    std::string scenario_path; // empty = built-in reference scenario
    std::string mode = "global";
    std::string output_dir = "out";
    unsigned seed = 0;
    std::vector<std::string> overrides;
    int max_iters = -1;
    double tol = -1.0;
};

ValidatedScenario load_run_scenario(const RunConfig& cfg) {
    std::string text;
    if (cfg.scenario_path.empty()) {
        text = scenario_to_json(build_reference_scenario());
    } else {
        std::ifstream in(cfg.scenario_path, std::ios::binary);
        if (!in)
            throw SchemaError("cannot open scenario file: " + cfg.scenario_path);
        text.assign(std::istreambuf_iterator<char>(in), {});
    }
    for (const auto& kv : cfg.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw SchemaError("override must be key=value: " + kv);
        text = apply_override(text, kv.substr(0, eq), kv.substr(eq + 1));
    }
    Scenario s = scenario_from_json(text);
    if (cfg.max_iters > 0) s.admm.max_iters = cfg.max_iters;
    if (cfg.tol > 0) {
        s.admm.eps_primal = cfg.tol;
        s.admm.eps_dual = cfg.tol;
    }
    return validate_scenario(std::move(s));
}

void write_network_csv(const fs::path& path, const coord::RunResult& r) {
    std::string csv = "slot,total_load_kw,losses_kw,planned_kwh";
    const int lines = static_cast<int>(r.line_current_pu.rows());
    for (int f = 0; f < lines; ++f)
        csv += ",current_line" + std::to_string(f) + "_pu";
    csv += "\n";
    for (int t = 0; t < r.total_load_kw.size(); ++t) {
        csv += std::to_string(t) + "," + fmt(r.total_load_kw[t]) + "," +
               fmt(r.losses_kw[t]) + "," + fmt(r.planned_kwh[t]);
        for (int f = 0; f < lines; ++f)
            csv += "," + fmt(r.line_current_pu(f, t));
        csv += "\n";
    }
    write_text(path, csv);
}

void write_home_csvs(const fs::path& dir, const ValidatedScenario& vs,
                     const coord::RunResult& r) {
    const int H = static_cast<int>(r.home_ids.size());
    std::string starts = "home_id,appliance,start_slot\n";
    for (int h = 0; h < H; ++h) {
        const auto& sch = r.schedules[h];
        std::string csv = "slot,net_load_kw,battery_step,soc\n";
        const bool has_batt = sch.battery_action.size() > 0;
        for (int t = 0; t < sch.net_load_kw.size(); ++t) {
            csv += std::to_string(t) + "," + fmt(r.loads(h, t)) + ",";
            csv += has_batt ? fmt(sch.battery_action[t]) : std::string("0");
            csv += ",";
            csv += has_batt ? fmt(sch.soc[t + 1]) : std::string("");
            csv += "\n";
        }
        write_text(dir / ("home_" + r.home_ids[h] + ".csv"), csv);
        for (std::size_t a = 0; a < sch.appliance_start.size(); ++a)
            starts += r.home_ids[h] + "," + std::to_string(a) + "," +
                      std::to_string(sch.appliance_start[a]) + "\n";
    }
    (void)vs;
    write_text(dir / "appliance_starts.csv", starts);
}

void write_prices_csv(const fs::path& path, const coord::RunResult& r) {
    std::string csv = "slot,base_cents_per_kwh,fit_cents_per_kwh";
    const int H = static_cast<int>(r.home_ids.size());
    for (int h = 0; h < H; ++h)
        csv += ",buy_" + r.home_ids[h] + ",sell_" + r.home_ids[h];
    csv += "\n";
    for (int t = 0; t < r.prices.base.size(); ++t) {
        csv += std::to_string(t) + "," + fmt(r.prices.base[t]) + "," +
               fmt(r.prices.fit[t]);
        for (int h = 0; h < H; ++h)
            csv += "," + fmt(r.prices.buy(h, t)) + "," + fmt(r.prices.sell(h, t));
        csv += "\n";
    }
    write_text(path, csv);
}

void write_iterations_csv(const fs::path& path, const coord::RunResult& r) {
    std::string csv = "k,rho,primal_norm,dual_norm,dno_objective,total_bills\n";
    for (const auto& rec : r.iteration_log)
        csv += std::to_string(rec.k) + "," + fmt(rec.rho) + "," +
               fmt(rec.primal_norm) + "," + fmt(rec.dual_norm) + "," +
               fmt(rec.dno_objective) + "," + fmt(rec.total_bills) + "\n";
    write_text(path, csv);
}

void write_metrics_json(const fs::path& path, const RunConfig& cfg,
                        const coord::RunResult& r) {
    nlohmann::ordered_json j;
    j["mode"] = coord::mode_name(r.mode);
    j["seed"] = cfg.seed;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["par"] = r.bundle.par;
    j["total_losses_kwh"] = r.bundle.total_losses_kwh;
    j["realtime_cost_cents"] = r.cost.realtime_cost_cents;
    j["dayahead_cost_cents"] = r.cost.dayahead_cost_cents;
    j["customer_bills_cents"] = r.cost.customer_bills_cents;
    j["dno_profit_cents"] = r.cost.profit_cents;
    nlohmann::ordered_json bills = nlohmann::ordered_json::object();
    for (std::size_t h = 0; h < r.home_ids.size(); ++h)
        bills[r.home_ids[h]] = r.bills[static_cast<int>(h)];
    j["per_home_bills_cents"] = bills;
    std::vector<double> loading(r.bundle.max_line_loading_pu.data(),
                                r.bundle.max_line_loading_pu.data() +
                                    r.bundle.max_line_loading_pu.size());
    j["max_line_loading_pu"] = loading;
    write_text(path, j.dump(2) + "\n");
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg,
                       const ValidatedScenario& vs, const coord::RunResult& r) {
    fs::create_directories(dir);
    write_text(dir / "scenario.json", scenario_to_json(vs.scenario));
    write_network_csv(dir / "network.csv", r);
    write_home_csvs(dir, vs, r);
    write_prices_csv(dir / "prices.csv", r);
    write_iterations_csv(dir / "iterations.csv", r);
    write_metrics_json(dir / "metrics.json", cfg, r);
}

void log_result(const coord::RunResult& r) {
    const int lvl = log_level();
    if (lvl >= 1)
        std::clog << "mode=" << coord::mode_name(r.mode)
                  << " converged=" << (r.converged ? "yes" : "no")
                  << " iterations=" << r.iterations << " par=" << fmt(r.bundle.par)
                  << " realtime_cost_cents=" << fmt(r.cost.realtime_cost_cents)
                  << "\n";
    if (lvl >= 2)
        for (const auto& rec : r.iteration_log)
            std::clog << "  k=" << rec.k << " rho=" << fmt(rec.rho)
                      << " primal=" << fmt(rec.primal_norm)
                      << " dual=" << fmt(rec.dual_norm) << "\n";
}

std::string savings_csv(const std::vector<metrics::SavingsRow>& rows) {
    std::string csv = "home_id,bill_before_cents,bill_after_cents,saving_fraction\n";
    for (const auto& row : rows)
        csv += row.home_id + "," + fmt(row.bill_before) + "," +
               fmt(row.bill_after) + "," + fmt(row.saving_fraction) + "\n";
    return csv;
}

int cmd_run(const RunConfig& cfg) {
    const ValidatedScenario vs = load_run_scenario(cfg);
    const fs::path dir(cfg.output_dir);

    if (cfg.mode == "w-sweep") {
        fs::create_directories(dir);
        write_text(dir / "scenario.json", scenario_to_json(vs.scenario));
        const std::vector<double> ws{0.1, 0.2, 0.3, 0.4, 0.5,
                                     0.6, 0.7, 0.8, 0.9, 1.0};
        const auto rows = metrics::w_sweep(vs, ws);
        std::string csv = "w,total_bills_cents,dno_profit_cents,converged\n";
        bool all_converged = true;
        for (const auto& row : rows) {
            csv += fmt(row.w) + "," + fmt(row.total_bills_cents) + "," +
                   fmt(row.dno_profit_cents) + "," +
                   (row.converged ? "1" : "0") + "\n";
            all_converged = all_converged && row.converged;
        }
        write_text(dir / "w_sweep.csv", csv);
        return all_converged ? 0 : 2;
    }

    coord::RunResult r;
    if (cfg.mode == "uncoordinated")
        r = coord::run_uncoordinated(vs);
    else if (cfg.mode == "global")
        r = coord::run_coordinated(vs, coord::Mode::Global);
    else if (cfg.mode == "individualized")
        r = coord::run_coordinated(vs, coord::Mode::Individualized);
    else if (cfg.mode == "oracle")
        r = coord::centralized_oracle(vs);
    else
        throw SchemaError("unknown mode: " + cfg.mode);

    write_run_outputs(dir, cfg, vs, r);
    log_result(r);
    if (!r.converged)
        std::cerr << "warning: negotiation did not converge within "
                  << vs.scenario.admm.max_iters
                  << " iterations; outputs written with converged=false\n";
    return r.converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// Canned experiment bundles on the reference scenario.

int study_load_comparison(const fs::path& dir) {
    const auto vs = validate_scenario(build_reference_scenario());
    const auto unc = coord::run_uncoordinated(vs);
    const auto glob = coord::run_coordinated(vs, coord::Mode::Global);
    std::string csv = "slot,planned_kwh,uncoordinated_kw,coordinated_kw\n";
    for (int t = 0; t < unc.total_load_kw.size(); ++t)
        csv += std::to_string(t) + "," + fmt(unc.planned_kwh[t]) + "," +
               fmt(unc.total_load_kw[t]) + "," + fmt(glob.total_load_kw[t]) + "\n";
    write_text(dir / "load_comparison.csv", csv);
    return glob.converged ? 0 : 2;
}

int study_line_loading(const fs::path& dir) {
    Scenario s = build_reference_scenario();
    const auto unc = coord::run_uncoordinated(validate_scenario(s));
    // Tighten every limit to 90% of the uncoordinated peak so the baseline
    // overloads each segment and the coordinated run has to shave it.
    for (std::size_t f = 0; f < s.feeder.lines.size(); ++f)
        s.feeder.lines[f].current_limit_pu =
            0.9 * unc.line_current_pu.row(static_cast<int>(f)).maxCoeff();
    const auto vs = validate_scenario(std::move(s));
    const auto glob = coord::run_coordinated(vs, coord::Mode::Global);
    std::string csv =
        "line,limit_pu,max_current_uncoordinated_pu,max_current_coordinated_pu\n";
    for (std::size_t f = 0; f < vs.scenario.feeder.lines.size(); ++f) {
        const int fi = static_cast<int>(f);
        csv += std::to_string(f) + "," +
               fmt(vs.scenario.feeder.lines[f].current_limit_pu) + "," +
               fmt(unc.line_current_pu.row(fi).maxCoeff()) + "," +
               fmt(glob.line_current_pu.row(fi).maxCoeff()) + "\n";
    }
    write_text(dir / "line_loading.csv", csv);
    return 0;
}

int study_savings_global(const fs::path& dir) {
    const auto vs = validate_scenario(build_reference_scenario());
    const auto unc = coord::run_uncoordinated(vs);
    const auto glob = coord::run_coordinated(vs, coord::Mode::Global);
    write_text(dir / "savings_global.csv",
               savings_csv(metrics::savings_table(unc, glob)));
    return glob.converged ? 0 : 2;
}

int study_savings_modes(const fs::path& dir) {
    Scenario s = build_reference_scenario();
    s.tariff.incentive_w = 0.35;
    const auto vs = validate_scenario(std::move(s));
    const auto unc = coord::run_uncoordinated(vs);
    const auto glob = coord::run_coordinated(vs, coord::Mode::Global);
    const auto indiv = coord::run_coordinated(vs, coord::Mode::Individualized);
    const auto gt = metrics::savings_table(unc, glob);
    const auto it = metrics::savings_table(unc, indiv);
    std::string csv =
        "home_id,bill_before_cents,global_after_cents,global_saving_fraction,"
        "individualized_after_cents,individualized_saving_fraction\n";
    for (std::size_t h = 0; h < gt.size(); ++h)
        csv += gt[h].home_id + "," + fmt(gt[h].bill_before) + "," +
               fmt(gt[h].bill_after) + "," + fmt(gt[h].saving_fraction) + "," +
               fmt(it[h].bill_after) + "," + fmt(it[h].saving_fraction) + "\n";
    write_text(dir / "savings_modes.csv", csv);
    return (glob.converged && indiv.converged) ? 0 : 2;
}

int study_w_sweep(const fs::path& dir) {
    RunConfig cfg;
    cfg.mode = "w-sweep";
    cfg.output_dir = dir.string();
    return cmd_run(cfg);
}

int cmd_reproduce(const std::string& study, const std::string& out) {
    const fs::path dir(out);
    fs::create_directories(dir);
    if (study == "load-comparison") return study_load_comparison(dir);
    if (study == "line-loading") return study_line_loading(dir);
    if (study == "savings-global") return study_savings_global(dir);
    if (study == "savings-modes") return study_savings_modes(dir);
    if (study == "w-sweep") return study_w_sweep(dir);
    throw SchemaError("unknown study: " + study);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"neighborhood load-scheduling simulator"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto* run = app.add_subcommand("run", "execute one scenario");
    run->add_option("--scenario", cfg.scenario_path,
                    "scenario JSON path (default: built-in reference scenario)");
    run->add_option("--mode", cfg.mode,
                    "uncoordinated | global | individualized | oracle | w-sweep")
        ->check(CLI::IsMember(
            {"uncoordinated", "global", "individualized", "oracle", "w-sweep"}));
    run->add_option("--out", cfg.output_dir, "output directory");
    run->add_option("--seed", cfg.seed, "run seed, echoed into metrics.json");
    run->add_option("--set", cfg.overrides,
                    "dotted-path scenario override, key=value (repeatable)");
    run->add_option("--max-iters", cfg.max_iters, "negotiation iteration cap");
    run->add_option("--tol", cfg.tol, "primal/dual residual tolerance");

    std::string study;
    std::string repro_out = "out";
    auto* repro = app.add_subcommand("reproduce", "canned experiment bundle");
    repro->add_option("study", study,
                      "load-comparison | line-loading | savings-global | "
                      "savings-modes | w-sweep")
        ->required();
    repro->add_option("--out", repro_out, "output directory");

    std::string init_path = "scenario.json";
    auto* init = app.add_subcommand("init", "write the reference scenario");
    init->add_option("--out", init_path, "destination JSON file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(cfg);
        if (repro->parsed()) return cmd_reproduce(study, repro_out);
        if (init->parsed()) {
            save_scenario(build_reference_scenario(), init_path);
            return 0;
        }
    } catch (const InvariantError& e) {
        std::cerr << "invalid scenario:\n";
        for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

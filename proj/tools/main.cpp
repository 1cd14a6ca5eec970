// cubesim command-line front end: load a declarative run config, evaluate,
// and emit JSON/CSV/SVG artifacts. Exit codes: 0 success, 1 runtime failure,
// 2 config error, 3 verification failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cubesim/config.hpp"
#include "cubesim/report.hpp"
#include "cubesim/svg.hpp"

namespace fs = std::filesystem;
using cubesim::json;

namespace {

int log_level() {
    const char* env = std::getenv("CUBESIM_LOG");
    return env ? std::atoi(env) : 1;
}

void info(const std::string& msg) {
    if (log_level() > 0) std::cout << msg << "\n";
}

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::string format;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

cubesim::RunConfig load_config(const CliOptions& opt) {
    cubesim::RunConfig cfg = cubesim::load_run_config(opt.config_path);
    if (const char* env = std::getenv("CUBESIM_OUT")) cfg.out_dir = env;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (!opt.format.empty()) cfg.format = opt.format;
    if (opt.seed_set) cfg.seed = opt.seed;
    if (opt.threads > 0) cfg.threads = opt.threads;
    return cfg;
}

// Semantic part of the resolved config: everything that determines results.
json semantic_json(const cubesim::RunConfig& c) {
    return json{{"model", cubesim::to_json(c.model)},
                {"workload", {{"batch", c.point.batch}, {"seq_len", c.point.seq_len}}},
                {"strategy", cubesim::to_string(c.strategy)},
                {"profile", cubesim::to_json(c.profile)},
                {"baseline", c.baseline},
                {"sweep",
                 {{"kind", c.sweep_kind},
                  {"compute_tflops", c.compute_tflops},
                  {"d2d_tbps", c.d2d_tbps},
                  {"batches", c.batches}}},
                {"ablate", {{"seq_lens", c.ablate_seq_lens}}},
                {"verify",
                 {{"model", cubesim::to_json(c.verify_model)},
                  {"workload",
                   {{"batch", c.verify_point.batch}, {"seq_len", c.verify_point.seq_len}}},
                  {"seeds", c.verify_seeds},
                  {"threshold", c.verify_threshold}}},
                {"seed", c.seed}};
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

struct OutputWriter {
    fs::path dir;
    std::string format;

    bool wants(const std::string& kind) const { return format == "all" || format == kind; }

    void emit(const cubesim::RunConfig& cfg) const {
        fs::create_directories(dir);
        json resolved = semantic_json(cfg);
        resolved["out_dir"] = cfg.out_dir;
        resolved["format"] = cfg.format;
        resolved["threads"] = cfg.threads;
        write_file(dir / "resolved_config.json", resolved.dump(2) + "\n");
    }

    void json_file(const std::string& name, const json& j) const {
        if (wants("json")) write_file(dir / name, j.dump(2) + "\n");
    }
    void csv_file(const std::string& name, const std::string& text) const {
        if (wants("csv")) write_file(dir / name, text);
    }
    void svg_file(const std::string& name, const std::string& text) const {
        if (wants("svg")) write_file(dir / name, text);
    }
    void text_file(const std::string& name, const std::string& text) const {
        if (format == "all") write_file(dir / name, text);
    }
};

json report_envelope(const cubesim::RunConfig& cfg) {
    const json sem = semantic_json(cfg);
    return json{{"schema_version", cubesim::kReportSchemaVersion},
                {"config_hash", cubesim::config_hash(sem.dump())},
                {"config", sem}};
}

std::string seq_label(long long s) {
    if (s % 1048576 == 0 && s > 0) return std::to_string(s / 1048576) + "M";
    if (s % 1024 == 0 && s > 0) return std::to_string(s / 1024) + "K";
    return std::to_string(s);
}

int cmd_simulate(const cubesim::RunConfig& cfg) {
    const OutputWriter out{cfg.out_dir, cfg.format};
    out.emit(cfg);
    const cubesim::Schedule sched =
        cubesim::plan(cfg.strategy, cfg.model, cfg.point, cfg.profile.topo);
    const cubesim::RunResult res = cubesim::simulate_schedule(sched, cfg.profile);
    if (!res.feasible) {
        std::cerr << "simulate: infeasible schedule: " << res.diag << "\n";
        return 1;
    }
    json rep = report_envelope(cfg);
    rep["result"] = cubesim::to_json(res);
    out.json_file("report.json", rep);
    out.csv_file("stages.csv", cubesim::stages_csv(res));
    out.text_file("schedule.trace", cubesim::schedule_trace(sched));
    info("simulate: " + cfg.model.name + " S=" + std::to_string(cfg.point.seq_len) +
         " B=" + std::to_string(cfg.point.batch) + " " + cubesim::to_string(cfg.strategy) +
         " -> per-layer latency " + std::to_string(res.latency_s * 1e6) + " us");
    return 0;
}

int cmd_verify(const cubesim::RunConfig& cfg) {
    const OutputWriter out{cfg.out_dir, cfg.format};
    out.emit(cfg);
    const cubesim::StrategyKind strategies[] = {cubesim::StrategyKind::TP16,
                                                cubesim::StrategyKind::HP,
                                                cubesim::StrategyKind::HP_RO};
    json results = json::array();
    double worst = 0;
    std::vector<std::string> failures;
    for (auto s : strategies) {
        for (int i = 0; i < cfg.verify_seeds; ++i) {
            const auto rep = cubesim::verify_flow(s, cfg.verify_model, cfg.verify_point,
                                                  cfg.seed + (std::uint64_t)i,
                                                  cfg.profile.topo);
            results.push_back(cubesim::to_json(rep));
            worst = std::max(worst, rep.max_rel_error);
            if (!(rep.max_rel_error <= cfg.verify_threshold)) {
                char err[32];
                std::snprintf(err, sizeof(err), "%.3e", rep.max_rel_error);
                failures.push_back(std::string(cubesim::to_string(s)) + " seed " +
                                   std::to_string(cfg.seed + (std::uint64_t)i) + " err " +
                                   err);
            }
        }
    }
    json rep = report_envelope(cfg);
    rep["results"] = results;
    rep["max_rel_error"] = worst;
    rep["threshold"] = cfg.verify_threshold;
    rep["pass"] = failures.empty();
    out.json_file("verify.json", rep);
    if (!failures.empty()) {
        std::cerr << "verify: " << failures.size() << " case(s) above threshold "
                  << cfg.verify_threshold << ":\n";
        for (const auto& f : failures) std::cerr << "  " << f << "\n";
        return 3;
    }
    char wbuf[32];
    std::snprintf(wbuf, sizeof(wbuf), "%.3e", worst);
    info("verify: all cases within threshold (worst " + std::string(wbuf) + ")");
    return 0;
}

int cmd_sweep(const cubesim::RunConfig& cfg) {
    const OutputWriter out{cfg.out_dir, cfg.format};
    out.emit(cfg);
    json rep = report_envelope(cfg);
    if (cfg.sweep_kind == "batch") {
        const auto sweep =
            cubesim::sweep_batch(cfg.model, cfg.point.seq_len, cfg.batches, cfg.profile,
                                 cfg.strategy);
        rep["batch_sweep"] = json::array();
        std::vector<double> lat;
        std::vector<std::string> labels;
        for (const auto& p : sweep.points) {
            rep["batch_sweep"].push_back({{"batch", p.batch},
                                          {"latency_s", p.latency_s},
                                          {"step_latency_s", p.step_latency_s},
                                          {"throughput_tok_per_s", p.throughput_tok_per_s},
                                          {"tokens_per_joule", p.tokens_per_joule}});
            lat.push_back(p.latency_s * 1e6);
            labels.push_back("B=" + std::to_string(p.batch));
        }
        rep["saturation_batch"] = sweep.saturation_batch;
        out.json_file("sweep.json", rep);
        out.csv_file("batch.csv", cubesim::batch_csv(sweep));
        out.svg_file("batch.svg",
                     cubesim::render_heatmap(lat, {"latency us"}, labels,
                                             "per-layer latency vs batch (" +
                                                 cfg.model.name + ")",
                                             "batch", ""));
        info("sweep(batch): " + std::to_string(sweep.points.size()) + " points, saturation B=" +
             std::to_string(sweep.saturation_batch));
        return 0;
    }
    const auto grid = cubesim::sweep_dse(cfg.model, cfg.point, cfg.compute_tflops,
                                         cfg.d2d_tbps, cfg.profile, cfg.strategy,
                                         cfg.threads);
    std::vector<std::string> rows, cols;
    std::vector<double> us;
    for (double tf : grid.compute_tflops) rows.push_back(cubesim::svg::num(tf));
    for (double db : grid.d2d_tbps) cols.push_back(cubesim::svg::num(db));
    for (double v : grid.latency_s) us.push_back(v * 1e6);
    rep["dse"] = {{"compute_tflops", grid.compute_tflops},
                  {"d2d_tbps", grid.d2d_tbps},
                  {"latency_s", grid.latency_s}};
    out.json_file("sweep.json", rep);
    out.csv_file("grid.csv", cubesim::dse_csv(grid));
    out.svg_file("heatmap.svg",
                 cubesim::render_heatmap(us, rows, cols,
                                         "per-layer latency (us), " + cfg.model.name +
                                             " S=" + seq_label(cfg.point.seq_len),
                                         "D2D bandwidth (TB/s)",
                                         "per-cube compute (TFLOPS)"));
    info("sweep(dse): " + std::to_string(grid.latency_s.size()) + " grid points");
    return 0;
}

int cmd_ablate(const cubesim::RunConfig& cfg) {
    const OutputWriter out{cfg.out_dir, cfg.format};
    out.emit(cfg);
    std::vector<cubesim::AblationRow> rows;
    for (long long s : cfg.ablate_seq_lens) {
        const auto r = cubesim::ablate(cfg.model, {cfg.point.batch, s}, cfg.profile);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    json rep = report_envelope(cfg);
    rep["ablation"] = json::array();
    for (const auto& r : rows)
        rep["ablation"].push_back({{"strategy", cubesim::to_string(r.strategy)},
                                   {"seq_len", r.seq_len},
                                   {"latency_s", r.latency_s},
                                   {"comm_s", r.comm_s},
                                   {"speedup_total", r.speedup_total},
                                   {"speedup_comm", r.speedup_comm}});
    out.json_file("ablation.json", rep);
    out.csv_file("ablation.csv", cubesim::ablation_csv(rows));

    std::vector<std::string> groups;
    for (long long s : cfg.ablate_seq_lens) groups.push_back(seq_label(s));
    std::vector<std::vector<double>> total(3), comm(3);
    for (const auto& r : rows) {
        const size_t s = (size_t)r.strategy;
        total[s].push_back(r.speedup_total);
        comm[s].push_back(r.speedup_comm);
    }
    out.svg_file("ablation.svg",
                 cubesim::render_grouped_bars(groups, {"tp16", "hp", "hp_ro"}, total,
                                              "total speedup over tp16 (" + cfg.model.name +
                                                  ")",
                                              "speedup"));
    out.svg_file("ablation_comm.svg",
                 cubesim::render_grouped_bars(groups, {"tp16", "hp", "hp_ro"}, comm,
                                              "communication speedup over tp16 (" +
                                                  cfg.model.name + ")",
                                              "speedup"));
    info("ablate: " + std::to_string(rows.size()) + " rows");
    return 0;
}

int cmd_roofline(const cubesim::RunConfig& cfg) {
    const OutputWriter out{cfg.out_dir, cfg.format};
    out.emit(cfg);
    json rep = report_envelope(cfg);
    json table = json::array();
    std::ostringstream csv;
    csv << "profile,aggregate_tflops,aggregate_tbps,ridge_flops_per_byte,latency_s\n";
    const std::vector<std::string> names = {"pnm16", "h100", "rubin", "rubin-tp2"};
    for (const auto& name : names) {
        const auto p = cubesim::hardware_profile(name);
        const double agg_fl = p.aggregate_flops() * p.c2c_devices;
        const double agg_bw = p.aggregate_bw() * p.c2c_devices;
        const double ridge = cubesim::ridge_point(p.cube.peak_flops, p.cube.hbm_bw);
        double latency;
        if (name == "pnm16")
            latency = cubesim::simulate(cfg.model, cfg.point, cfg.strategy, p).latency_s;
        else
            latency = cubesim::baseline_roofline(cfg.model, cfg.point, p).latency_s;
        table.push_back({{"profile", name},
                         {"aggregate_tflops", agg_fl / 1e12},
                         {"aggregate_tbps", agg_bw / 1e12},
                         {"ridge_flops_per_byte", ridge},
                         {"latency_s", latency}});
        csv << name << ',' << cubesim::csv::num(agg_fl / 1e12) << ','
            << cubesim::csv::num(agg_bw / 1e12) << ',' << cubesim::csv::num(ridge) << ','
            << cubesim::csv::num(latency) << '\n';
    }
    rep["roofline"] = table;
    out.json_file("roofline.json", rep);
    out.csv_file("roofline.csv", csv.str());
    info("roofline: " + std::to_string(names.size()) + " profiles");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"analytic simulator for a multi-cube mesh attention accelerator"};
    app.require_subcommand(1);

    CliOptions opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "run configuration file (JSON)")
            ->required();
        sub->add_option("--out", opt.out_dir, "output directory override");
        sub->add_option("--seed", opt.seed, "seed override")->each([&](const std::string&) {
            opt.seed_set = true;
        });
        sub->add_option("--threads", opt.threads, "worker threads for sweeps");
        sub->add_option("--format", opt.format, "output format: csv|json|svg|all")
            ->check(CLI::IsMember({"csv", "json", "svg", "all"}));
    };

    CLI::App* sim = app.add_subcommand("simulate", "one decode-layer run with a strategy");
    CLI::App* verify = app.add_subcommand("verify", "numerical check of the collective flows");
    CLI::App* sweep = app.add_subcommand("sweep", "hardware DSE grid or batch sweep");
    CLI::App* ablate = app.add_subcommand("ablate", "tp16 / hp / hp_ro comparison");
    CLI::App* roofline = app.add_subcommand("roofline", "roofline baselines table");
    for (auto* sub : {sim, verify, sweep, ablate, roofline}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        const cubesim::RunConfig cfg = load_config(opt);
        if (sim->parsed()) return cmd_simulate(cfg);
        if (verify->parsed()) return cmd_verify(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg);
        if (ablate->parsed()) return cmd_ablate(cfg);
        if (roofline->parsed()) return cmd_roofline(cfg);
    } catch (const cubesim::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

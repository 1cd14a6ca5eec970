#include <doctest.h>

#include <json.hpp>

#include "cubesim/config.hpp"
#include "cubesim/report.hpp"
#include "cubesim/svg.hpp"

using namespace cubesim;
using nlohmann::json;

TEST_CASE("run config: minimal and full") {
    const RunConfig minimal = parse_run_config(json::object());
    CHECK(minimal.model.name == "qwen3-235b-like");
    CHECK(minimal.strategy == StrategyKind::HP_RO);
    CHECK(minimal.profile.name == "pnm16");

    const json full = {
        {"model", "llama4-maverick-like"},
        {"workload", {{"batch", 4}, {"seq_len", 262144}}},
        {"strategy", "hp"},
        {"profile", {{"base", "pnm16"}, {"peak_tflops", 128.0}, {"d2d_gbps", 2000.0}}},
        {"baseline", "rubin"},
        {"sweep", {{"kind", "dse"}, {"compute_tflops", {8.0, 96.0}}, {"d2d_tbps", {1.0}}}},
        {"ablate", {{"seq_lens", {8192, 65536}}}},
        {"verify", {{"seeds", 5}, {"threshold", 1e-9}}},
        {"seed", 11},
        {"out_dir", "runs/x"},
        {"format", "json"}};
    const RunConfig c = parse_run_config(full);
    CHECK(c.point.batch == 4);
    CHECK(c.strategy == StrategyKind::HP);
    CHECK(c.profile.cube.peak_flops == doctest::Approx(128e12));
    CHECK(c.profile.link.bw_per_dir == doctest::Approx(2e12));
    CHECK(c.verify_seeds == 5);
    CHECK(c.seed == 11);
}

TEST_CASE("run config: unknown keys and bad values name the field") {
    CHECK_THROWS_WITH_AS(parse_run_config({{"modle", "x"}}),
                         doctest::Contains("unknown key 'modle'"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config({{"workload", {{"batc", 1}}}}),
                         doctest::Contains("unknown key 'batc'"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config({{"strategy", "tp99"}}),
                         doctest::Contains("strategy"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config({{"format", "pdf"}}),
                         doctest::Contains("format"), ConfigError);
    CHECK_THROWS_AS(parse_run_config({{"model", {{"d_model", -1}}}}), ConfigError);
    CHECK_THROWS_AS(
        parse_run_config({{"sweep", {{"kind", "dse"}, {"compute_tflops", json::array()}}}}),
        ConfigError);
}

TEST_CASE("config hash is stable and input-sensitive") {
    const std::string a = config_hash("abc");
    CHECK(a == config_hash("abc"));
    CHECK(a != config_hash("abd"));
    CHECK(a.size() == 16);
}

TEST_CASE("heatmap: deterministic render and csv round trip") {
    DseGrid g;
    g.compute_tflops = {8, 96, 256};
    g.d2d_tbps = {0.5, 1.5};
    g.latency_s = {6e-5, 5.9e-5, 8e-6, 7e-6, 7.9e-6, 6.9e-6};

    auto render = [](const DseGrid& grid) {
        std::vector<std::string> rows, cols;
        std::vector<double> us;
        for (double tf : grid.compute_tflops) rows.push_back(svg::num(tf));
        for (double db : grid.d2d_tbps) cols.push_back(svg::num(db));
        for (double v : grid.latency_s) us.push_back(v * 1e6);
        return render_heatmap(us, rows, cols, "latency", "d2d", "tflops");
    };

    const std::string direct = render(g);
    CHECK(direct == render(g));  // byte-stable
    CHECK(direct.find("<svg") == 0);
    CHECK(direct.find("href") == std::string::npos);  // self-contained

    // CSV round trip reproduces the identical SVG.
    const DseGrid back = dse_from_csv(dse_csv(g));
    REQUIRE(back.latency_s.size() == g.latency_s.size());
    CHECK(render(back) == direct);

    // Single-cell grid renders fine.
    DseGrid one;
    one.compute_tflops = {96};
    one.d2d_tbps = {1.5};
    one.latency_s = {1e-5};
    CHECK_NOTHROW(render(one));
}

TEST_CASE("bar chart renders all series") {
    const auto svg_text = render_grouped_bars({"8K", "256K"}, {"tp16", "hp", "hp_ro"},
                                              {{1.0, 1.0}, {1.1, 1.4}, {1.2, 1.6}},
                                              "speedup", "x");
    CHECK(svg_text.find("tp16") != std::string::npos);
    CHECK(svg_text.find("hp_ro") != std::string::npos);
    CHECK_THROWS_AS(render_grouped_bars({"a"}, {"s"}, {{1.0, 2.0}}, "t", "y"),
                    std::invalid_argument);
}

TEST_CASE("json reports are deterministic") {
    const auto m = model_preset("qwen3-235b-like");
    const auto p = hardware_profile("pnm16");
    const RunResult r1 = simulate(m, {1, 65536}, StrategyKind::HP_RO, p);
    const RunResult r2 = simulate(m, {1, 65536}, StrategyKind::HP_RO, p);
    CHECK(to_json(r1).dump() == to_json(r2).dump());
    CHECK(to_json(m).dump() == to_json(model_preset("qwen3-235b-like")).dump());
    CHECK(to_json(p).dump() == to_json(hardware_profile("pnm16")).dump());
}

TEST_CASE("stage csv schema") {
    const auto r = simulate(model_preset("qwen3-235b-like"), {1, 8192},
                            StrategyKind::HP_RO, hardware_profile("pnm16"));
    const std::string csv = stages_csv(r);
    CHECK(csv.rfind("stage,compute_s,comm_s,hbm_bytes,wire_bytes,flops,binding\n", 0) == 0);
    CHECK(csv.find("proj_qkv") != std::string::npos);
    CHECK(csv.find("core_attn") != std::string::npos);
    CHECK(csv.find("proj_o") != std::string::npos);
}

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cubesim/engine.hpp"
#include "cubesim/numerics.hpp"

namespace cubesim {

using json = nlohmann::json;

constexpr int kReportSchemaVersion = 1;

// FNV-1a over the canonical config text; recorded in every report so a run
// can be traced back to its exact inputs.
inline std::string config_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

inline json to_json(const ModelConfig& m) {
    return json{{"name", m.name},
                {"d_model", m.d_model},
                {"q_heads", m.q_heads},
                {"kv_heads", m.kv_heads},
                {"head_dim", m.head_dim},
                {"layers", m.layers},
                {"attn_kind", m.attn_kind == AttnKind::GQA ? "gqa" : "mla"},
                {"bytes_per_elem", m.bytes_per_elem}};
}

inline json to_json(const HardwareProfile& p) {
    return json{{"name", p.name},
                {"cubes", p.cubes},
                {"mesh", {{"rows", p.topo.rows}, {"cols", p.topo.cols}}},
                {"cube",
                 {{"peak_tflops", p.cube.peak_flops / 1e12},
                  {"hbm_tbps", p.cube.hbm_bw / 1e12},
                  {"hbm_latency_ns", p.cube.hbm_latency_s * 1e9},
                  {"continuous_tiling", p.cube.continuous_tiling}}},
                {"link",
                 {{"bw_gbps", p.link.bw_per_dir / 1e9},
                  {"hop_latency_ns", p.link.hop_latency_s * 1e9}}},
                {"power",
                 {{"tdp_w", p.tdp_w},
                  {"static_w", p.static_power_w},
                  {"hbm_w_per_cube", p.hbm_power_per_cube_w},
                  {"compute_w_per_cube", p.compute_power_per_cube_w},
                  {"hbm_pj_per_byte", p.hbm_pj_per_byte},
                  {"compute_pj_per_flop", p.compute_pj_per_flop},
                  {"d2d_pj_per_byte", p.d2d_pj_per_byte}}},
                {"mem_util", p.mem_util},
                {"c2c_devices", p.c2c_devices},
                {"quoted_effective_bw_tbps", p.quoted_effective_bw / 1e12}};
}

inline json to_json(const StageResult& s) {
    return json{{"stage", to_string(s.stage)},
                {"compute_s", s.compute_s},
                {"comm_s", s.comm_s},
                {"hbm_bytes", s.hbm_bytes},
                {"wire_bytes", s.wire_bytes},
                {"flops", s.flops},
                {"binding", to_string(s.binding)}};
}

inline json to_json(const RunResult& r) {
    json stages = json::array();
    for (const auto& s : r.stages) stages.push_back(to_json(s));
    return json{{"strategy", to_string(r.strategy)},
                {"stages", stages},
                {"latency_s", r.latency_s},
                {"compute_s", r.compute_s},
                {"comm_s", r.comm_s},
                {"hbm_bytes", r.hbm_bytes},
                {"wire_bytes", r.wire_bytes},
                {"flops", r.flops},
                {"energy_j", r.energy_j},
                {"avg_power_w", r.avg_power_w},
                {"tokens_per_joule", r.tokens_per_joule},
                {"feasible", r.feasible},
                {"diag", r.diag}};
}

inline json to_json(const VerifyReport& v) {
    return json{{"strategy", to_string(v.strategy)}, {"seed", v.seed},
                {"max_rel_error", v.max_rel_error},  {"batch", v.batch},
                {"seq_len", v.seq_len},              {"d_model", v.d_model},
                {"q_heads", v.q_heads},              {"kv_heads", v.kv_heads},
                {"head_dim", v.head_dim}};
}

// ---------------------------------------------------------------------------
// CSV emission. Headers are part of the stable schema.
// ---------------------------------------------------------------------------

namespace csv {
inline std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}
}  // namespace csv

inline std::string stages_csv(const RunResult& r) {
    std::ostringstream os;
    os << "stage,compute_s,comm_s,hbm_bytes,wire_bytes,flops,binding\n";
    for (const auto& s : r.stages)
        os << to_string(s.stage) << ',' << csv::num(s.compute_s) << ',' << csv::num(s.comm_s)
           << ',' << csv::num(s.hbm_bytes) << ',' << csv::num(s.wire_bytes) << ','
           << csv::num(s.flops) << ',' << to_string(s.binding) << '\n';
    return os.str();
}

inline std::string dse_csv(const DseGrid& g) {
    std::ostringstream os;
    os << "compute_tflops,d2d_tbps,latency_s\n";
    for (size_t i = 0; i < g.compute_tflops.size(); ++i)
        for (size_t j = 0; j < g.d2d_tbps.size(); ++j)
            os << csv::num(g.compute_tflops[i]) << ',' << csv::num(g.d2d_tbps[j]) << ','
               << csv::num(g.at(i, j)) << '\n';
    return os.str();
}

inline DseGrid dse_from_csv(const std::string& text) {
    DseGrid g;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);  // header
    std::vector<std::array<double, 3>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::array<double, 3> row{};
        std::istringstream ls(line);
        std::string cell;
        for (int c = 0; c < 3 && std::getline(ls, cell, ','); ++c) row[c] = std::stod(cell);
        rows.push_back(row);
    }
    for (const auto& r : rows) {
        if (g.compute_tflops.empty() || g.compute_tflops.back() != r[0])
            if (std::find(g.compute_tflops.begin(), g.compute_tflops.end(), r[0]) ==
                g.compute_tflops.end())
                g.compute_tflops.push_back(r[0]);
        if (std::find(g.d2d_tbps.begin(), g.d2d_tbps.end(), r[1]) == g.d2d_tbps.end())
            g.d2d_tbps.push_back(r[1]);
    }
    g.latency_s.assign(g.compute_tflops.size() * g.d2d_tbps.size(), 0.0);
    for (const auto& r : rows) {
        const size_t i = std::find(g.compute_tflops.begin(), g.compute_tflops.end(), r[0]) -
                         g.compute_tflops.begin();
        const size_t j =
            std::find(g.d2d_tbps.begin(), g.d2d_tbps.end(), r[1]) - g.d2d_tbps.begin();
        g.latency_s[i * g.d2d_tbps.size() + j] = r[2];
    }
    return g;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "strategy,seq_len,latency_s,comm_s,speedup_total,speedup_comm\n";
    for (const auto& r : rows)
        os << to_string(r.strategy) << ',' << r.seq_len << ',' << csv::num(r.latency_s) << ','
           << csv::num(r.comm_s) << ',' << csv::num(r.speedup_total) << ','
           << csv::num(r.speedup_comm) << '\n';
    return os.str();
}

inline std::string batch_csv(const BatchSweep& s) {
    std::ostringstream os;
    os << "batch,latency_s,step_latency_s,throughput_tok_per_s,tokens_per_joule\n";
    for (const auto& p : s.points)
        os << p.batch << ',' << csv::num(p.latency_s) << ',' << csv::num(p.step_latency_s)
           << ',' << csv::num(p.throughput_tok_per_s) << ',' << csv::num(p.tokens_per_joule)
           << '\n';
    return os.str();
}

}  // namespace cubesim

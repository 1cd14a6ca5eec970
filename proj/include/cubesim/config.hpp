#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cubesim/engine.hpp"

namespace cubesim {

// ---------------------------------------------------------------------------
// Declarative run configuration: one human-readable JSON file per run.
// Unknown keys are rejected; every diagnostic names the offending field.
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ModelConfig model = model_preset("qwen3-235b-like");
    WorkloadPoint point{1, 65536};
    StrategyKind strategy = StrategyKind::HP_RO;
    HardwareProfile profile = hardware_profile("pnm16");
    std::string baseline = "h100";

    std::string sweep_kind = "dse";  // "dse" | "batch"
    std::vector<double> compute_tflops{8, 16, 32, 64, 96, 128, 192, 256};
    std::vector<double> d2d_tbps{0.5, 1.0, 1.5, 2.0, 2.5};
    std::vector<long long> batches{1, 2, 4, 8, 16, 32};

    std::vector<long long> ablate_seq_lens{8192, 262144, 1048576};

    ModelConfig verify_model{"desk-gqa", 512, 64, 4, 32, 1, AttnKind::GQA, 1.0};
    WorkloadPoint verify_point{1, 256};
    int verify_seeds = 20;
    double verify_threshold = 1e-10;

    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string format = "all";  // csv | json | svg | all
    int threads = 1;

    nlohmann::json resolved;  // canonical echo of everything above
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
    if (!j.is_object()) throw ConfigError("config: '" + context + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + context);
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config: field '" + key + "' has the wrong type");
    }
}

inline ModelConfig parse_model(const nlohmann::json& j, const std::string& context) {
    if (j.is_string()) return model_preset(j.get<std::string>());
    check_keys(j, {"name", "d_model", "q_heads", "kv_heads", "head_dim", "layers",
                   "attn_kind", "bytes_per_elem"},
               context);
    ModelConfig m;
    m.name = get_or<std::string>(j, "name", "custom");
    m.d_model = get_or<int>(j, "d_model", 0);
    m.q_heads = get_or<int>(j, "q_heads", 0);
    m.kv_heads = get_or<int>(j, "kv_heads", 0);
    m.head_dim = get_or<int>(j, "head_dim", 0);
    m.layers = get_or<int>(j, "layers", 1);
    const std::string kind = get_or<std::string>(j, "attn_kind", "gqa");
    if (kind == "gqa")
        m.attn_kind = AttnKind::GQA;
    else if (kind == "mla")
        m.attn_kind = AttnKind::MLA;
    else
        throw ConfigError("config: field 'attn_kind' must be \"gqa\" or \"mla\"");
    m.bytes_per_elem = get_or<double>(j, "bytes_per_elem", 1.0);
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid model: ") + e.what());
    }
    return m;
}

inline WorkloadPoint parse_point(const nlohmann::json& j, const std::string& context) {
    check_keys(j, {"batch", "seq_len"}, context);
    WorkloadPoint p;
    p.batch = get_or<long long>(j, "batch", 1);
    p.seq_len = get_or<long long>(j, "seq_len", 0);
    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid workload: ") + e.what());
    }
    return p;
}

inline HardwareProfile parse_profile(const nlohmann::json& j) {
    if (j.is_string()) return hardware_profile(j.get<std::string>());
    check_keys(j, {"base", "peak_tflops", "hbm_tbps", "hbm_latency_ns", "d2d_gbps",
                   "hop_latency_ns", "mem_util", "tdp_w", "static_w", "d2d_pj_per_byte",
                   "continuous_tiling"},
               "profile");
    HardwareProfile p = hardware_profile(get_or<std::string>(j, "base", "pnm16"));
    if (j.contains("peak_tflops")) {
        p.cube.peak_flops = j.at("peak_tflops").get<double>() * 1e12;
        p.cube.peak_override = true;
    }
    if (j.contains("hbm_tbps")) p.cube.hbm_bw = j.at("hbm_tbps").get<double>() * 1e12;
    if (j.contains("hbm_latency_ns"))
        p.cube.hbm_latency_s = j.at("hbm_latency_ns").get<double>() * 1e-9;
    if (j.contains("d2d_gbps")) p.link.bw_per_dir = j.at("d2d_gbps").get<double>() * 1e9;
    if (j.contains("hop_latency_ns"))
        p.link.hop_latency_s = j.at("hop_latency_ns").get<double>() * 1e-9;
    p.mem_util = get_or<double>(j, "mem_util", p.mem_util);
    p.tdp_w = get_or<double>(j, "tdp_w", p.tdp_w);
    p.static_power_w = get_or<double>(j, "static_w", p.static_power_w);
    p.d2d_pj_per_byte = get_or<double>(j, "d2d_pj_per_byte", p.d2d_pj_per_byte);
    p.cube.continuous_tiling = get_or<bool>(j, "continuous_tiling", p.cube.continuous_tiling);
    p.hbm_pj_per_byte = 0;
    p.compute_pj_per_flop = 0;
    p.finalize();
    try {
        p.cube.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid profile: ") + e.what());
    }
    return p;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail::check_keys(j, {"model", "workload", "strategy", "profile", "baseline", "sweep",
                           "ablate", "verify", "seed", "out_dir", "format", "threads"},
                       "top level");
    RunConfig c;
    if (j.contains("model")) c.model = detail::parse_model(j.at("model"), "model");
    if (j.contains("workload")) c.point = detail::parse_point(j.at("workload"), "workload");
    if (j.contains("strategy")) {
        try {
            c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: field 'strategy': ") + e.what());
        }
    }
    if (j.contains("profile")) c.profile = detail::parse_profile(j.at("profile"));
    if (j.contains("baseline")) {
        c.baseline = j.at("baseline").get<std::string>();
        try {
            hardware_profile(c.baseline);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: field 'baseline': ") + e.what());
        }
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::check_keys(s, {"kind", "compute_tflops", "d2d_tbps", "batches"}, "sweep");
        c.sweep_kind = detail::get_or<std::string>(s, "kind", "dse");
        if (c.sweep_kind != "dse" && c.sweep_kind != "batch")
            throw ConfigError("config: field 'sweep.kind' must be \"dse\" or \"batch\"");
        if (s.contains("compute_tflops"))
            c.compute_tflops = s.at("compute_tflops").get<std::vector<double>>();
        if (s.contains("d2d_tbps")) c.d2d_tbps = s.at("d2d_tbps").get<std::vector<double>>();
        if (s.contains("batches")) c.batches = s.at("batches").get<std::vector<long long>>();
        if (c.sweep_kind == "dse" && (c.compute_tflops.empty() || c.d2d_tbps.empty()))
            throw ConfigError("config: sweep axes must be non-empty");
        if (c.sweep_kind == "batch" && c.batches.empty())
            throw ConfigError("config: field 'sweep.batches' must be non-empty");
    }
    if (j.contains("ablate")) {
        const auto& a = j.at("ablate");
        detail::check_keys(a, {"seq_lens"}, "ablate");
        if (a.contains("seq_lens"))
            c.ablate_seq_lens = a.at("seq_lens").get<std::vector<long long>>();
        if (c.ablate_seq_lens.empty())
            throw ConfigError("config: field 'ablate.seq_lens' must be non-empty");
    }
    if (j.contains("verify")) {
        const auto& v = j.at("verify");
        detail::check_keys(v, {"model", "workload", "seeds", "threshold"}, "verify");
        if (v.contains("model")) c.verify_model = detail::parse_model(v.at("model"), "verify.model");
        if (v.contains("workload"))
            c.verify_point = detail::parse_point(v.at("workload"), "verify.workload");
        c.verify_seeds = detail::get_or<int>(v, "seeds", c.verify_seeds);
        c.verify_threshold = detail::get_or<double>(v, "threshold", c.verify_threshold);
        if (c.verify_seeds < 1) throw ConfigError("config: field 'verify.seeds' must be >= 1");
    }
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    c.out_dir = detail::get_or<std::string>(j, "out_dir", c.out_dir);
    c.format = detail::get_or<std::string>(j, "format", c.format);
    if (c.format != "csv" && c.format != "json" && c.format != "svg" && c.format != "all")
        throw ConfigError("config: field 'format' must be csv, json, svg or all");
    c.threads = detail::get_or<int>(j, "threads", 1);
    if (c.threads < 1) throw ConfigError("config: field 'threads' must be >= 1");
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_run_config(j);
}

}  // namespace cubesim

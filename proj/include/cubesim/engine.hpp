#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cubesim/fabric.hpp"
#include "cubesim/mapper.hpp"
#include "cubesim/systolic.hpp"
#include "cubesim/workload.hpp"

namespace cubesim {

// ---------------------------------------------------------------------------
// End-to-end evaluation: compose the cube model, fabric and mapper into
// per-layer decode latency, energy and power, plus GPU roofline baselines,
// ablations and sweeps.
// ---------------------------------------------------------------------------

// Chip-to-chip interconnect of GPU-style baselines (per-direction bandwidth).
struct GpuC2C {
    double latency_s = 900e-9;
    double bw_per_dir = 450e9;
};

struct HardwareProfile {
    std::string name;
    int cubes = 16;
    CubeConfig cube;
    LinkSpec link;
    MeshTopology topo{4, 4};
    double tdp_w = 0;
    double static_power_w = 0;
    double hbm_power_per_cube_w = 0;
    double compute_power_per_cube_w = 0;
    GpuC2C c2c;
    int c2c_devices = 1;        // >1: GPU TP baseline over c2c links
    double mem_util = 1.0;      // memory-stage efficiency for roofline baselines
    // Annotation only: the effective aggregate bandwidth sometimes quoted for
    // a part when it differs from the sum of its per-cube figures. The model
    // always computes with aggregate_bw(); 0 means no separate figure exists.
    double quoted_effective_bw = 0;
    // Dynamic energy coefficients (pJ). Calibrated so full activity matches
    // the profile's power rows; never measured values.
    double hbm_pj_per_byte = 0;
    double compute_pj_per_flop = 0;
    double d2d_pj_per_byte = 2.0;

    double aggregate_bw() const { return double(cubes) * cube.hbm_bw; }
    double aggregate_flops() const { return double(cubes) * cube.peak_flops; }

    void finalize() {
        if (hbm_pj_per_byte == 0 && hbm_power_per_cube_w > 0)
            hbm_pj_per_byte = hbm_power_per_cube_w / cube.hbm_bw * 1e12;
        if (compute_pj_per_flop == 0 && compute_power_per_cube_w > 0)
            compute_pj_per_flop = compute_power_per_cube_w / cube.peak_flops * 1e12;
    }
};

// Built-in hardware profiles from published part figures; the pnm16
// package is the 16-cube mesh this model is about.
inline HardwareProfile hardware_profile(const std::string& name) {
    HardwareProfile p;
    p.name = name;
    if (name == "pnm16") {
        p.cubes = 16;
        p.cube = CubeConfig{};  // 96 TFLOPS, 2.75 TB/s, 200 ns
        p.link = LinkSpec{};    // 1500 GB/s per dir, 15 ns per hop
        p.topo = {4, 4};
        p.tdp_w = 1440;
        p.static_power_w = 0;   // folded into the per-cube activity ceilings
        p.hbm_power_per_cube_w = 75;
        p.compute_power_per_cube_w = 15;
        p.quoted_effective_bw = 40e12;  // the prose figure; table value is 44
        p.finalize();
        return p;
    }
    if (name == "h100" || name == "rubin" || name == "rubin-tp2") {
        p.cubes = 1;
        p.topo = {1, 1};
        p.cube.sa = SAConfig{};
        p.cube.peak_override = true;
        p.mem_util = 0.9;
        if (name == "h100") {
            p.cube.peak_flops = 1978e12;
            p.cube.hbm_bw = 3.35e12;
            p.cube.hbm_latency_s = 0;
            p.tdp_w = 700;
            p.static_power_w = 125;
            p.hbm_power_per_cube_w = 200;   // 5 HBM3 sites at 40 W
            p.compute_power_per_cube_w = 500;
            p.c2c = {900e-9, 450e9};
        } else {
            p.cube.peak_flops = 17500e12;
            p.cube.hbm_bw = 22e12;
            p.cube.hbm_latency_s = 0;
            p.tdp_w = 2200;
            p.static_power_w = 200;
            p.hbm_power_per_cube_w = 600;   // 8 HBM4 cubes at 75 W
            p.compute_power_per_cube_w = 1600;
            p.c2c = {900e-9, 1800e9};
            if (name == "rubin-tp2") p.c2c_devices = 2;
        }
        p.finalize();
        return p;
    }
    throw std::invalid_argument("unknown hardware profile: " + name);
}

struct StageResult {
    StageKind stage = StageKind::ProjQKV;
    double compute_s = 0;   // kernel time (includes HBM streaming + latency)
    double comm_s = 0;      // collective time
    double hbm_bytes = 0;   // per package
    double wire_bytes = 0;  // injected D2D bytes
    double flops = 0;       // per package
    BindingResource binding = BindingResource::Memory;
};

struct RunResult {
    StrategyKind strategy = StrategyKind::HP_RO;
    std::vector<StageResult> stages;
    double latency_s = 0;
    double compute_s = 0;
    double comm_s = 0;
    double hbm_bytes = 0;
    double wire_bytes = 0;
    double flops = 0;
    double energy_j = 0;
    double avg_power_w = 0;
    double tokens_per_joule = 0;
    bool feasible = true;
    std::string diag;
};

struct EnergyBreakdown {
    double energy_j = 0;
    double avg_power_w = 0;
    double tokens_per_joule = 0;
    double static_j = 0, hbm_j = 0, compute_j = 0, d2d_j = 0;
};

// energy = static power x latency + sum of dynamic component energies
// (coefficient x volume == component power x active time at full activity).
// tokens_per_joule extrapolates the per-layer result over all layers.
inline EnergyBreakdown energy_power(const RunResult& r, const HardwareProfile& profile,
                                    const ModelConfig& model, const WorkloadPoint& point) {
    EnergyBreakdown e;
    e.static_j = profile.static_power_w * r.latency_s;
    e.hbm_j = profile.hbm_pj_per_byte * 1e-12 * r.hbm_bytes;
    e.compute_j = profile.compute_pj_per_flop * 1e-12 * r.flops;
    e.d2d_j = profile.d2d_pj_per_byte * 1e-12 * r.wire_bytes;
    e.energy_j = e.static_j + e.hbm_j + e.compute_j + e.d2d_j;
    e.avg_power_w = r.latency_s > 0 ? e.energy_j / r.latency_s : 0;
    const double step_energy = e.energy_j * model.layers;
    e.tokens_per_joule = step_energy > 0 ? double(point.batch) / step_energy : 0;
    return e;
}

namespace detail {

struct StageAccum {
    std::map<StageKind, StageResult> by_stage;

    StageResult& at(StageKind s) {
        auto it = by_stage.find(s);
        if (it == by_stage.end()) {
            StageResult r;
            r.stage = s;
            it = by_stage.emplace(s, r).first;
        }
        return it->second;
    }
};

// Duration of one compute event on a cube: sub-kernels share the streaming
// pipeline, so compute cycles add up, HBM bytes add up, and the binding
// resource is whichever total is larger. HBM latency is charged once.
inline CubeKernelTime compute_event_time(const ComputeDesc& c, const CubeConfig& cube) {
    CubeKernelTime total;
    double compute_s = 0;
    for (const auto& g : c.gemms) {
        const CubeKernelTime kt = cube_kernel_time(g, cube);
        if (!kt.feasible) return kt;
        compute_s += g.flops() / (cube.peak_flops * kt.util);
        total.util = kt.util;  // last sub-kernel's utilization, diagnostic only
    }
    total.compute_s = compute_s;
    total.memory_s = c.hbm_bytes / cube.hbm_bw;
    total.binding =
        total.compute_s >= total.memory_s ? BindingResource::Compute : BindingResource::Memory;
    total.time_s = std::max(total.compute_s, total.memory_s) + cube.hbm_latency_s;
    return total;
}

}  // namespace detail

// Evaluate a schedule on a profile: compute events take the cube kernel
// time (cubes run their identical shares in parallel), collectives take the
// fabric cost, and the dependency chain serializes stages and requests.
inline RunResult simulate_schedule(const Schedule& sched, const HardwareProfile& profile) {
    validate_schedule(sched);
    RunResult res;
    res.strategy = sched.strategy;
    detail::StageAccum acc;

    std::vector<double> finish(sched.events.size(), 0.0);
    const int active_cubes = sched.placement.topo.cube_count();
    for (const auto& e : sched.events) {
        double start = 0;
        for (int d : e.deps) start = std::max(start, finish[(size_t)d]);
        double dur = 0;
        if (e.kind == EventKind::Compute) {
            const CubeKernelTime kt = detail::compute_event_time(e.compute, profile.cube);
            if (!kt.feasible) {
                res.feasible = false;
                res.diag = "event '" + e.label + "': " + kt.diag;
                return res;
            }
            dur = kt.time_s;
            auto& st = acc.at(e.stage);
            st.compute_s += dur;
            st.hbm_bytes += e.compute.hbm_bytes * active_cubes;
            double fl = 0;
            for (const auto& g : e.compute.gemms) fl += g.flops();
            st.flops += fl * active_cubes;
            st.binding = kt.binding;
        } else if (e.kind == EventKind::Collective) {
            const CollectiveCost cc =
                parallel_collective_cost(e.coll.op, e.coll.groups, e.coll.bytes_per_cube,
                                         sched.placement.topo, profile.link);
            dur = cc.time_s;
            auto& st = acc.at(e.stage);
            st.comm_s += dur;
            st.wire_bytes += collective_injected_bytes(e.coll);
        }
        finish[e.id] = start + dur;
    }

    for (double f : finish) res.latency_s = std::max(res.latency_s, f);
    for (auto& [k, st] : acc.by_stage) {
        res.stages.push_back(st);
        res.compute_s += st.compute_s;
        res.comm_s += st.comm_s;
        res.hbm_bytes += st.hbm_bytes;
        res.wire_bytes += st.wire_bytes;
        res.flops += st.flops;
    }
    const auto eb = energy_power(res, profile, sched.model, sched.point);
    res.energy_j = eb.energy_j;
    res.avg_power_w = eb.avg_power_w;
    res.tokens_per_joule = eb.tokens_per_joule;
    return res;
}

inline RunResult simulate(const ModelConfig& model, const WorkloadPoint& point,
                          StrategyKind strategy, const HardwareProfile& profile) {
    const Schedule sched = plan(strategy, model, point, profile.topo);
    return simulate_schedule(sched, profile);
}

// ---------------------------------------------------------------------------
// GPU roofline baselines
// ---------------------------------------------------------------------------

// Per-stage roofline on a single memory pool, scaled across c2c_devices for
// TP variants. Head-wise TP keeps QKV and attention local; the one c2c
// AllReduce sits after the output projection. Memory-bound stage times are
// divided by the profile's measured-style utilization.
inline RunResult baseline_roofline(const ModelConfig& model, const WorkloadPoint& point,
                                   const HardwareProfile& profile) {
    model.validate();
    point.validate();
    RunResult res;
    res.strategy = StrategyKind::TP16;  // not meaningful for baselines
    const int n = profile.c2c_devices;
    const double bw = profile.cube.hbm_bw * profile.mem_util;
    const double peak = profile.cube.peak_flops;
    const double bpe = model.bytes_per_elem;

    auto stage = [&](StageKind kind, double flops, double bytes, double c2c_bytes) {
        StageResult st;
        st.stage = kind;
        st.flops = flops;
        st.hbm_bytes = bytes;
        const double compute = (flops / n) / peak;
        const double memory = (bytes / n) / bw;
        st.compute_s = std::max(compute, memory);
        st.binding = compute >= memory ? BindingResource::Compute : BindingResource::Memory;
        if (n > 1 && c2c_bytes > 0) {
            // Ring AllReduce over the c2c link.
            const double v = c2c_bytes;
            st.comm_s = 2.0 * (n - 1) * (v / n / profile.c2c.bw_per_dir +
                                         profile.c2c.latency_s);
            st.wire_bytes = 2.0 * (n - 1) * v;
        }
        res.stages.push_back(st);
        res.latency_s += st.compute_s + st.comm_s;
        res.compute_s += st.compute_s;
        res.comm_s += st.comm_s;
        res.hbm_bytes += st.hbm_bytes;
        res.wire_bytes += st.wire_bytes;
        res.flops += st.flops;
    };

    const auto gemms = derive_stage_gemms(model, point);
    // Score/AV GEMMs carry M = G*B, so their FLOPs already cover the batch;
    // each request still streams its own KV cache.
    double attn_flops = 0;
    for (const auto& g : gemms)
        if (g.stage == GemmStage::ScoreQK || g.stage == GemmStage::WeightedAV)
            attn_flops += g.flops();
    const double attn_bytes = attention_hbm_bytes(model, point);
    for (const auto& g : gemms) {
        if (g.stage == GemmStage::ProjQKV)
            stage(StageKind::ProjQKV, g.flops(), g.bytes(), 0);
        else if (g.stage == GemmStage::ProjO)
            stage(StageKind::ProjO, g.flops(), g.bytes(),
                  double(point.batch) * model.d_model * bpe);
    }
    if (point.seq_len > 0) stage(StageKind::CoreAttn, attn_flops, attn_bytes, 0);

    const auto eb = energy_power(res, profile, model, point);
    res.energy_j = eb.energy_j;
    res.avg_power_w = eb.avg_power_w;
    res.tokens_per_joule = eb.tokens_per_joule;
    return res;
}

// ---------------------------------------------------------------------------
// Ablation, batch sweep, DSE
// ---------------------------------------------------------------------------

struct AblationRow {
    StrategyKind strategy;
    long long seq_len = 0;
    double latency_s = 0;
    double comm_s = 0;
    double speedup_total = 1.0;  // vs TP16 at the same point
    double speedup_comm = 1.0;
};

inline std::vector<AblationRow> ablate(const ModelConfig& model, const WorkloadPoint& point,
                                       const HardwareProfile& profile) {
    std::vector<AblationRow> rows;
    const StrategyKind order[] = {StrategyKind::TP16, StrategyKind::HP, StrategyKind::HP_RO};
    RunResult tp16;
    for (StrategyKind s : order) {
        const RunResult r = simulate(model, point, s, profile);
        if (s == StrategyKind::TP16) tp16 = r;
        AblationRow row;
        row.strategy = s;
        row.seq_len = point.seq_len;
        row.latency_s = r.latency_s;
        row.comm_s = r.comm_s;
        row.speedup_total = r.latency_s > 0 ? tp16.latency_s / r.latency_s : 1.0;
        row.speedup_comm = r.comm_s > 0 ? tp16.comm_s / r.comm_s : 1.0;
        rows.push_back(row);
    }
    return rows;
}

struct BatchPoint {
    long long batch = 0;
    double latency_s = 0;            // per layer
    double step_latency_s = 0;       // all layers
    double throughput_tok_per_s = 0; // batch / per-layer latency
    double tokens_per_joule = 0;
};

struct BatchSweep {
    std::vector<BatchPoint> points;
    long long saturation_batch = 0;  // first B where throughput gain over the
                                     // previous point drops below 5%
};

inline BatchSweep sweep_batch(const ModelConfig& model, long long seq_len,
                              const std::vector<long long>& batches,
                              const HardwareProfile& profile,
                              StrategyKind strategy = StrategyKind::HP_RO) {
    BatchSweep out;
    for (long long b : batches) {
        const RunResult r = simulate(model, {b, seq_len}, strategy, profile);
        BatchPoint pt;
        pt.batch = b;
        pt.latency_s = r.latency_s;
        pt.step_latency_s = r.latency_s * model.layers;
        pt.throughput_tok_per_s = r.latency_s > 0 ? double(b) / r.latency_s : 0;
        pt.tokens_per_joule = r.tokens_per_joule;
        out.points.push_back(pt);
    }
    for (size_t i = 1; i < out.points.size(); ++i) {
        const double prev = out.points[i - 1].throughput_tok_per_s;
        const double cur = out.points[i].throughput_tok_per_s;
        if (prev > 0 && cur / prev < 1.05) {
            out.saturation_batch = out.points[i - 1].batch;
            break;
        }
    }
    return out;
}

struct DseGrid {
    std::vector<double> compute_tflops;  // axis 1
    std::vector<double> d2d_tbps;        // axis 2
    std::vector<double> latency_s;       // row-major [compute][d2d]
    double at(size_t i, size_t j) const { return latency_s[i * d2d_tbps.size() + j]; }
};

// Sweep per-cube compute and D2D bandwidth; each grid point re-runs the full
// simulation with an overridden cube/link. Grid points are independent and
// evaluate on `threads` workers; results land by index, so the grid is
// identical at any thread count.
inline DseGrid sweep_dse(const ModelConfig& model, const WorkloadPoint& point,
                         const std::vector<double>& compute_tflops,
                         const std::vector<double>& d2d_tbps,
                         const HardwareProfile& base,
                         StrategyKind strategy = StrategyKind::HP_RO, int threads = 1) {
    if (compute_tflops.empty() || d2d_tbps.empty())
        throw std::invalid_argument("sweep_dse: empty sweep axes");
    for (double x : compute_tflops)
        if (x <= 0) throw std::invalid_argument("sweep_dse: compute axis must be positive");
    for (double x : d2d_tbps)
        if (x <= 0) throw std::invalid_argument("sweep_dse: d2d axis must be positive");
    DseGrid grid;
    grid.compute_tflops = compute_tflops;
    grid.d2d_tbps = d2d_tbps;
    const size_t total = compute_tflops.size() * d2d_tbps.size();
    grid.latency_s.assign(total, 0.0);

    auto eval = [&](size_t idx) {
        HardwareProfile p = base;
        p.cube.peak_flops = compute_tflops[idx / d2d_tbps.size()] * 1e12;
        p.cube.peak_override = true;
        p.link.bw_per_dir = d2d_tbps[idx % d2d_tbps.size()] * 1e12;
        p.finalize();
        grid.latency_s[idx] = simulate(model, point, strategy, p).latency_s;
    };
    const int n = std::max(1, std::min<int>(threads, (int)total));
    if (n == 1) {
        for (size_t i = 0; i < total; ++i) eval(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n; ++w)
            pool.emplace_back([&, w] {
                for (size_t i = (size_t)w; i < total; i += (size_t)n) eval(i);
            });
        for (auto& t : pool) t.join();
    }
    return grid;
}

}  // namespace cubesim

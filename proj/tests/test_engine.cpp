#include <doctest.h>

#include <cmath>

#include "cubesim/engine.hpp"

using namespace cubesim;

namespace {

ModelConfig qwen_like() { return model_preset("qwen3-235b-like"); }

const StageResult* find_stage(const RunResult& r, StageKind s) {
    for (const auto& st : r.stages)
        if (st.stage == s) return &st;
    return nullptr;
}

HardwareProfile free_comm_profile() {
    HardwareProfile p = hardware_profile("pnm16");
    p.link.bw_per_dir = 1e21;
    p.link.hop_latency_s = 0;
    return p;
}

}  // namespace

TEST_CASE("profile sanity") {
    const HardwareProfile p = hardware_profile("pnm16");
    CHECK(p.aggregate_bw() == doctest::Approx(44e12));
    CHECK(p.aggregate_flops() == doctest::Approx(1536e12));
    // Component power ceilings match the package TDP.
    CHECK(p.cubes * (p.hbm_power_per_cube_w + p.compute_power_per_cube_w) ==
          doctest::Approx(p.tdp_w));

    const HardwareProfile h = hardware_profile("h100");
    CHECK(h.cube.hbm_bw == doctest::Approx(3.35e12));
    CHECK(p.aggregate_bw() / h.cube.hbm_bw == doctest::Approx(44.0 / 3.35));  // ~13.1

    const HardwareProfile r2 = hardware_profile("rubin-tp2");
    CHECK(r2.aggregate_bw() * r2.c2c_devices == doctest::Approx(p.aggregate_bw()));
    CHECK_THROWS_AS(hardware_profile("tpu"), std::invalid_argument);
}

TEST_CASE("simulate: attention approaches the aggregate-bandwidth floor") {
    const ModelConfig m = qwen_like();
    const HardwareProfile p = hardware_profile("pnm16");
    const WorkloadPoint pt{1, 1048576};
    const RunResult r = simulate(m, pt, StrategyKind::HP_RO, p);
    REQUIRE(r.feasible);
    const StageResult* attn = find_stage(r, StageKind::CoreAttn);
    REQUIRE(attn);
    const double floor_s = double(kv_cache_bytes(m, pt).per_layer) / p.aggregate_bw();
    CHECK(attn->compute_s / floor_s > 0.95);
    CHECK(attn->compute_s / floor_s < 1.05);
    CHECK(attn->binding == BindingResource::Memory);
}

TEST_CASE("simulate: zero-sequence point leaves only projections") {
    const RunResult r =
        simulate(qwen_like(), {1, 0}, StrategyKind::HP_RO, hardware_profile("pnm16"));
    REQUIRE(r.feasible);
    CHECK(find_stage(r, StageKind::CoreAttn) == nullptr);
    CHECK(find_stage(r, StageKind::ProjQKV) != nullptr);
    CHECK(find_stage(r, StageKind::ProjO) != nullptr);
}

TEST_CASE("simulate: per-stage times sum to the total") {
    for (auto st : {StrategyKind::TP16, StrategyKind::HP, StrategyKind::HP_RO}) {
        const RunResult r =
            simulate(qwen_like(), {2, 65536}, st, hardware_profile("pnm16"));
        REQUIRE(r.feasible);
        double sum = 0;
        for (const auto& s : r.stages) sum += s.compute_s + s.comm_s;
        CHECK(r.latency_s == doctest::Approx(sum));  // serial chain, no overlap
        CHECK(r.latency_s >= r.compute_s);
        CHECK(r.latency_s >= r.comm_s);
    }
}

TEST_CASE("baseline roofline") {
    const ModelConfig m = qwen_like();
    HardwareProfile h = hardware_profile("h100");
    h.mem_util = 1.0;
    const WorkloadPoint pt{1, 65536};
    const RunResult r = baseline_roofline(m, pt, h);
    const StageResult* attn = find_stage(r, StageKind::CoreAttn);
    REQUIRE(attn);
    // Memory-bound stage: exactly bytes / HBM bandwidth.
    CHECK(attn->binding == BindingResource::Memory);
    CHECK(attn->compute_s == doctest::Approx(attention_hbm_bytes(m, pt) / 3.35e12));

    // A compute-heavy synthetic point flips to flops / peak.
    ModelConfig fat = m;
    fat.kv_heads = 64;
    fat.q_heads = 64;  // G = 1; then raise batch for intensity
    const RunResult rc = baseline_roofline(fat, {512, 0}, h);
    const StageResult* qkv = find_stage(rc, StageKind::ProjQKV);
    REQUIRE(qkv);
    CHECK(qkv->binding == BindingResource::Compute);
    CHECK(qkv->compute_s == doctest::Approx(qkv->flops / h.cube.peak_flops));

    // TP2 pays c2c time; at long sequences the bandwidth win amortizes it.
    const RunResult tp2 = baseline_roofline(m, pt, hardware_profile("rubin-tp2"));
    CHECK(tp2.comm_s > 0);
    const RunResult tp1 = baseline_roofline(m, pt, hardware_profile("rubin"));
    CHECK(tp1.comm_s == 0);
    const WorkloadPoint long_pt{1, 1048576};
    CHECK(baseline_roofline(m, long_pt, hardware_profile("rubin-tp2")).latency_s <
          baseline_roofline(m, long_pt, hardware_profile("rubin")).latency_s);
}

TEST_CASE("energy accounting") {
    const HardwareProfile h = hardware_profile("h100");
    const ModelConfig m = qwen_like();
    RunResult r;  // zero-duration, zero-volume run
    CHECK(energy_power(r, h, m, {1, 0}).energy_j == 0);

    r.latency_s = 1e-3;
    r.hbm_bytes = 1e9;
    r.flops = 1e12;
    r.wire_bytes = 0;
    const auto e1 = energy_power(r, h, m, {1, 0});
    RunResult r2 = r;
    r2.latency_s *= 2;  // same activity, twice the wall clock
    const auto e2 = energy_power(r2, h, m, {1, 0});
    CHECK(e2.static_j == doctest::Approx(2 * e1.static_j));
    CHECK(e2.hbm_j == e1.hbm_j);
    CHECK(e2.compute_j == e1.compute_j);

    // pnm16 dynamic coefficients are calibrated to the power rows.
    const HardwareProfile p = hardware_profile("pnm16");
    CHECK(p.hbm_pj_per_byte * 1e-12 * p.cube.hbm_bw == doctest::Approx(75.0));
    CHECK(p.compute_pj_per_flop * 1e-12 * p.cube.peak_flops == doctest::Approx(15.0));

    // Components sum to the total.
    const RunResult run =
        simulate(m, {1, 65536}, StrategyKind::HP_RO, p);
    const auto eb = energy_power(run, p, m, {1, 65536});
    CHECK(eb.energy_j ==
          doctest::Approx(eb.static_j + eb.hbm_j + eb.compute_j + eb.d2d_j));
    CHECK(run.energy_j == doctest::Approx(eb.energy_j));
}

TEST_CASE("dse sweep is thread-count invariant") {
    const ModelConfig m = qwen_like();
    const HardwareProfile p = hardware_profile("pnm16");
    const std::vector<double> tf = {8, 96, 256};
    const std::vector<double> db = {0.5, 2.5};
    const DseGrid serial = sweep_dse(m, {1, 8192}, tf, db, p, StrategyKind::HP_RO, 1);
    const DseGrid parallel = sweep_dse(m, {1, 8192}, tf, db, p, StrategyKind::HP_RO, 4);
    REQUIRE(serial.latency_s.size() == parallel.latency_s.size());
    for (size_t i = 0; i < serial.latency_s.size(); ++i)
        CHECK(serial.latency_s[i] == parallel.latency_s[i]);
}

TEST_CASE("ablation ordering and scaling") {
    const ModelConfig m = qwen_like();
    const HardwareProfile p = hardware_profile("pnm16");
    double prev_comm_speedup = 0;
    for (long long S : {8192LL, 65536LL, 262144LL, 1048576LL}) {
        const auto rows = ablate(m, {1, S}, p);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].strategy == StrategyKind::TP16);
        CHECK(rows[0].speedup_total == doctest::Approx(1.0));
        // hp_ro <= hp <= tp16 in latency.
        CHECK(rows[2].latency_s <= rows[1].latency_s);
        CHECK(rows[1].latency_s <= rows[0].latency_s);
        // Communication-only speedup of hp_ro grows with S.
        CHECK(rows[2].speedup_comm > prev_comm_speedup);
        prev_comm_speedup = rows[2].speedup_comm;
    }
    CHECK(prev_comm_speedup > 10.0);

    // With free communication the three strategies converge.
    const auto rows = ablate(m, {1, 65536}, free_comm_profile());
    const double base = rows[0].latency_s;
    for (const auto& r : rows) {
        CHECK(r.latency_s / base > 0.95);
        CHECK(r.latency_s / base < 1.05);
    }
}

TEST_CASE("batch sweep") {
    const ModelConfig m = qwen_like();
    const HardwareProfile p = hardware_profile("pnm16");
    const auto sweep = sweep_batch(m, 65536, {1, 2, 4, 8, 16, 32}, p);
    REQUIRE(sweep.points.size() == 6);
    CHECK(sweep.points[0].throughput_tok_per_s ==
          doctest::Approx(1.0 / sweep.points[0].latency_s));
    // Attention stage time is exactly linear in B (request-by-request rule).
    const RunResult r1 = simulate(m, {1, 65536}, StrategyKind::HP_RO, p);
    const RunResult r8 = simulate(m, {8, 65536}, StrategyKind::HP_RO, p);
    CHECK(find_stage(r8, StageKind::CoreAttn)->compute_s ==
          doctest::Approx(8 * find_stage(r1, StageKind::CoreAttn)->compute_s));
    // Compute saturates at batch 16: beyond it throughput stops improving.
    CHECK(sweep.saturation_batch == 16);
    CHECK(sweep.points[5].throughput_tok_per_s / sweep.points[4].throughput_tok_per_s <
          1.05);
    // Latency still rises with batch.
    for (size_t i = 1; i < sweep.points.size(); ++i)
        CHECK(sweep.points[i].latency_s > sweep.points[i - 1].latency_s);
}

TEST_CASE("dse sweep: monotone grid with a compute plateau") {
    const ModelConfig m = qwen_like();
    const HardwareProfile p = hardware_profile("pnm16");
    const std::vector<double> tf = {8, 16, 32, 64, 96, 128, 256};
    const std::vector<double> db = {0.5, 1.5, 2.5};
    const DseGrid g = sweep_dse(m, {1, 65536}, tf, db, p);
    REQUIRE(g.latency_s.size() == tf.size() * db.size());
    // More of either resource never hurts.
    for (size_t i = 0; i + 1 < tf.size(); ++i)
        for (size_t j = 0; j < db.size(); ++j) CHECK(g.at(i + 1, j) <= g.at(i, j) * (1 + 1e-12));
    for (size_t i = 0; i < tf.size(); ++i)
        for (size_t j = 0; j + 1 < db.size(); ++j) CHECK(g.at(i, j + 1) <= g.at(i, j) * (1 + 1e-12));
    // Beyond 96 TFLOPS per cube the workload is memory-bound everywhere.
    const size_t i96 = 4, i128 = 5, i256 = 6;
    for (size_t j = 0; j < db.size(); ++j) {
        CHECK(std::abs(g.at(i128, j) - g.at(i96, j)) / g.at(i96, j) < 0.02);
        CHECK(std::abs(g.at(i256, j) - g.at(i96, j)) / g.at(i96, j) < 0.02);
    }
    // Below saturation, compute is the sensitive axis.
    const double d_compute = (g.at(0, 1) - g.at(4, 1)) / g.at(4, 1);
    const double d_link = (g.at(0, 0) - g.at(0, 2)) / g.at(0, 2);
    CHECK(d_compute > 10 * d_link);

    CHECK_THROWS_AS(sweep_dse(m, {1, 65536}, {}, db, p), std::invalid_argument);
    CHECK_THROWS_AS(sweep_dse(m, {1, 65536}, {-8}, db, p), std::invalid_argument);
}

TEST_CASE("mla crossover: binding flips between 96 and 512 TFLOPS") {
    const ModelConfig mla = model_preset("deepseek-v3-mla-like");
    HardwareProfile p = hardware_profile("pnm16");
    const WorkloadPoint pt{1, 262144};

    const RunResult at96 = simulate(mla, pt, StrategyKind::HP_RO, p);
    REQUIRE(at96.feasible);
    CHECK(find_stage(at96, StageKind::CoreAttn)->binding == BindingResource::Compute);

    p.cube.peak_flops = 512e12;
    p.cube.peak_override = true;
    p.finalize();
    const RunResult at512 = simulate(mla, pt, StrategyKind::HP_RO, p);
    REQUIRE(at512.feasible);
    CHECK(find_stage(at512, StageKind::CoreAttn)->binding == BindingResource::Memory);
}

TEST_CASE("simulate is deterministic") {
    const RunResult a =
        simulate(qwen_like(), {2, 65536}, StrategyKind::HP_RO, hardware_profile("pnm16"));
    const RunResult b =
        simulate(qwen_like(), {2, 65536}, StrategyKind::HP_RO, hardware_profile("pnm16"));
    CHECK(a.latency_s == b.latency_s);
    CHECK(a.energy_j == b.energy_j);
    CHECK(a.comm_s == b.comm_s);
}

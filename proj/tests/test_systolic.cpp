#include <doctest.h>

#include <cmath>
#include <random>

#include "cubesim/systolic.hpp"

using namespace cubesim;

namespace {

// Independent oracle: evaluate the utilization product for every integer
// split and return the best s_k (smallest wins ties).
long long brute_force_best_split(long long K, long long N, long long M, const SAConfig& sa) {
    const long long P = sa.total_arrays();
    const long long col = ((N + sa.array_dim - 1) / sa.array_dim) *
                          ((M + sa.array_dim - 1) / sa.array_dim);
    const double fd = sa.fill_drain_cycles();
    long long best = 1;
    double best_u = -1;
    for (long long s = 1; s <= K; ++s) {
        const long long T = s * col;
        const double k = double(K) / double(s);
        const double u = (double(std::min(T, P)) / double(P)) * (k / (k + fd));
        if (u > best_u + 1e-15) {
            best_u = u;
            best = s;
        }
    }
    return best;
}

double eq2(const Tiling& t, const SAConfig& sa) {
    const double fd = sa.fill_drain_cycles();
    return (double(std::min(t.total_tiles(), (long long)sa.total_arrays())) /
            sa.total_arrays()) *
           (t.tile_depth / (t.tile_depth + fd));
}

}  // namespace

TEST_CASE("tiling: worked splits") {
    const SAConfig sa;
    CHECK(sa.total_arrays() == 96);

    // 48 column tiles < 96 arrays: double the tile count.
    Tiling t = choose_tiling({16, 64, 768, 1.0, GemmStage::ProjQKV}, sa);
    CHECK(t.s_k == 2);
    CHECK(t.n_tiles == 96);
    CHECK(t.tiles_per_sa == 1);
    CHECK(t.busy_arrays == 96);

    // 192 column tiles: no split needed, two tiles per array.
    t = choose_tiling({16, 64, 3072, 1.0, GemmStage::ProjQKV}, sa);
    CHECK(t.s_k == 1);
    CHECK(t.tiles_per_sa == 2);

    // Narrow output capped by the k >= 1 rule.
    t = choose_tiling({16, 64, 16, 1.0, GemmStage::ProjQKV}, sa);
    CHECK(t.s_k == 64);
    CHECK(t.tile_depth == doctest::Approx(1.0));
    CHECK(t.total_tiles() == 64);
    CHECK(brute_force_best_split(64, 16, 16, sa) == 64);
}

TEST_CASE("tiling: matches the exhaustive argmax oracle") {
    const SAConfig sa;
    std::mt19937 rng(17);
    for (int i = 0; i < 200; ++i) {
        const long long K = 16 * (1 + (long long)(rng() % 64));
        const long long N = 16 * (1 + (long long)(rng() % 64));
        const Tiling got = choose_tiling({8, K, N, 1.0, GemmStage::ProjQKV}, sa);
        const long long want = brute_force_best_split(K, N, 8, sa);
        INFO("K=" << K << " N=" << N);
        CHECK(got.s_k == want);
    }
}

TEST_CASE("utilization: fill/drain arithmetic") {
    const SAConfig sa;
    // Single tile per array, k = 32.
    const GemmShape g{16, 32, 96 * 16, 1.0, GemmStage::ScoreQK};
    const Tiling t = choose_tiling(g, sa);
    CHECK(t.s_k == 1);
    CHECK(t.tiles_per_sa == 1);
    CHECK(utilization(t, g, sa) == 32.0 / 62.0);  // ~0.516

    // Asymptote: T = P and huge k.
    const GemmShape big{16, 1LL << 40, 96 * 16, 1.0, GemmStage::ScoreQK};
    const Tiling tb = choose_tiling(big, sa);
    CHECK(utilization(tb, big, sa) > 1.0 - 1e-8);
    CHECK(utilization(tb, big, sa) <= 1.0);

    // Under-saturated expansion has the const/(k+30) form.
    for (long long K : {32LL, 64LL, 128LL}) {
        Tiling half;
        half.s_k = 1;
        half.tile_depth = double(K);
        half.n_tiles = 48;
        half.m_tiles = 1;
        half.tiles_per_sa = 1;
        half.busy_arrays = 48;
        const GemmShape gg{16, K, 48 * 16, 1.0, GemmStage::ScoreQK};
        CHECK(utilization(half, gg, sa) ==
              doctest::Approx((48.0 / 96.0) * K / (K + 30.0)));
    }

    // Infeasible tilings are reported.
    Tiling badt;
    badt.s_k = 2;
    badt.tile_depth = 0.5;
    CHECK_THROWS_AS(utilization(badt, g, sa), std::invalid_argument);
}

TEST_CASE("continuous utilization") {
    const SAConfig sa;
    CHECK(continuous_utilization(32, 4, sa) == 128.0 / 158.0);  // ~0.810
    CHECK(continuous_utilization(32, 2, sa) == 64.0 / 94.0);    // ~0.681
    // n = 1 reduces to the per-tile factor.
    for (long long k : {1LL, 7LL, 32LL, 500LL})
        CHECK(continuous_utilization(k, 1, sa) == doctest::Approx(double(k) / (k + 30.0)));
    // Monotone increasing in n with limit 1.
    double prev = 0;
    for (long long n = 1; n <= 4096; n *= 2) {
        const double u = continuous_utilization(32, n, sa);
        CHECK(u > prev);
        prev = u;
    }
    CHECK(prev > 0.999);
    CHECK_THROWS_AS(continuous_utilization(0, 1, sa), std::invalid_argument);
}

TEST_CASE("continuous mode never loses to default") {
    const SAConfig sa;
    std::mt19937 rng(23);
    for (int i = 0; i < 100; ++i) {
        const GemmShape g{1 + (long long)(rng() % 16), 16 * (1 + (long long)(rng() % 64)),
                          16 * (1 + (long long)(rng() % 512)), 1.0, GemmStage::ScoreQK};
        const Tiling t = choose_tiling(g, sa);
        CHECK(utilization(t, g, sa, true) >= utilization(t, g, sa, false));
        const double u = utilization(t, g, sa, true);
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("splitting monotonicity around saturation") {
    const SAConfig sa;
    const long long K = 1024, col = 48;  // N = 768
    const double fd = sa.fill_drain_cycles();
    auto u = [&](long long s) {
        const long long T = s * col;
        const double k = double(K) / s;
        return (double(std::min(T, (long long)96)) / 96.0) * (k / (k + fd));
    };
    for (long long s = 1; s * col < 96; ++s) CHECK(u(s + 1) > u(s));  // filling arrays helps
    for (long long s = 2; s <= 16; ++s) CHECK(u(2 * s) < u(s));       // past saturation hurts
}

TEST_CASE("cube kernel time: binding resources") {
    const CubeConfig cube;

    // Deep GEMV far below the ridge: memory-bound within 1%.
    const GemmShape gemv{1, 4096, 4096, 1.0, GemmStage::ProjO};
    const CubeKernelTime mt = cube_kernel_time(gemv, cube);
    CHECK(mt.feasible);
    CHECK(mt.binding == BindingResource::Memory);
    CHECK(mt.time_s ==
          doctest::Approx(gemv.bytes() / cube.hbm_bw + cube.hbm_latency_s).epsilon(0.01));

    // Fat GEMM far above the ridge: compute-bound within 1%.
    const GemmShape fat{64, 8192, 8192, 1.0, GemmStage::ProjQKV};
    const CubeKernelTime ct = cube_kernel_time(fat, cube);
    CHECK(ct.feasible);
    CHECK(ct.binding == BindingResource::Compute);
    CHECK(ct.time_s == doctest::Approx(fat.flops() / (cube.peak_flops * ct.util) +
                                       cube.hbm_latency_s)
                           .epsilon(0.01));

    // GQA score GEMM at 64K: intensity 32 sits under the ~34.9 ridge.
    const GemmShape score{16, 128, 65536, 1.0, GemmStage::ScoreQK};
    const CubeKernelTime st = cube_kernel_time(score, cube);
    CHECK(st.binding == BindingResource::Memory);

    // Monotone non-increasing in both resources.
    CubeConfig faster = cube;
    faster.peak_flops *= 2;
    faster.peak_override = true;
    CubeConfig wider = cube;
    wider.hbm_bw *= 2;
    for (const GemmShape& g : {gemv, fat, score}) {
        CHECK(cube_kernel_time(g, faster).time_s <= cube_kernel_time(g, cube).time_s);
        CHECK(cube_kernel_time(g, wider).time_s <= cube_kernel_time(g, cube).time_s);
    }
}

TEST_CASE("cube kernel time: infeasible cases carry diagnostics") {
    const CubeConfig cube;
    Tiling bad;
    bad.s_k = 4;
    bad.tile_depth = 0.25;
    const CubeKernelTime r = cube_kernel_time({16, 1, 256, 1.0, GemmStage::ProjQKV}, bad, cube);
    CHECK_FALSE(r.feasible);
    CHECK(r.diag.find("k < 1") != std::string::npos);

    // Oversized arrays at fp32 overflow the 6.4 KB banks.
    CubeConfig bigsa = cube;
    bigsa.sa.array_dim = 64;
    bigsa.sa.arrays_per_core = 2;
    bigsa.sa.cores = 12;
    bigsa.peak_override = true;
    const CubeKernelTime rr =
        cube_kernel_time({64, 4096, 4096, 4.0, GemmStage::ProjQKV}, bigsa);
    CHECK_FALSE(rr.feasible);
    CHECK_FALSE(rr.diag.empty());
}

TEST_CASE("cube config consistency check") {
    CubeConfig cube;  // 96 TFLOPS vs derived 98.3: inside 5%
    CHECK_NOTHROW(cube.validate());
    cube.peak_flops = 50e12;
    CHECK_THROWS_AS(cube.validate(), std::invalid_argument);
    cube.peak_override = true;
    CHECK_NOTHROW(cube.validate());
}

TEST_CASE("dataflow report") {
    const SAConfig sa;
    // M=1 on a 16x16 weight-stationary array leaves >= 15/16 idle.
    const DataflowReport r1 = dataflow_report({1, 128, 4096, 1.0, GemmStage::ScoreQK}, sa);
    CHECK(r1.ws.idle_pe_fraction >= 15.0 / 16.0);
    CHECK(r1.ws.streamed_dim == 'M');
    CHECK(r1.is.streamed_dim == 'N');
    CHECK(r1.os.streamed_dim == 'K');

    // IS collection grows linearly with N; OS does not depend on it.
    const DataflowReport a = dataflow_report({4, 128, 1024, 1.0, GemmStage::ScoreQK}, sa);
    const DataflowReport b = dataflow_report({4, 128, 2048, 1.0, GemmStage::ScoreQK}, sa);
    CHECK(b.is.collection_bytes == doctest::Approx(2 * a.is.collection_bytes));
    CHECK(b.os.collection_bytes == a.os.collection_bytes);
    CHECK(a.is.collection_scales_with_n);
    CHECK_FALSE(a.os.collection_scales_with_n);
}

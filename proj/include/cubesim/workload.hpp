#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cubesim {

// ---------------------------------------------------------------------------
// Attention workload description: model shapes, per-stage GEMMs, traffic.
//
// Conventions: sizes in elements, traffic in bytes (double; bytes_per_elem
// may be 0.5), rates in FLOP/s and B/s, times in seconds.
// ---------------------------------------------------------------------------

enum class AttnKind { GQA, MLA };

struct ModelConfig {
    std::string name;
    int d_model = 0;   // hidden size D_m
    int q_heads = 0;   // query heads H_Q
    int kv_heads = 0;  // KV heads H_KV
    int head_dim = 0;  // per-head dim d_h
    int layers = 1;
    AttnKind attn_kind = AttnKind::GQA;
    double bytes_per_elem = 1.0;  // FP8 by default

    // G = H_Q / H_KV: query heads sharing one KV head.
    int group_size() const { return kv_heads > 0 ? q_heads / kv_heads : 0; }

    void validate() const {
        if (d_model <= 0 || q_heads <= 0 || kv_heads <= 0 || head_dim <= 0 || layers <= 0)
            throw std::invalid_argument("ModelConfig: all dimensions must be positive");
        if (q_heads % kv_heads != 0)
            throw std::invalid_argument("ModelConfig: q_heads must be a multiple of kv_heads");
        if (bytes_per_elem != 0.5 && bytes_per_elem != 1.0 &&
            bytes_per_elem != 2.0 && bytes_per_elem != 4.0)
            throw std::invalid_argument("ModelConfig: bytes_per_elem must be 0.5, 1, 2 or 4");
        if (attn_kind == AttnKind::MLA && kv_heads != 1)
            throw std::invalid_argument(
                "ModelConfig: MLA uses a single latent KV head; kv_heads must be 1");
    }
};

// One decode step: batch of independent requests, each attending to its own
// seq_len cached tokens. seq_len == 0 is the degenerate no-context point.
struct WorkloadPoint {
    long long batch = 1;
    long long seq_len = 0;

    void validate() const {
        if (batch < 1) throw std::invalid_argument("WorkloadPoint: batch must be >= 1");
        if (seq_len < 0) throw std::invalid_argument("WorkloadPoint: seq_len must be >= 0");
    }
};

enum class GemmStage { ProjQKV, ScoreQK, WeightedAV, ProjO };

inline const char* to_string(GemmStage s) {
    switch (s) {
        case GemmStage::ProjQKV:    return "proj_qkv";
        case GemmStage::ScoreQK:    return "score_qk";
        case GemmStage::WeightedAV: return "weighted_av";
        case GemmStage::ProjO:      return "proj_o";
    }
    return "?";
}

// C[m,n] = A[m,k] * B[k,n]. Traffic counts each operand stream exactly once
// (no cache; output write-back included).
struct GemmShape {
    long long m = 0, k = 0, n = 0;
    double bytes_per_elem = 1.0;
    GemmStage stage = GemmStage::ProjQKV;

    double flops() const { return 2.0 * double(m) * double(k) * double(n); }
    double input_bytes() const {
        return (double(m) * double(k) + double(k) * double(n)) * bytes_per_elem;
    }
    double output_bytes() const { return double(m) * double(n) * bytes_per_elem; }
    double bytes() const { return input_bytes() + output_bytes(); }

    void validate() const {
        if (m < 1 || k < 1 || n < 1)
            throw std::invalid_argument("GemmShape: dimensions must be positive");
        if (bytes_per_elem <= 0)
            throw std::invalid_argument("GemmShape: bytes_per_elem must be positive");
    }
};

// Per-stage GEMMs for one decode step. Score/weighted-value GEMMs appear once
// per KV head with M = G * B rows (all query heads sharing that KV head,
// batched across requests). seq_len == 0 skips the core-attention stages.
inline std::vector<GemmShape> derive_stage_gemms(const ModelConfig& model,
                                                 const WorkloadPoint& point) {
    model.validate();
    point.validate();
    const double b = model.bytes_per_elem;
    const long long B = point.batch;
    const long long S = point.seq_len;
    const long long G = model.group_size();

    std::vector<GemmShape> out;
    out.push_back({B, model.d_model,
                   (long long)(model.q_heads + 2 * model.kv_heads) * model.head_dim, b,
                   GemmStage::ProjQKV});
    if (S > 0) {
        for (int h = 0; h < model.kv_heads; ++h)
            out.push_back({G * B, model.head_dim, S, b, GemmStage::ScoreQK});
        for (int h = 0; h < model.kv_heads; ++h)
            out.push_back({G * B, S, model.head_dim, b, GemmStage::WeightedAV});
    }
    out.push_back({B, (long long)model.q_heads * model.head_dim, model.d_model, b,
                   GemmStage::ProjO});
    return out;
}

struct KvCacheBytes {
    std::uint64_t per_layer = 0;  // one request, one layer: 2 * H_KV * S * d_h elems
    std::uint64_t total = 0;      // all layers
};

inline KvCacheBytes kv_cache_bytes(const ModelConfig& model, const WorkloadPoint& point) {
    model.validate();
    point.validate();
    const double elems = 2.0 * model.kv_heads * double(point.seq_len) * model.head_dim;
    KvCacheBytes r;
    r.per_layer = (std::uint64_t)(elems * model.bytes_per_elem);
    r.total = r.per_layer * (std::uint64_t)model.layers;
    return r;
}

// FLOPs per byte with streaming byte accounting (A, B and C each once).
inline double arithmetic_intensity(const GemmShape& g) {
    g.validate();
    return g.flops() / g.bytes();
}

// Core-attention intensity in the long-sequence limit, counted over KV-cache
// bytes only: score and weighted-value GEMMs read each cached K/V element
// once while the scores never leave the cube. Evaluates to 2G / bytes_per_elem.
inline double core_attention_intensity(const ModelConfig& model) {
    model.validate();
    return 4.0 * model.group_size() * model.head_dim /
           (2.0 * model.head_dim * model.bytes_per_elem);
}

// HBM traffic of the fused decode-attention kernel for one layer / one decode
// step: per request, the KV cache streams once plus query in and output out.
inline double attention_hbm_bytes(const ModelConfig& model, const WorkloadPoint& point) {
    model.validate();
    point.validate();
    const double per_request =
        (2.0 * model.kv_heads * double(point.seq_len) * model.head_dim +
         2.0 * model.q_heads * model.head_dim) *
        model.bytes_per_elem;
    return double(point.batch) * per_request;
}

inline double ridge_point(double peak_flops, double mem_bw) {
    if (peak_flops <= 0 || mem_bw <= 0)
        throw std::invalid_argument("ridge_point: rates must be positive");
    return peak_flops / mem_bw;
}

// max(compute roof, memory roof) for a single streamed GEMM.
inline double roofline_time(const GemmShape& g, double peak_flops, double mem_bw) {
    g.validate();
    if (peak_flops <= 0 || mem_bw <= 0)
        throw std::invalid_argument("roofline_time: rates must be positive");
    return std::max(g.flops() / peak_flops, g.bytes() / mem_bw);
}

// ---------------------------------------------------------------------------
// Built-in model presets. Parameters are taken from the public model cards
// (attention geometry only); see README for provenance notes. The MLA preset
// keeps its latent cache at 16-bit, which puts its core-attention intensity
// (2*128/2 = 128 FLOP/B) at 8x the equally-typed GQA baseline (2*16/2 = 16).
// ---------------------------------------------------------------------------
inline ModelConfig model_preset(const std::string& name) {
    if (name == "qwen3-235b-like")
        return {name, 4096, 64, 4, 128, 94, AttnKind::GQA, 1.0};
    if (name == "llama4-maverick-like")
        return {name, 5120, 40, 8, 128, 48, AttnKind::GQA, 1.0};
    if (name == "deepseek-v3-mla-like")
        return {name, 7168, 128, 1, 576, 61, AttnKind::MLA, 2.0};
    throw std::invalid_argument("unknown model preset: " + name);
}

}  // namespace cubesim

#pragma once

#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cubesim/fabric.hpp"
#include "cubesim/workload.hpp"

namespace cubesim {

// ---------------------------------------------------------------------------
// Parallelism strategies: map weights, KV shards, compute and collectives
// onto the cube mesh and emit an executable event schedule.
//
//   TP16  — every stage split across all cubes, GPU-style; core-attention
//           collectives carry score rows, so their volume grows with S.
//   HP    — level 1 maps KV heads to cube groups (TP), level 2 splits the
//           KV cache by sequence inside each group (CP). Merge via
//           ReduceScatter+AllGather, projection on x-split weights, then a
//           cross-group AllReduce and an intra-group assemble.
//   HP_RO — same hierarchy, reordered output stage: ReduceScatter only
//           (softmax stats piggybacked), projection on the y-resliced
//           weight, and a single Reduce to the destination cube.
// ---------------------------------------------------------------------------

enum class StrategyKind { TP16, HP, HP_RO };

inline const char* to_string(StrategyKind s) {
    switch (s) {
        case StrategyKind::TP16:  return "tp16";
        case StrategyKind::HP:    return "hp";
        case StrategyKind::HP_RO: return "hp_ro";
    }
    return "?";
}

inline StrategyKind strategy_from_string(const std::string& s) {
    if (s == "tp16") return StrategyKind::TP16;
    if (s == "hp") return StrategyKind::HP;
    if (s == "hp_ro") return StrategyKind::HP_RO;
    throw std::invalid_argument("unknown strategy: " + s);
}

enum class StageKind { ProjQKV, CoreAttn, ProjO };

inline const char* to_string(StageKind s) {
    switch (s) {
        case StageKind::ProjQKV:  return "proj_qkv";
        case StageKind::CoreAttn: return "core_attn";
        case StageKind::ProjO:    return "proj_o";
    }
    return "?";
}

struct SeqRange {
    long long begin = 0, end = 0;
    long long len() const { return end - begin; }
};

enum class WOPartition { yx, yy };

struct WeightSlice {
    enum class Matrix { WQ, WKV, WO };
    Matrix matrix;
    long long row_begin = 0, row_end = 0;  // input-dim (y) range
    long long col_begin = 0, col_end = 0;  // output-dim (x) range
    WOPartition wo_axis = WOPartition::yx; // meaningful for WO only
};

struct Placement {
    MeshTopology topo;
    std::vector<std::vector<int>> groups;          // cube ids per level-1 group
    int heads_per_group = 1;                       // KV heads handled by each group
    std::vector<SeqRange> kv_shards;               // indexed by cube id
    std::vector<std::vector<WeightSlice>> weight_slices;  // indexed by cube id
    int destination_cube = 0;
    WOPartition w_o_axis = WOPartition::yx;

    int group_size() const { return groups.empty() ? 0 : (int)groups[0].size(); }
    int group_of(int cube) const {
        for (size_t m = 0; m < groups.size(); ++m)
            for (int id : groups[m])
                if (id == cube) return (int)m;
        return -1;
    }
    int index_in_group(int cube) const {
        for (const auto& g : groups)
            for (size_t j = 0; j < g.size(); ++j)
                if (g[j] == cube) return (int)j;
        return -1;
    }
};

// ---------------------------------------------------------------------------
// Group construction
// ---------------------------------------------------------------------------

namespace detail {
inline std::vector<long long> balanced_bounds(long long total, int parts) {
    std::vector<long long> b(parts + 1, 0);
    for (int i = 0; i <= parts; ++i) b[i] = total * i / parts;
    return b;
}

inline long long gcd_ll(long long a, long long b) { return b ? gcd_ll(b, a % b) : a; }
}  // namespace detail

// Partition the mesh into equally sized, equally loaded cube groups. When
// kv_heads does not divide the cube count, the group count falls back to
// gcd(cubes, kv_heads) so several heads share a group. Group shapes prefer
// the most square sub-mesh (2x2 over 1x4) to minimize intra-group hops.
inline std::vector<std::vector<int>> build_groups(int kv_heads, const MeshTopology& topo) {
    topo.validate();
    if (kv_heads < 1) throw std::invalid_argument("build_groups: kv_heads must be >= 1");
    const int cubes = topo.cube_count();
    int n_groups;
    if (kv_heads >= cubes && kv_heads % cubes == 0)
        n_groups = cubes;
    else if (cubes % kv_heads == 0)
        n_groups = kv_heads;
    else
        n_groups = (int)detail::gcd_ll(cubes, kv_heads);
    const int gsz = cubes / n_groups;

    // Most-square factorization that tiles the mesh.
    int best_r = -1, best_c = -1;
    for (int r = 1; r <= gsz; ++r) {
        if (gsz % r != 0) continue;
        const int c = gsz / r;
        if (r > topo.rows || c > topo.cols) continue;
        if (topo.rows % r != 0 || topo.cols % c != 0) continue;
        if (best_r < 0 || (r + c) < (best_r + best_c) ||
            ((r + c) == (best_r + best_c) && r < best_r)) {
            best_r = r;
            best_c = c;
        }
    }

    std::vector<std::vector<int>> groups;
    if (best_r > 0) {
        for (int br = 0; br < topo.rows / best_r; ++br)
            for (int bc = 0; bc < topo.cols / best_c; ++bc) {
                std::vector<int> g;
                for (int r = 0; r < best_r; ++r)
                    for (int c = 0; c < best_c; ++c)
                        g.push_back(topo.id(br * best_r + r, bc * best_c + c));
                groups.push_back(std::move(g));
            }
    } else {
        // No rectangular tiling: contiguous boustrophedon chunks.
        std::vector<int> order;
        for (int r = 0; r < topo.rows; ++r)
            for (int c = 0; c < topo.cols; ++c)
                order.push_back(topo.id(r, (r % 2 == 0) ? c : topo.cols - 1 - c));
        for (int i = 0; i < n_groups; ++i)
            groups.emplace_back(order.begin() + i * gsz, order.begin() + (i + 1) * gsz);
    }
    for (const auto& g : groups)
        if (!is_connected(g, topo))
            throw std::invalid_argument("build_groups: produced a disconnected group");
    return groups;
}

// ---------------------------------------------------------------------------
// Placement: weight slices and KV shards per cube
// ---------------------------------------------------------------------------

inline Placement make_placement(const ModelConfig& model, const WorkloadPoint& point,
                                StrategyKind strategy, const MeshTopology& topo = {},
                                int destination_cube = 0) {
    model.validate();
    point.validate();
    topo.validate();
    if (!topo.valid(destination_cube))
        throw std::invalid_argument("make_placement: invalid destination cube");

    Placement p;
    p.topo = topo;
    p.destination_cube = destination_cube;
    p.w_o_axis = (strategy == StrategyKind::HP_RO) ? WOPartition::yy : WOPartition::yx;

    const int cubes = topo.cube_count();
    const long long dh = model.head_dim;
    const long long G = model.group_size();
    const long long S = point.seq_len;

    p.kv_shards.resize(cubes);
    p.weight_slices.resize(cubes);

    if (strategy == StrategyKind::TP16) {
        // One package-wide group: every cube holds 1/cubes of each weight and
        // a sequence shard of every head's cache.
        std::vector<int> all(cubes);
        std::iota(all.begin(), all.end(), 0);
        p.groups.push_back(all);
        p.heads_per_group = model.kv_heads;
        const auto sb = detail::balanced_bounds(S, cubes);
        const auto qb = detail::balanced_bounds((long long)model.q_heads * dh, cubes);
        const auto kvb = detail::balanced_bounds((long long)2 * model.kv_heads * dh, cubes);
        const auto ob = detail::balanced_bounds(model.d_model, cubes);
        for (int id = 0; id < cubes; ++id) {
            p.kv_shards[id] = {sb[id], sb[id + 1]};
            p.weight_slices[id].push_back(
                {WeightSlice::Matrix::WQ, 0, model.d_model, qb[id], qb[id + 1]});
            p.weight_slices[id].push_back(
                {WeightSlice::Matrix::WKV, 0, model.d_model, kvb[id], kvb[id + 1]});
            // Row-parallel W_O: y-split across all cubes.
            p.weight_slices[id].push_back({WeightSlice::Matrix::WO, qb[id], qb[id + 1], 0,
                                           model.d_model, WOPartition::yx});
        }
        return p;
    }

    p.groups = build_groups(model.kv_heads, topo);
    const int n_groups = (int)p.groups.size();
    const int gsz = cubes / n_groups;
    p.heads_per_group = model.kv_heads / n_groups;
    const long long hg = p.heads_per_group;
    const long long feat = hg * G * dh;  // attention feature width owned by one group

    const auto sb = detail::balanced_bounds(S, gsz);
    const auto fq = detail::balanced_bounds(feat, gsz);
    const auto fkv = detail::balanced_bounds(2 * hg * dh, gsz);
    const auto fo = detail::balanced_bounds(model.d_model, gsz);
    for (int m = 0; m < n_groups; ++m) {
        const long long q0 = (long long)m * feat;
        const long long kv0 = (long long)m * 2 * hg * dh;
        for (int j = 0; j < gsz; ++j) {
            const int id = p.groups[m][j];
            p.kv_shards[id] = {sb[j], sb[j + 1]};
            p.weight_slices[id].push_back(
                {WeightSlice::Matrix::WQ, 0, model.d_model, q0 + fq[j], q0 + fq[j + 1]});
            p.weight_slices[id].push_back(
                {WeightSlice::Matrix::WKV, 0, model.d_model, kv0 + fkv[j], kv0 + fkv[j + 1]});
            if (p.w_o_axis == WOPartition::yx)
                p.weight_slices[id].push_back({WeightSlice::Matrix::WO, q0, q0 + feat,
                                               fo[j], fo[j + 1], WOPartition::yx});
            else
                p.weight_slices[id].push_back({WeightSlice::Matrix::WO, q0 + fq[j],
                                               q0 + fq[j + 1], 0, model.d_model,
                                               WOPartition::yy});
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

enum class EventKind { Compute, Collective, Barrier };
enum class CollectiveScope { IntraGroup, CrossGroup, Global };

inline const char* to_string(CollectiveScope s) {
    switch (s) {
        case CollectiveScope::IntraGroup: return "intra_group";
        case CollectiveScope::CrossGroup: return "cross_group";
        case CollectiveScope::Global:     return "global";
    }
    return "?";
}

struct ComputeDesc {
    std::vector<GemmShape> gemms;  // per-cube work; identical on every listed cube
    double hbm_bytes = 0;          // per-cube HBM traffic of the event
    int request = -1;              // -1: batched across requests
};

struct CollectiveDesc {
    CollectiveOp op = CollectiveOp::AllGather;
    std::vector<std::vector<int>> groups;  // concurrent symmetric instances
    double bytes_per_cube = 0;
    CollectiveScope scope = CollectiveScope::IntraGroup;
};

struct Event {
    int id = 0;
    StageKind stage = StageKind::ProjQKV;
    EventKind kind = EventKind::Compute;
    std::string label;
    ComputeDesc compute;
    CollectiveDesc coll;
    std::vector<int> deps;
};

struct Schedule {
    StrategyKind strategy = StrategyKind::TP16;
    ModelConfig model;
    WorkloadPoint point;
    Placement placement;
    std::vector<Event> events;
};

namespace detail {

struct ScheduleBuilder {
    Schedule s;
    int last = -1;

    int add(Event e) {
        const int id = (int)s.events.size();
        e.id = id;
        if (e.deps.empty() && last >= 0) e.deps.push_back(last);
        last = id;
        s.events.push_back(std::move(e));
        return id;
    }

    int compute(StageKind stage, std::string label, std::vector<GemmShape> gemms,
                double hbm_bytes, int request = -1) {
        Event e;
        e.stage = stage;
        e.kind = EventKind::Compute;
        e.label = std::move(label);
        e.compute = {std::move(gemms), hbm_bytes, request};
        return add(std::move(e));
    }

    int collective(StageKind stage, std::string label, CollectiveOp op,
                   std::vector<std::vector<int>> groups, double bytes_per_cube,
                   CollectiveScope scope) {
        Event e;
        e.stage = stage;
        e.kind = EventKind::Collective;
        e.label = std::move(label);
        e.coll = {op, std::move(groups), bytes_per_cube, scope};
        return add(std::move(e));
    }

    int barrier(StageKind stage, std::string label, std::vector<int> deps = {}) {
        Event e;
        e.stage = stage;
        e.kind = EventKind::Barrier;
        e.label = std::move(label);
        e.deps = std::move(deps);
        return add(std::move(e));
    }
};

// Position groups for cross-group collectives: cube j of every level-1 group.
inline std::vector<std::vector<int>> position_groups(const Placement& p) {
    std::vector<std::vector<int>> out;
    if (p.groups.empty()) return out;
    const size_t gsz = p.groups[0].size();
    for (size_t j = 0; j < gsz; ++j) {
        std::vector<int> g;
        for (const auto& grp : p.groups) g.push_back(grp[j]);
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace detail

constexpr double kStatScalarBytes = 4.0;  // piggybacked (m, l) ride at fp32

// Per-request fused attention event over each cube's sequence shard.
namespace detail {
inline void add_attention_events(ScheduleBuilder& b, const ModelConfig& model,
                                 const WorkloadPoint& point, long long shard_len,
                                 int heads_per_cube) {
    const double bpe = model.bytes_per_elem;
    const long long dh = model.head_dim;
    const long long G = model.group_size();
    if (point.seq_len == 0) return;
    const long long shard = std::max<long long>(shard_len, 1);
    for (long long r = 0; r < point.batch; ++r) {
        std::vector<GemmShape> gemms;
        for (int h = 0; h < heads_per_cube; ++h) {
            gemms.push_back({G, dh, shard, bpe, GemmStage::ScoreQK});
            gemms.push_back({G, shard, dh, bpe, GemmStage::WeightedAV});
        }
        // KV shard streams once; query in and partial output out.
        const double hbm =
            heads_per_cube * (2.0 * dh * double(shard_len) + 2.0 * G * dh) * bpe;
        b.compute(StageKind::CoreAttn, "attention r" + std::to_string(r), std::move(gemms),
                  hbm, (int)r);
    }
}
}  // namespace detail

// GPU-like tensor parallelism across the whole package. Weights are split
// across all cubes and each attention stage ends in a package-wide
// collective; the per-request score gather is what ties communication volume
// to the sequence length.
inline Schedule plan_tp16(const ModelConfig& model, const WorkloadPoint& point,
                          const Placement& placement) {
    model.validate();
    point.validate();
    detail::ScheduleBuilder b;
    b.s.strategy = StrategyKind::TP16;
    b.s.model = model;
    b.s.point = point;
    b.s.placement = placement;

    const int cubes = placement.topo.cube_count();
    const double bpe = model.bytes_per_elem;
    const long long B = point.batch;
    const long long S = point.seq_len;
    const long long dh = model.head_dim;
    const long long qkv_out = (long long)(model.q_heads + 2 * model.kv_heads) * dh;
    const auto& all = placement.groups;

    {
        const long long n_cube = std::max<long long>(qkv_out / cubes, 1);
        GemmShape g{B, model.d_model, n_cube, bpe, GemmStage::ProjQKV};
        b.compute(StageKind::ProjQKV, "qkv projection", {g}, g.bytes());
    }
    if (cubes > 1)
        b.collective(StageKind::ProjQKV, "qkv gather", CollectiveOp::AllGather, all,
                     double(B) * qkv_out * bpe / cubes, CollectiveScope::Global);

    if (S > 0) {
        const double shard = double(S) / cubes;
        const long long shard_i = std::max<long long>((S + cubes - 1) / cubes, 1);
        for (long long r = 0; r < B; ++r) {
            std::vector<GemmShape> gemms;
            for (int h = 0; h < model.kv_heads; ++h) {
                gemms.push_back({model.group_size(), dh, std::max<long long>(shard_i, 1),
                                 bpe, GemmStage::ScoreQK});
                gemms.push_back({model.group_size(), std::max<long long>(shard_i, 1), dh,
                                 bpe, GemmStage::WeightedAV});
            }
            const double hbm = model.kv_heads * (2.0 * dh * shard) * bpe +
                               2.0 * model.q_heads * dh * bpe;
            b.compute(StageKind::CoreAttn, "attention r" + std::to_string(r),
                      std::move(gemms), hbm, (int)r);
            if (cubes > 1)
                b.collective(StageKind::CoreAttn, "score gather r" + std::to_string(r),
                             CollectiveOp::AllGather, all,
                             double(model.q_heads) * shard * bpe, CollectiveScope::Global);
        }
        if (cubes > 1)
            b.collective(StageKind::CoreAttn, "attention output reduce",
                         CollectiveOp::AllReduce, all,
                         double(B) * model.q_heads * dh * bpe, CollectiveScope::Global);
    }

    b.barrier(StageKind::ProjO, "all requests done");
    {
        const long long k_cube =
            std::max<long long>((long long)model.q_heads * dh / cubes, 1);
        GemmShape g{B, k_cube, model.d_model, bpe, GemmStage::ProjO};
        b.compute(StageKind::ProjO, "output projection", {g}, g.bytes());
    }
    if (cubes > 1)
        b.collective(StageKind::ProjO, "output reduce", CollectiveOp::AllReduce, all,
                     double(B) * model.d_model * bpe, CollectiveScope::Global);
    return b.s;
}

namespace detail {
// Shared prefix of HP and HP_RO: projection, query broadcast, attention.
inline ScheduleBuilder hybrid_prefix(const ModelConfig& model, const WorkloadPoint& point,
                                     const Placement& p, StrategyKind kind) {
    ScheduleBuilder b;
    b.s.strategy = kind;
    b.s.model = model;
    b.s.point = point;
    b.s.placement = p;

    const double bpe = model.bytes_per_elem;
    const long long B = point.batch;
    const long long dh = model.head_dim;
    const long long G = model.group_size();
    const int gsz = p.group_size();
    const long long hg = p.heads_per_group;
    const long long feat = hg * G * dh;

    {
        const long long n_cube = std::max<long long>((feat + 2 * hg * dh) / gsz, 1);
        GemmShape g{B, model.d_model, n_cube, bpe, GemmStage::ProjQKV};
        b.compute(StageKind::ProjQKV, "qkv projection", {g}, g.bytes());
    }
    if (gsz > 1 && point.seq_len > 0)
        b.collective(StageKind::CoreAttn, "query broadcast", CollectiveOp::AllGather,
                     p.groups, double(B) * feat * bpe / gsz, CollectiveScope::IntraGroup);

    // Kernel time follows the widest shard in a group (the critical path).
    long long shard = point.seq_len;
    if (!p.kv_shards.empty()) {
        shard = 0;
        for (int id : p.groups[0]) shard = std::max(shard, p.kv_shards[id].len());
    }
    add_attention_events(b, model, point, shard, (int)hg);
    return b;
}
}  // namespace detail

// Two-level hybrid parallelism with the default collective flow around the
// output projection: full intra-group AllReduce (ReduceScatter + AllGather),
// projection on x-split W_O, cross-group AllReduce of output slices, and an
// intra-group assemble.
inline Schedule plan_hp(const ModelConfig& model, const WorkloadPoint& point,
                        const Placement& placement) {
    model.validate();
    point.validate();
    if (placement.w_o_axis != WOPartition::yx)
        throw std::invalid_argument("plan_hp: placement must carry the yx W_O partition");
    auto b = detail::hybrid_prefix(model, point, placement, StrategyKind::HP);

    const double bpe = model.bytes_per_elem;
    const long long B = point.batch;
    const long long dh = model.head_dim;
    const long long G = model.group_size();
    const int gsz = placement.group_size();
    const int n_groups = (int)placement.groups.size();
    const long long feat = placement.heads_per_group * G * dh;

    b.barrier(StageKind::ProjO, "all requests done");
    if (point.seq_len > 0 && gsz > 1) {
        b.collective(StageKind::ProjO, "attention merge (scatter)",
                     CollectiveOp::ReduceScatter, placement.groups,
                     double(B) * feat * bpe, CollectiveScope::IntraGroup);
        b.collective(StageKind::ProjO, "attention merge (assemble)",
                     CollectiveOp::AllGather, placement.groups,
                     double(B) * feat * bpe / gsz, CollectiveScope::IntraGroup);
    }
    {
        GemmShape g{B, feat, std::max<long long>(model.d_model / gsz, 1), bpe,
                    GemmStage::ProjO};
        b.compute(StageKind::ProjO, "output projection", {g}, g.bytes());
    }
    if (n_groups > 1)
        b.collective(StageKind::ProjO, "cross-group output reduce",
                     CollectiveOp::AllReduce, detail::position_groups(placement),
                     double(B) * model.d_model * bpe / gsz, CollectiveScope::CrossGroup);
    if (gsz > 1)
        b.collective(StageKind::ProjO, "output assemble", CollectiveOp::AllGather,
                     placement.groups, double(B) * model.d_model * bpe / gsz,
                     CollectiveScope::IntraGroup);
    return b.s;
}

// Reordered collective flow: the intra-group AllReduce shrinks to a
// ReduceScatter whose payload carries the per-shard (m, l) statistics, the
// projection runs on the y-resliced W_O over the scatter slice, and one
// Reduce delivers the summed output to the destination cube. No AllGather
// appears in the output stage.
inline Schedule plan_hp_ro(const ModelConfig& model, const WorkloadPoint& point,
                           const Placement& placement) {
    model.validate();
    point.validate();
    if (placement.w_o_axis != WOPartition::yy)
        throw std::invalid_argument("plan_hp_ro: placement must carry the yy W_O partition");
    auto b = detail::hybrid_prefix(model, point, placement, StrategyKind::HP_RO);

    const double bpe = model.bytes_per_elem;
    const long long B = point.batch;
    const long long dh = model.head_dim;
    const long long G = model.group_size();
    const int gsz = placement.group_size();
    const long long feat = placement.heads_per_group * G * dh;

    b.barrier(StageKind::ProjO, "all requests done");
    if (point.seq_len > 0 && gsz > 1) {
        const double rows = double(B) * placement.heads_per_group * G;
        b.collective(StageKind::ProjO, "attention merge (scatter, stats piggybacked)",
                     CollectiveOp::ReduceScatter, placement.groups,
                     double(B) * feat * bpe + 2.0 * rows * kStatScalarBytes,
                     CollectiveScope::IntraGroup);
    }
    {
        GemmShape g{B, std::max<long long>(feat / gsz, 1), model.d_model, bpe,
                    GemmStage::ProjO};
        b.compute(StageKind::ProjO, "output projection", {g}, g.bytes());
    }
    if (placement.topo.cube_count() > 1) {
        // Every cube holds a full-width partial sum; reduce them all to the
        // destination. The destination leads the group (tree root).
        std::vector<int> all;
        all.push_back(placement.destination_cube);
        for (int id = 0; id < placement.topo.cube_count(); ++id)
            if (id != placement.destination_cube) all.push_back(id);
        b.collective(StageKind::ProjO, "reduce to destination", CollectiveOp::Reduce,
                     {all}, double(B) * model.d_model * bpe, CollectiveScope::Global);
    }
    return b.s;
}

inline Schedule plan(StrategyKind strategy, const ModelConfig& model,
                     const WorkloadPoint& point, const MeshTopology& topo = {},
                     int destination = 0) {
    const Placement p = make_placement(model, point, strategy, topo, destination);
    switch (strategy) {
        case StrategyKind::TP16:  return plan_tp16(model, point, p);
        case StrategyKind::HP:    return plan_hp(model, point, p);
        case StrategyKind::HP_RO: return plan_hp_ro(model, point, p);
    }
    throw std::logic_error("plan: bad strategy");
}

// ---------------------------------------------------------------------------
// Schedule introspection
// ---------------------------------------------------------------------------

// Total bytes injected into the fabric by one collective (standard ring/tree
// volumes), summed over concurrent instances.
inline double collective_injected_bytes(const CollectiveDesc& c) {
    double total = 0;
    for (const auto& g : c.groups) {
        const double n = (double)g.size();
        if (n <= 1) continue;
        switch (c.op) {
            case CollectiveOp::AllGather:     total += n * (n - 1) * c.bytes_per_cube; break;
            case CollectiveOp::ReduceScatter: total += (n - 1) * c.bytes_per_cube; break;
            case CollectiveOp::AllReduce:     total += 2 * (n - 1) * c.bytes_per_cube; break;
            case CollectiveOp::Reduce:
            case CollectiveOp::Broadcast:     total += (n - 1) * c.bytes_per_cube; break;
        }
    }
    return total;
}

inline double schedule_collective_bytes(const Schedule& s) {
    double total = 0;
    for (const auto& e : s.events)
        if (e.kind == EventKind::Collective) total += collective_injected_bytes(e.coll);
    return total;
}

inline double schedule_compute_flops_per_cube(const Schedule& s) {
    double total = 0;
    for (const auto& e : s.events)
        if (e.kind == EventKind::Compute)
            for (const auto& g : e.compute.gemms) total += g.flops();
    return total;
}

inline void validate_schedule(const Schedule& s) {
    for (const auto& e : s.events) {
        for (int d : e.deps)
            if (d >= e.id) throw std::logic_error("schedule: forward dependency (cycle)");
        if (e.kind == EventKind::Collective) {
            for (const auto& g : e.coll.groups) {
                detail::check_group(g, s.placement.topo);
                if (e.coll.scope == CollectiveScope::IntraGroup &&
                    !is_connected(g, s.placement.topo))
                    throw std::logic_error("schedule: disconnected intra-group collective");
            }
        }
    }
    // Weight slices must partition each matrix and shards the sequence.
    const auto& p = s.placement;
    for (size_t m = 0; m < p.groups.size(); ++m) {
        long long covered = 0;
        for (int id : p.groups[m]) covered += p.kv_shards[id].len();
        if (s.point.seq_len > 0 && covered != s.point.seq_len)
            throw std::logic_error("schedule: KV shards do not cover the sequence");
    }
}

inline std::string schedule_trace(const Schedule& s) {
    std::ostringstream os;
    for (const auto& e : s.events) {
        os << "e" << e.id << " stage=" << to_string(e.stage);
        if (e.kind == EventKind::Compute) {
            os << " compute \"" << e.label << "\" gemms=" << e.compute.gemms.size();
            if (!e.compute.gemms.empty()) {
                const auto& g = e.compute.gemms.front();
                os << " m=" << g.m << " k=" << g.k << " n=" << g.n;
            }
            os << " hbm_bytes=" << (long long)e.compute.hbm_bytes;
        } else if (e.kind == EventKind::Collective) {
            os << " collective \"" << e.label << "\" op=" << to_string(e.coll.op)
               << " scope=" << to_string(e.coll.scope)
               << " instances=" << e.coll.groups.size()
               << " group_size=" << (e.coll.groups.empty() ? 0 : e.coll.groups[0].size())
               << " bytes_per_cube=" << (long long)e.coll.bytes_per_cube;
        } else {
            os << " barrier \"" << e.label << "\"";
        }
        os << " deps=[";
        for (size_t i = 0; i < e.deps.size(); ++i) os << (i ? "," : "") << e.deps[i];
        os << "]\n";
    }
    return os.str();
}

}  // namespace cubesim

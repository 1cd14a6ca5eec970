#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cubesim {

// ---------------------------------------------------------------------------
// Intra-package fabric: 2D cube mesh, XY-routed D2D links, and collective
// cost/volume models (unidirectional ring for the all-to-all style ops,
// binomial tree for rooted ones).
// ---------------------------------------------------------------------------

struct MeshTopology {
    int rows = 4;
    int cols = 4;

    int cube_count() const { return rows * cols; }
    bool valid(int id) const { return id >= 0 && id < cube_count(); }
    int row(int id) const { return id / cols; }
    int col(int id) const { return id % cols; }
    int id(int r, int c) const { return r * cols + c; }

    void validate() const {
        if (rows < 1 || cols < 1) throw std::invalid_argument("MeshTopology: empty mesh");
    }
};

struct LinkSpec {
    double bw_per_dir = 1.5e12;    // B/s, each direction of a D2D link
    double hop_latency_s = 15e-9;

    void validate() const {
        if (bw_per_dir <= 0 || hop_latency_s < 0)
            throw std::invalid_argument("LinkSpec: invalid link parameters");
    }
};

inline int hop_count(int a, int b, const MeshTopology& topo) {
    topo.validate();
    if (!topo.valid(a) || !topo.valid(b))
        throw std::invalid_argument("hop_count: unknown cube id");
    return std::abs(topo.row(a) - topo.row(b)) + std::abs(topo.col(a) - topo.col(b));
}

// Cut-through point-to-point transfer: per-hop latency plus serialization
// paid once.
inline double transfer_time(double bytes, int hops, const LinkSpec& link) {
    link.validate();
    if (bytes < 0 || hops < 0) throw std::invalid_argument("transfer_time: negative input");
    return double(hops) * link.hop_latency_s + bytes / link.bw_per_dir;
}

enum class CollectiveOp { AllGather, ReduceScatter, AllReduce, Reduce, Broadcast };

inline const char* to_string(CollectiveOp op) {
    switch (op) {
        case CollectiveOp::AllGather:     return "all_gather";
        case CollectiveOp::ReduceScatter: return "reduce_scatter";
        case CollectiveOp::AllReduce:     return "all_reduce";
        case CollectiveOp::Reduce:        return "reduce";
        case CollectiveOp::Broadcast:     return "broadcast";
    }
    return "?";
}

struct Message {
    int src = 0;
    int dst = 0;
    double bytes = 0;
};

struct CollectiveStep {
    std::vector<Message> messages;
};

struct CollectiveCost {
    double time_s = 0;
    double bytes_on_wire = 0;           // sum over messages of bytes * hops
    double injected_bytes_per_cube = 0; // sum of sent bytes / group size
    int max_hops = 0;
    std::vector<CollectiveStep> steps;
};

namespace detail {

// Directed unit links of the XY route from a to b (column first, then row).
inline void xy_links(int a, int b, const MeshTopology& topo,
                     std::vector<std::pair<int, int>>& out) {
    int r = topo.row(a), c = topo.col(a);
    const int tr = topo.row(b), tc = topo.col(b);
    while (c != tc) {
        const int nc = c + (tc > c ? 1 : -1);
        out.emplace_back(topo.id(r, c), topo.id(r, nc));
        c = nc;
    }
    while (r != tr) {
        const int nr = r + (tr > r ? 1 : -1);
        out.emplace_back(topo.id(r, c), topo.id(nr, c));
        r = nr;
    }
}

// Serialized-link step time: messages sharing a directed link queue up on
// it; each message completes after its per-hop latency plus the worst queue
// along its path.
inline double step_time(const CollectiveStep& step, const MeshTopology& topo,
                        const LinkSpec& link, int* max_hops_out = nullptr) {
    std::map<std::pair<int, int>, double> load;
    std::vector<std::vector<std::pair<int, int>>> paths(step.messages.size());
    for (size_t i = 0; i < step.messages.size(); ++i) {
        const auto& m = step.messages[i];
        xy_links(m.src, m.dst, topo, paths[i]);
        for (const auto& l : paths[i]) load[l] += m.bytes;
    }
    double t = 0;
    for (size_t i = 0; i < step.messages.size(); ++i) {
        const int hops = (int)paths[i].size();
        if (max_hops_out) *max_hops_out = std::max(*max_hops_out, hops);
        double bottleneck = 0;
        for (const auto& l : paths[i]) bottleneck = std::max(bottleneck, load[l]);
        t = std::max(t, double(hops) * link.hop_latency_s + bottleneck / link.bw_per_dir);
    }
    return t;
}

inline void check_group(const std::vector<int>& group, const MeshTopology& topo) {
    if (group.empty()) throw std::invalid_argument("collective: empty group");
    std::vector<int> g = group;
    std::sort(g.begin(), g.end());
    if (std::adjacent_find(g.begin(), g.end()) != g.end())
        throw std::invalid_argument("collective: duplicate cube id in group");
    for (int id : group)
        if (!topo.valid(id)) throw std::invalid_argument("collective: unknown cube id");
}

// Hamiltonian cycle through a full r x c block with unit hops: down column 0,
// snaking back up through the remaining columns. Needs an even side.
inline std::vector<int> block_cycle(int r0, int c0, int R, int C, const MeshTopology& topo,
                                    bool transposed) {
    std::vector<int> order;
    auto push = [&](int r, int c) {
        order.push_back(transposed ? topo.id(c0 + c, r0 + r) : topo.id(r0 + r, c0 + c));
    };
    push(0, 0);
    for (int r = 0; r < R; ++r) {
        if (r % 2 == 0)
            for (int c = 1; c < C; ++c) push(r, c);
        else
            for (int c = C - 1; c >= 1; --c) push(r, c);
    }
    for (int r = R - 1; r >= 1; --r) push(r, 0);
    return order;
}

inline int cycle_max_hop(const std::vector<int>& order, const MeshTopology& topo) {
    int mh = 0;
    for (size_t i = 0; i < order.size(); ++i)
        mh = std::max(mh, hop_count(order[i], order[(i + 1) % order.size()], topo));
    return mh;
}

inline long long cycle_total_hops(const std::vector<int>& order, const MeshTopology& topo) {
    long long s = 0;
    for (size_t i = 0; i < order.size(); ++i)
        s += hop_count(order[i], order[(i + 1) % order.size()], topo);
    return s;
}

// Embed the group on a ring, preferring neighbor-adjacent cycles. Full
// rectangular sub-meshes with an even side get the exact unit-hop cycle;
// small irregular groups are solved by enumeration; anything larger falls
// back to boustrophedon order.
inline std::vector<int> ring_order(std::vector<int> group, const MeshTopology& topo) {
    std::sort(group.begin(), group.end());
    const size_t g = group.size();
    if (g <= 2) return group;

    int minr = topo.rows, maxr = -1, minc = topo.cols, maxc = -1;
    for (int id : group) {
        minr = std::min(minr, topo.row(id));
        maxr = std::max(maxr, topo.row(id));
        minc = std::min(minc, topo.col(id));
        maxc = std::max(maxc, topo.col(id));
    }
    const int R = maxr - minr + 1, C = maxc - minc + 1;
    if ((size_t)R * C == g) {
        if (R % 2 == 0 && C >= 2) return block_cycle(minr, minc, R, C, topo, false);
        if (C % 2 == 0 && R >= 2) return block_cycle(minc, minr, C, R, topo, true);
    }
    if (g <= 8) {
        std::vector<int> rest(group.begin() + 1, group.end());
        std::sort(rest.begin(), rest.end());
        std::vector<int> best;
        int best_mh = 1 << 20;
        long long best_th = 1LL << 40;
        do {
            std::vector<int> cand;
            cand.push_back(group[0]);
            cand.insert(cand.end(), rest.begin(), rest.end());
            const int mh = cycle_max_hop(cand, topo);
            const long long th = cycle_total_hops(cand, topo);
            if (mh < best_mh || (mh == best_mh && th < best_th)) {
                best = cand;
                best_mh = mh;
                best_th = th;
            }
        } while (std::next_permutation(rest.begin(), rest.end()));
        return best;
    }
    std::sort(group.begin(), group.end(), [&](int a, int b) {
        const int ra = topo.row(a), rb = topo.row(b);
        if (ra != rb) return ra < rb;
        const int ca = topo.col(a), cb = topo.col(b);
        return (ra % 2 == 0) ? ca < cb : ca > cb;
    });
    return group;
}

// Tree ranks for rooted ops: root first, then by distance so that binomial
// partners tend to be mesh neighbors.
inline std::vector<int> tree_order(const std::vector<int>& group, int root,
                                   const MeshTopology& topo) {
    std::vector<int> order = group;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const int da = hop_count(root, a, topo), db = hop_count(root, b, topo);
        if (da != db) return da < db;
        return a < b;
    });
    return order;
}

}  // namespace detail

// Step schedule and cost of one collective over a cube group. Ring neighbors
// and tree partners may be several hops apart (XY-routed through non-member
// cubes); within one collective no two concurrent messages share a directed
// link without queueing. For Reduce the root is group.front(); for Broadcast
// the source is group.front().
inline CollectiveCost collective_cost(CollectiveOp op, const std::vector<int>& group,
                                      double bytes_per_cube, const MeshTopology& topo,
                                      const LinkSpec& link) {
    topo.validate();
    link.validate();
    detail::check_group(group, topo);
    if (bytes_per_cube < 0) throw std::invalid_argument("collective: negative payload");

    CollectiveCost cost;
    const size_t g = group.size();
    if (g == 1 || bytes_per_cube == 0) return cost;

    if (op == CollectiveOp::AllGather || op == CollectiveOp::ReduceScatter ||
        op == CollectiveOp::AllReduce) {
        const std::vector<int> ring = detail::ring_order(group, topo);
        // AllGather circulates per-cube slices; ReduceScatter/AllReduce chunk
        // the full per-cube payload into g pieces.
        const double chunk =
            (op == CollectiveOp::AllGather) ? bytes_per_cube : bytes_per_cube / double(g);
        const size_t n_steps = (op == CollectiveOp::AllReduce) ? 2 * (g - 1) : (g - 1);
        for (size_t s = 0; s < n_steps; ++s) {
            CollectiveStep step;
            for (size_t i = 0; i < g; ++i)
                step.messages.push_back({ring[i], ring[(i + 1) % g], chunk});
            cost.steps.push_back(std::move(step));
        }
    } else {
        // Rooted ops: binomial tree over distance-sorted ranks, full payload
        // per edge.
        const std::vector<int> order = detail::tree_order(group, group.front(), topo);
        int rounds = 0;
        while ((1u << rounds) < g) ++rounds;
        for (int r = 0; r < rounds; ++r) {
            CollectiveStep step;
            // pair rank x with rank x - 2^r for ranks x = 2^r (mod 2^{r+1})
            for (size_t x = (1u << r); x < g; x += (2u << r)) {
                const int a = order[x];
                const int b = order[x - (1u << r)];
                if (op == CollectiveOp::Reduce)
                    step.messages.push_back({a, b, bytes_per_cube});
                else
                    step.messages.push_back({b, a, bytes_per_cube});
            }
            cost.steps.push_back(std::move(step));
        }
        if (op == CollectiveOp::Broadcast) std::reverse(cost.steps.begin(), cost.steps.end());
    }

    double injected = 0;
    for (const auto& step : cost.steps) {
        cost.time_s += detail::step_time(step, topo, link, &cost.max_hops);
        for (const auto& m : step.messages) {
            injected += m.bytes;
            cost.bytes_on_wire += m.bytes * hop_count(m.src, m.dst, topo);
        }
    }
    cost.injected_bytes_per_cube = injected / double(g);
    return cost;
}

// Several same-op collectives running concurrently on (usually disjoint)
// groups: steps advance in lockstep and messages of the same step contend
// for shared directed links.
inline CollectiveCost parallel_collective_cost(CollectiveOp op,
                                               const std::vector<std::vector<int>>& groups,
                                               double bytes_per_cube,
                                               const MeshTopology& topo,
                                               const LinkSpec& link) {
    CollectiveCost merged;
    size_t max_steps = 0;
    std::vector<CollectiveCost> parts;
    for (const auto& g : groups) {
        parts.push_back(collective_cost(op, g, bytes_per_cube, topo, link));
        max_steps = std::max(max_steps, parts.back().steps.size());
    }
    for (size_t s = 0; s < max_steps; ++s) {
        CollectiveStep step;
        for (const auto& p : parts)
            if (s < p.steps.size())
                step.messages.insert(step.messages.end(), p.steps[s].messages.begin(),
                                     p.steps[s].messages.end());
        merged.time_s += detail::step_time(step, topo, link, &merged.max_hops);
        merged.steps.push_back(std::move(step));
    }
    double injected = 0;
    size_t cubes = 0;
    for (const auto& p : parts) {
        merged.bytes_on_wire += p.bytes_on_wire;
    }
    for (const auto& g : groups) cubes += g.size();
    for (const auto& step : merged.steps)
        for (const auto& m : step.messages) injected += m.bytes;
    merged.injected_bytes_per_cube = cubes ? injected / double(cubes) : 0;
    return merged;
}

// Induced-subgraph connectivity; intra-group placements must satisfy this.
inline bool is_connected(const std::vector<int>& group, const MeshTopology& topo) {
    if (group.empty()) return false;
    detail::check_group(group, topo);
    std::vector<int> stack{group[0]};
    std::vector<bool> seen(topo.cube_count(), false);
    std::vector<bool> member(topo.cube_count(), false);
    for (int id : group) member[id] = true;
    seen[group[0]] = true;
    size_t count = 1;
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int r = topo.row(cur), c = topo.col(cur);
        const int dr[] = {0, 0, 1, -1}, dc[] = {1, -1, 0, 0};
        for (int d = 0; d < 4; ++d) {
            const int nr = r + dr[d], nc = c + dc[d];
            if (nr < 0 || nr >= topo.rows || nc < 0 || nc >= topo.cols) continue;
            const int nid = topo.id(nr, nc);
            if (member[nid] && !seen[nid]) {
                seen[nid] = true;
                ++count;
                stack.push_back(nid);
            }
        }
    }
    return count == group.size();
}

}  // namespace cubesim

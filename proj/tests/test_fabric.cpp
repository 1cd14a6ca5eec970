#include <doctest.h>

#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "cubesim/fabric.hpp"

using namespace cubesim;

namespace {

// Independent data-level simulator: runs the collective semantics on real
// values over an abstract ring / tree, checks the result, and counts every
// byte a node sends. Completely separate from the fabric implementation.
struct CollectiveSim {
    int n;
    double bytes_per_node;  // V: full payload each node contributes (slice for AG)

    double sent = 0;  // total bytes sent by all nodes

    double run(CollectiveOp op) {
        sent = 0;
        if (op == CollectiveOp::AllGather) {
            std::vector<std::set<int>> have(n);
            std::vector<int> moving(n);
            for (int i = 0; i < n; ++i) {
                have[i].insert(i);
                moving[i] = i;
            }
            for (int s = 0; s < n - 1; ++s) {
                std::vector<int> recv(n, -1);
                for (int i = 0; i < n; ++i) {
                    recv[(i + 1) % n] = moving[i];
                    sent += bytes_per_node;
                }
                for (int i = 0; i < n; ++i) {
                    have[i].insert(recv[i]);
                    moving[i] = recv[i];
                }
            }
            for (const auto& h : have) REQUIRE((int)h.size() == n);  // all slices present
        } else if (op == CollectiveOp::ReduceScatter || op == CollectiveOp::AllReduce) {
            // n chunks of V/n; chunk walks the ring accumulating each node's
            // contribution.
            auto contrib = [&](int node, int chunk) { return 100.0 * (node + 1) + chunk; };
            std::vector<int> chunk_at(n);
            std::vector<double> acc(n);
            for (int i = 0; i < n; ++i) {
                chunk_at[i] = i;
                acc[i] = contrib(i, i);
            }
            for (int s = 0; s < n - 1; ++s) {
                std::vector<int> nc(n);
                std::vector<double> na(n);
                for (int i = 0; i < n; ++i) {
                    const int dst = (i + 1) % n;
                    nc[dst] = chunk_at[i];
                    na[dst] = acc[i] + contrib(dst, chunk_at[i]);
                    sent += bytes_per_node / n;
                }
                chunk_at = nc;
                acc = na;
            }
            for (int i = 0; i < n; ++i) {
                double want = 0;
                for (int j = 0; j < n; ++j) want += contrib(j, chunk_at[i]);
                REQUIRE(acc[i] == doctest::Approx(want));  // chunk fully reduced
            }
            if (op == CollectiveOp::AllReduce)  // gather phase circulates chunks
                sent += double(n) * (n - 1) * (bytes_per_node / n);
        } else {
            // Binomial tree reduce toward rank 0 (broadcast is its mirror).
            std::vector<double> v(n);
            for (int i = 0; i < n; ++i) v[i] = i + 1;
            for (int r = 0; (1 << r) < n; ++r)
                for (int x = 1 << r; x < n; x += 2 << r) {
                    v[x - (1 << r)] += v[x];
                    sent += bytes_per_node;
                }
            CHECK(v[0] == doctest::Approx(double(n) * (n + 1) / 2));
        }
        return sent / n;  // bytes per node
    }
};

std::vector<int> quad22() { return {0, 1, 4, 5}; }  // top-left 2x2 on a 4x4

}  // namespace

TEST_CASE("hop count") {
    const MeshTopology topo;
    CHECK(hop_count(5, 5, topo) == 0);
    CHECK(hop_count(topo.id(0, 0), topo.id(3, 3), topo) == 6);  // mesh diameter
    const auto q = quad22();
    for (size_t i = 0; i < q.size(); ++i)
        for (size_t j = i + 1; j < q.size(); ++j) CHECK(hop_count(q[i], q[j], topo) <= 2);
    CHECK_THROWS_AS(hop_count(0, 99, topo), std::invalid_argument);
}

TEST_CASE("transfer time") {
    const LinkSpec link;
    CHECK(transfer_time(8, 1, link) == doctest::Approx(15e-9 + 8 / 1.5e12));
    CHECK(transfer_time(0, 3, link) == doctest::Approx(3 * 15e-9));
    // Doubling bytes adds exactly bytes / bw.
    for (double b : {64.0, 4096.0, 1e6})
        CHECK(transfer_time(2 * b, 2, link) - transfer_time(b, 2, link) ==
              doctest::Approx(b / link.bw_per_dir));
}

TEST_CASE("collective volumes match the ring formulas and the data oracle") {
    const MeshTopology topo;
    const LinkSpec link;
    const double V = 1 << 20;

    const std::vector<int> quad = quad22();
    for (int gsz : {2, 3, 4}) {
        std::vector<int> group(quad.begin(), quad.begin() + gsz);
        CollectiveSim sim{gsz, V};
        const double ag = collective_cost(CollectiveOp::AllGather, group, V, topo, link)
                              .injected_bytes_per_cube;
        CHECK(ag == doctest::Approx(double(gsz - 1) * V));
        CHECK(ag == doctest::Approx(sim.run(CollectiveOp::AllGather)));

        const double rs = collective_cost(CollectiveOp::ReduceScatter, group, V, topo, link)
                              .injected_bytes_per_cube;
        CHECK(rs == doctest::Approx((gsz - 1) / double(gsz) * V));
        CHECK(rs == doctest::Approx(sim.run(CollectiveOp::ReduceScatter)));

        const double ar = collective_cost(CollectiveOp::AllReduce, group, V, topo, link)
                              .injected_bytes_per_cube;
        CHECK(ar == doctest::Approx(2.0 * (gsz - 1) / double(gsz) * V));
        CHECK(ar == doctest::Approx(sim.run(CollectiveOp::AllReduce)));

        const double red = collective_cost(CollectiveOp::Reduce, group, V, topo, link)
                               .injected_bytes_per_cube;
        CHECK(red == doctest::Approx((gsz - 1) / double(gsz) * V));
        CHECK(red == doctest::Approx(sim.run(CollectiveOp::Reduce)));
    }
}

TEST_CASE("allreduce over a quadrant vs reduce: half the traffic") {
    const MeshTopology topo;
    const LinkSpec link;
    const double V = 4 << 20;
    const auto ar = collective_cost(CollectiveOp::AllReduce, quad22(), V, topo, link);
    const auto red = collective_cost(CollectiveOp::Reduce, quad22(), V, topo, link);
    CHECK(ar.injected_bytes_per_cube == doctest::Approx(2.0 * 0.75 * V));
    CHECK(red.injected_bytes_per_cube == doctest::Approx(0.5 * ar.injected_bytes_per_cube));
    const double ratio = red.bytes_on_wire / ar.bytes_on_wire;
    CHECK(ratio >= 0.45);
    CHECK(ratio <= 0.55);
    CHECK(red.bytes_on_wire <= ar.bytes_on_wire);
}

TEST_CASE("16-cube all-gather accounting") {
    const MeshTopology topo;
    const LinkSpec link;
    std::vector<int> all(16);
    std::iota(all.begin(), all.end(), 0);
    const double s = 4096;
    const auto c = collective_cost(CollectiveOp::AllGather, all, s, topo, link);
    // Every cube injects 15 slices; the unit-hop ring puts the same on wire.
    CHECK(c.injected_bytes_per_cube == doctest::Approx(15.0 * s));
    CHECK(c.injected_bytes_per_cube * 16 == doctest::Approx(15.0 * 16.0 * s));
    CHECK(c.bytes_on_wire == doctest::Approx(15.0 * 16.0 * s));
    CHECK(c.max_hops == 1);  // 4x4 admits an all-adjacent cycle
}

TEST_CASE("trivial groups") {
    const MeshTopology topo;
    const LinkSpec link;
    for (auto op : {CollectiveOp::AllGather, CollectiveOp::AllReduce, CollectiveOp::Reduce,
                    CollectiveOp::Broadcast, CollectiveOp::ReduceScatter}) {
        const auto c = collective_cost(op, {3}, 1e6, topo, link);
        CHECK(c.time_s == 0);
        CHECK(c.bytes_on_wire == 0);
    }
    CHECK_THROWS_AS(collective_cost(CollectiveOp::Reduce, {}, 1, topo, link),
                    std::invalid_argument);
    CHECK_THROWS_AS(collective_cost(CollectiveOp::Reduce, {0, 0}, 1, topo, link),
                    std::invalid_argument);
    CHECK_THROWS_AS(collective_cost(CollectiveOp::Reduce, {0, 42}, 1, topo, link),
                    std::invalid_argument);
}

TEST_CASE("cost is monotone in payload and diameter") {
    const MeshTopology topo;
    const LinkSpec link;
    const std::vector<int> near = quad22();
    const std::vector<int> far = {0, 3, 12, 15};  // corners
    double prev = 0;
    for (double v : {1e3, 1e4, 1e5, 1e6}) {
        const double t = collective_cost(CollectiveOp::AllReduce, near, v, topo, link).time_s;
        CHECK(t > prev);
        prev = t;
        CHECK(collective_cost(CollectiveOp::AllReduce, far, v, topo, link).time_s >= t);
    }
}

TEST_CASE("quadrant embedding beats the strip") {
    const MeshTopology topo;
    const LinkSpec link;
    const auto quad = collective_cost(CollectiveOp::AllGather, quad22(), 1e6, topo, link);
    const auto strip =
        collective_cost(CollectiveOp::AllGather, {0, 1, 2, 3}, 1e6, topo, link);
    CHECK(quad.max_hops == 1);  // ring neighbors adjacent
    CHECK(strip.max_hops > quad.max_hops);
}

TEST_CASE("parallel disjoint collectives do not interfere") {
    const MeshTopology topo;
    const LinkSpec link;
    const std::vector<std::vector<int>> quads = {
        {0, 1, 4, 5}, {2, 3, 6, 7}, {8, 9, 12, 13}, {10, 11, 14, 15}};
    const auto one = collective_cost(CollectiveOp::AllReduce, quads[0], 1e6, topo, link);
    const auto four = parallel_collective_cost(CollectiveOp::AllReduce, quads, 1e6, topo, link);
    CHECK(four.time_s == doctest::Approx(one.time_s));
    CHECK(four.bytes_on_wire == doctest::Approx(4 * one.bytes_on_wire));

    // Overlapping paths serialize: same-position rings share row links.
    const std::vector<std::vector<int>> pos = {
        {0, 2, 8, 10}, {1, 3, 9, 11}, {4, 6, 12, 14}, {5, 7, 13, 15}};
    const auto pone = collective_cost(CollectiveOp::AllReduce, pos[0], 1e6, topo, link);
    const auto pfour = parallel_collective_cost(CollectiveOp::AllReduce, pos, 1e6, topo, link);
    CHECK(pfour.time_s >= pone.time_s);
}

TEST_CASE("connectivity helper") {
    const MeshTopology topo;
    CHECK(is_connected(quad22(), topo));
    CHECK(is_connected({0, 1, 2, 3}, topo));
    CHECK_FALSE(is_connected({0, 2}, topo));
    CHECK_FALSE(is_connected({0, 5}, topo));  // diagonal
}

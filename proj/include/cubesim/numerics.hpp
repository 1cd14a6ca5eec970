#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cubesim/mapper.hpp"
#include "cubesim/matrix.hpp"

namespace cubesim {

// ---------------------------------------------------------------------------
// Exact-shape correctness checks for the distributed softmax flows: sharded
// attention with (m, l) statistics, the weighted merge, the project-then-
// reduce commute, and an end-to-end replay of each strategy's data movement.
// All arithmetic is double precision.
// ---------------------------------------------------------------------------

// Partial attention output of one KV shard: a holds the locally normalized
// softmax output, m/l the per-row max score and exp-sum needed to merge.
// The neutral element (m=-inf, l=0, a=0) stands for an empty shard.
struct ShardStats {
    Matrix a;               // rows x d_v
    std::vector<double> m;  // per-row local max score
    std::vector<double> l;  // per-row exp-sum

    static ShardStats neutral(long long rows, long long cols) {
        ShardStats s;
        s.a = Matrix(rows, cols);
        s.m.assign((size_t)rows, -std::numeric_limits<double>::infinity());
        s.l.assign((size_t)rows, 0.0);
        return s;
    }
};

// softmax(Q Kᵀ * scale) V with per-row max subtraction.
inline Matrix exact_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                              double scale) {
    if (q.cols != k.cols || k.rows != v.rows)
        throw std::invalid_argument("exact_attention: shape mismatch");
    const long long R = q.rows, S = k.rows, D = v.cols;
    Matrix out(R, D);
    for (long long i = 0; i < R; ++i) {
        std::vector<double> s((size_t)S);
        double mx = -std::numeric_limits<double>::infinity();
        for (long long j = 0; j < S; ++j) {
            double dot = 0;
            for (long long d = 0; d < q.cols; ++d) dot += q(i, d) * k(j, d);
            s[(size_t)j] = dot * scale;
            mx = std::max(mx, s[(size_t)j]);
        }
        double denom = 0;
        for (long long j = 0; j < S; ++j) {
            s[(size_t)j] = std::exp(s[(size_t)j] - mx);
            denom += s[(size_t)j];
        }
        for (long long j = 0; j < S; ++j)
            for (long long d = 0; d < D; ++d) out(i, d) += s[(size_t)j] * v(j, d);
        for (long long d = 0; d < D; ++d) out(i, d) /= denom;
    }
    return out;
}

// Local shard pass: stable softmax over the shard's keys only, returning the
// normalized shard output together with (m, l). An empty shard yields the
// neutral element.
inline ShardStats shard_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                  double scale) {
    if (k.rows == 0) return ShardStats::neutral(q.rows, v.cols > 0 ? v.cols : q.cols);
    if (q.cols != k.cols || k.rows != v.rows)
        throw std::invalid_argument("shard_attention: shape mismatch");
    const long long R = q.rows, S = k.rows, D = v.cols;
    ShardStats st;
    st.a = Matrix(R, D);
    st.m.resize((size_t)R);
    st.l.resize((size_t)R);
    for (long long i = 0; i < R; ++i) {
        std::vector<double> s((size_t)S);
        double mx = -std::numeric_limits<double>::infinity();
        for (long long j = 0; j < S; ++j) {
            double dot = 0;
            for (long long d = 0; d < q.cols; ++d) dot += q(i, d) * k(j, d);
            s[(size_t)j] = dot * scale;
            mx = std::max(mx, s[(size_t)j]);
        }
        double denom = 0;
        for (long long j = 0; j < S; ++j) {
            s[(size_t)j] = std::exp(s[(size_t)j] - mx);
            denom += s[(size_t)j];
        }
        for (long long j = 0; j < S; ++j)
            for (long long d = 0; d < D; ++d) st.a(i, d) += s[(size_t)j] * v(j, d);
        for (long long d = 0; d < D; ++d) st.a(i, d) /= denom;
        st.m[(size_t)i] = mx;
        st.l[(size_t)i] = denom;
    }
    return st;
}

// Per-row merge weights: alpha_n = e^{m_n - m} l_n / l with m = max_n m_n and
// l = sum_n e^{m_n - m} l_n. The e^{-inf} = 0 convention absorbs neutral
// shards.
inline std::vector<std::vector<double>> merge_weights(const std::vector<ShardStats>& stats) {
    if (stats.empty()) throw std::invalid_argument("merge: no shards");
    const long long R = stats[0].a.rows;
    std::vector<std::vector<double>> alpha(stats.size(),
                                           std::vector<double>((size_t)R, 0.0));
    for (long long i = 0; i < R; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& s : stats) m = std::max(m, s.m[(size_t)i]);
        if (m == -std::numeric_limits<double>::infinity())
            throw std::invalid_argument("merge: all shards neutral");
        double l = 0;
        for (const auto& s : stats) {
            const double e = s.l[(size_t)i] == 0 ? 0 : std::exp(s.m[(size_t)i] - m);
            l += e * s.l[(size_t)i];
        }
        for (size_t n = 0; n < stats.size(); ++n) {
            const double e =
                stats[n].l[(size_t)i] == 0 ? 0 : std::exp(stats[n].m[(size_t)i] - m);
            alpha[n][(size_t)i] = e * stats[n].l[(size_t)i] / l;
        }
    }
    return alpha;
}

// Recover the global attention output: sum_n alpha_n a_n.
inline Matrix merge_shards(const std::vector<ShardStats>& stats) {
    const auto alpha = merge_weights(stats);
    const long long R = stats[0].a.rows, D = stats[0].a.cols;
    Matrix out(R, D);
    for (size_t n = 0; n < stats.size(); ++n) {
        if (stats[n].a.rows != R || stats[n].a.cols != D)
            throw std::invalid_argument("merge: shard shape mismatch");
        for (long long i = 0; i < R; ++i)
            for (long long d = 0; d < D; ++d) out(i, d) += alpha[n][(size_t)i] * stats[n].a(i, d);
    }
    return out;
}

// Two-way merge, the fold step of the online combine. Identity on either
// side is the neutral element.
inline ShardStats merge_two(const ShardStats& x, const ShardStats& y) {
    if (x.a.rows != y.a.rows || x.a.cols != y.a.cols)
        throw std::invalid_argument("merge_two: shape mismatch");
    ShardStats out;
    out.a = Matrix(x.a.rows, x.a.cols);
    out.m.resize(x.m.size());
    out.l.resize(x.l.size());
    for (long long i = 0; i < x.a.rows; ++i) {
        const double m = std::max(x.m[(size_t)i], y.m[(size_t)i]);
        if (m == -std::numeric_limits<double>::infinity()) {
            out.m[(size_t)i] = m;
            out.l[(size_t)i] = 0;
            continue;
        }
        const double ex = x.l[(size_t)i] == 0 ? 0 : std::exp(x.m[(size_t)i] - m);
        const double ey = y.l[(size_t)i] == 0 ? 0 : std::exp(y.m[(size_t)i] - m);
        const double l = ex * x.l[(size_t)i] + ey * y.l[(size_t)i];
        for (long long d = 0; d < x.a.cols; ++d)
            out.a(i, d) = (ex * x.l[(size_t)i] * x.a(i, d) + ey * y.l[(size_t)i] * y.a(i, d)) / l;
        out.m[(size_t)i] = m;
        out.l[(size_t)i] = l;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output-projection slicing
// ---------------------------------------------------------------------------

// W_O sliced two ways for one cube group block: yx keeps full input rows and
// splits output columns; yy splits input rows and keeps full output columns.
struct ProjectionSlices {
    Matrix w_o_full;  // (H_Q * d_h) x D_m
    int groups = 1;
    int group_size = 1;

    long long feat_per_group() const { return w_o_full.rows / groups; }

    Matrix yx(int m, int j) const {
        const long long f = feat_per_group();
        const auto cb = detail::balanced_bounds(w_o_full.cols, group_size);
        return w_o_full.block(m * f, (m + 1) * f, cb[j], cb[j + 1]);
    }
    Matrix yy(int m, int j) const {
        const long long f = feat_per_group();
        const auto rb = detail::balanced_bounds(f, group_size);
        return w_o_full.block(m * f + rb[j], m * f + rb[j + 1], 0, w_o_full.cols);
    }

    void validate() const {
        if (groups < 1 || group_size < 1 || w_o_full.rows % groups != 0)
            throw std::invalid_argument("ProjectionSlices: bad slicing");
    }
};

// Project-then-reduce over scatter slices: each cube applies alpha-weighted
// shard slices to its y-slice of W_O and the partial full-width outputs sum.
// scatter_map gives each cube's feature column range; slices_yy[c] must hold
// exactly those W_O rows.
inline Matrix deferred_projection_reduce(const std::vector<ShardStats>& stats,
                                         const std::vector<Matrix>& slices_yy,
                                         const std::vector<SeqRange>& scatter_map) {
    if (slices_yy.size() != scatter_map.size())
        throw std::invalid_argument("deferred_projection_reduce: slice/map size mismatch");
    const auto alpha = merge_weights(stats);
    const long long R = stats[0].a.rows, F = stats[0].a.cols;
    long long covered = 0;
    for (size_t c = 0; c < scatter_map.size(); ++c) {
        if (scatter_map[c].begin != covered)
            throw std::invalid_argument("deferred_projection_reduce: misaligned scatter map");
        covered = scatter_map[c].end;
        if (slices_yy[c].rows != scatter_map[c].len())
            throw std::invalid_argument("deferred_projection_reduce: slice rows mismatch");
    }
    if (covered != F)
        throw std::invalid_argument("deferred_projection_reduce: scatter map does not cover");

    const long long Dm = slices_yy.empty() ? 0 : slices_yy[0].cols;
    Matrix out(R, Dm);
    for (size_t c = 0; c < slices_yy.size(); ++c) {
        const auto& range = scatter_map[c];
        Matrix merged_slice(R, range.len());
        for (size_t n = 0; n < stats.size(); ++n)
            for (long long i = 0; i < R; ++i)
                for (long long f = 0; f < range.len(); ++f)
                    merged_slice(i, f) += alpha[n][(size_t)i] * stats[n].a(i, range.begin + f);
        add_into(out, matmul(merged_slice, slices_yy[c]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end flow verification
// ---------------------------------------------------------------------------

struct VerifyReport {
    StrategyKind strategy = StrategyKind::HP_RO;
    std::uint64_t seed = 0;
    double max_rel_error = 0;
    long long batch = 0, seq_len = 0;
    int d_model = 0, q_heads = 0, kv_heads = 0, head_dim = 0;
};

namespace detail {

struct RequestTensors {
    Matrix q;                // H_Q x d_h
    std::vector<Matrix> k;   // per KV head, S x d_h
    std::vector<Matrix> vv;  // per KV head, S x d_h
};

inline Matrix random_matrix(std::mt19937_64& rng, long long r, long long c) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(r, c);
    for (auto& x : m.v) x = dist(rng);
    return m;
}

// Oracle: per-head exact attention concatenated, then the full W_O.
inline Matrix oracle_output(const ModelConfig& model, const RequestTensors& t,
                            const Matrix& w_o, double scale) {
    const long long G = model.group_size(), dh = model.head_dim;
    Matrix a_full(1, (long long)model.q_heads * dh);
    for (int h = 0; h < model.kv_heads; ++h) {
        const Matrix qh = t.q.block((long long)h * G, (long long)(h + 1) * G, 0, dh);
        const Matrix ah = exact_attention(qh, t.k[h], t.vv[h], scale);
        for (long long g = 0; g < G; ++g)
            for (long long d = 0; d < dh; ++d)
                a_full(0, ((long long)h * G + g) * dh + d) = ah(g, d);
    }
    return matmul(a_full, w_o);
}

}  // namespace detail

// Replay one strategy's data movement on real tensors and compare the
// destination cube's output against exact attention followed by the full
// W_O. Desk-scale only.
inline VerifyReport verify_flow(StrategyKind strategy, const ModelConfig& model,
                                const WorkloadPoint& point, std::uint64_t seed,
                                const MeshTopology& topo = {}) {
    model.validate();
    point.validate();
    if (point.seq_len < 1 || point.seq_len > 1024 || model.head_dim > 64)
        throw std::invalid_argument("verify_flow: desk-scale only (S <= 1024, d_h <= 64)");

    const Placement p = make_placement(model, point, strategy, topo);
    const double scale = 1.0 / std::sqrt(double(model.head_dim));
    const long long G = model.group_size(), dh = model.head_dim;
    const long long B = point.batch;
    const int cubes = topo.cube_count();

    std::mt19937_64 rng(seed);
    const Matrix w_o =
        detail::random_matrix(rng, (long long)model.q_heads * dh, model.d_model);
    std::vector<detail::RequestTensors> reqs((size_t)B);
    for (auto& t : reqs) {
        t.q = detail::random_matrix(rng, model.q_heads, dh);
        for (int h = 0; h < model.kv_heads; ++h) {
            t.k.push_back(detail::random_matrix(rng, point.seq_len, dh));
            t.vv.push_back(detail::random_matrix(rng, point.seq_len, dh));
        }
    }

    VerifyReport rep;
    rep.strategy = strategy;
    rep.seed = seed;
    rep.batch = B;
    rep.seq_len = point.seq_len;
    rep.d_model = model.d_model;
    rep.q_heads = model.q_heads;
    rep.kv_heads = model.kv_heads;
    rep.head_dim = model.head_dim;

    for (const auto& t : reqs) {
        const Matrix oracle = detail::oracle_output(model, t, w_o, scale);
        Matrix got(1, model.d_model);

        if (strategy == StrategyKind::TP16) {
            // Sequence-sharded cache; scores gathered, softmax everywhere,
            // partial weighted-value sums reduced, then row-parallel W_O.
            const auto sb = detail::balanced_bounds(point.seq_len, cubes);
            Matrix a_full(1, (long long)model.q_heads * dh);
            for (int h = 0; h < model.kv_heads; ++h) {
                const Matrix qh = t.q.block((long long)h * G, (long long)(h + 1) * G, 0, dh);
                // Gather per-cube score slices into the full row.
                Matrix scores(G, point.seq_len);
                for (int c = 0; c < cubes; ++c) {
                    const Matrix ks = t.k[h].block(sb[c], sb[c + 1], 0, dh);
                    for (long long g = 0; g < G; ++g)
                        for (long long j = 0; j < ks.rows; ++j) {
                            double dot = 0;
                            for (long long d = 0; d < dh; ++d) dot += qh(g, d) * ks(j, d);
                            scores(g, sb[c] + j) = dot * scale;
                        }
                }
                // Full-row softmax, identical on every cube.
                Matrix probs(G, point.seq_len);
                for (long long g = 0; g < G; ++g) {
                    double mx = -std::numeric_limits<double>::infinity();
                    for (long long j = 0; j < point.seq_len; ++j)
                        mx = std::max(mx, scores(g, j));
                    double denom = 0;
                    for (long long j = 0; j < point.seq_len; ++j) {
                        probs(g, j) = std::exp(scores(g, j) - mx);
                        denom += probs(g, j);
                    }
                    for (long long j = 0; j < point.seq_len; ++j) probs(g, j) /= denom;
                }
                // Partial A per cube over its V shard, reduced in cube order.
                Matrix ah(G, dh);
                for (int c = 0; c < cubes; ++c) {
                    const Matrix vs = t.vv[h].block(sb[c], sb[c + 1], 0, dh);
                    for (long long g = 0; g < G; ++g)
                        for (long long j = 0; j < vs.rows; ++j)
                            for (long long d = 0; d < dh; ++d)
                                ah(g, d) += probs(g, sb[c] + j) * vs(j, d);
                }
                for (long long g = 0; g < G; ++g)
                    for (long long d = 0; d < dh; ++d)
                        a_full(0, ((long long)h * G + g) * dh + d) = ah(g, d);
            }
            // Row-parallel output projection, partials reduced cube by cube.
            for (int c = 0; c < cubes; ++c) {
                for (const auto& ws : p.weight_slices[c]) {
                    if (ws.matrix != WeightSlice::Matrix::WO) continue;
                    const Matrix wb = w_o.block(ws.row_begin, ws.row_end, 0, model.d_model);
                    const Matrix ab = a_full.block(0, 1, ws.row_begin, ws.row_end);
                    add_into(got, matmul(ab, wb));
                }
            }
        } else {
            const int n_groups = (int)p.groups.size();
            const int gsz = p.group_size();
            const long long hg = p.heads_per_group;
            const long long feat = hg * G * dh;
            const auto sb = detail::balanced_bounds(point.seq_len, gsz);
            std::vector<Matrix> group_merged((size_t)n_groups);  // 1 x feat rows

            for (int m = 0; m < n_groups; ++m) {
                Matrix a_row(1, feat);
                for (long long hl = 0; hl < hg; ++hl) {
                    const int h = m * (int)hg + (int)hl;
                    const Matrix qh =
                        t.q.block((long long)h * G, (long long)(h + 1) * G, 0, dh);
                    std::vector<ShardStats> stats;
                    for (int j = 0; j < gsz; ++j) {
                        const Matrix ks = t.k[h].block(sb[j], sb[j + 1], 0, dh);
                        const Matrix vs = t.vv[h].block(sb[j], sb[j + 1], 0, dh);
                        stats.push_back(ks.rows == 0 ? ShardStats::neutral(G, dh)
                                                     : shard_attention(qh, ks, vs, scale));
                    }
                    const Matrix merged = merge_shards(stats);
                    for (long long g = 0; g < G; ++g)
                        for (long long d = 0; d < dh; ++d)
                            a_row(0, (hl * G + g) * dh + d) = merged(g, d);
                }
                group_merged[m] = std::move(a_row);
            }

            if (strategy == StrategyKind::HP) {
                // yx projection on the assembled group output, cross-group
                // reduce per output slice, then assemble.
                const auto ob = detail::balanced_bounds(model.d_model, gsz);
                for (int j = 0; j < gsz; ++j) {
                    Matrix slice_sum(1, ob[j + 1] - ob[j]);
                    for (int m = 0; m < n_groups; ++m) {
                        const Matrix wb = w_o.block((long long)m * feat,
                                                    (long long)(m + 1) * feat, ob[j],
                                                    ob[j + 1]);
                        add_into(slice_sum, matmul(group_merged[m], wb));
                    }
                    for (long long x = 0; x < slice_sum.cols; ++x)
                        got(0, ob[j] + x) = slice_sum(0, x);
                }
            } else {
                // HP_RO: scatter slice times the y-resliced weight on each
                // cube, one global reduce of full-width partials.
                const auto fb = detail::balanced_bounds(feat, gsz);
                for (int m = 0; m < n_groups; ++m)
                    for (int j = 0; j < gsz; ++j) {
                        const Matrix a_slice = group_merged[m].block(0, 1, fb[j], fb[j + 1]);
                        const Matrix wb =
                            w_o.block((long long)m * feat + fb[j],
                                      (long long)m * feat + fb[j + 1], 0, model.d_model);
                        add_into(got, matmul(a_slice, wb));
                    }
            }
        }
        rep.max_rel_error = std::max(rep.max_rel_error, max_rel_err(got, oracle));
    }
    return rep;
}

}  // namespace cubesim

#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <span>
#include <stdexcept>
#include <vector>

#include "cpgrec/graph.hpp"
#include "cpgrec/parallel.hpp"

namespace cpgrec {

// Row-major dense matrix of node embeddings.
struct EmbeddingTable {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    EmbeddingTable() = default;
    EmbeddingTable(std::size_t r, std::size_t d) : rows(r), dim(d), values(r * d, 0.0) {}

    static EmbeddingTable zeros_like(const EmbeddingTable& other) {
        return EmbeddingTable(other.rows, other.dim);
    }

    std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

    void fill(double v) { std::fill(values.begin(), values.end(), v); }

    void scale(double a) {
        for (double& v : values) v *= a;
    }

    void add_scaled(const EmbeddingTable& other, double a) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += a * other.values[i];
    }

    bool same_shape(const EmbeddingTable& other) const {
        return rows == other.rows && dim == other.dim;
    }
};

struct AttentionParams {
    std::vector<double> query;
};

struct FusionWeights {
    double w_ca = 0.4;
    double w_co = 0.3;
    double w_po = 0.3;

    void validate() const {
        if (w_ca < 0 || w_co < 0 || w_po < 0 || std::abs(w_ca + w_co + w_po - 1.0) > 1e-9)
            throw ConfigError("fusion weights must lie in [0,1] and sum to 1");
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// ---------------------------------------------------------------------------
// Game-graph propagation (LightGCN)

// Symmetric degree normalization: w_ij / (sqrt(deg_i) * sqrt(deg_j)) with the
// unweighted degree. Isolated nodes have no entries and stay untouched.
inline SparseGraph normalize_game_graph(const SparseGraph& g) {
    if (!g.symmetric) throw ConfigError("normalization expects a symmetric graph");
    SparseGraph out = g;
    for (std::uint32_t i = 0; i < g.num_nodes; ++i) {
        const double di = static_cast<double>(g.degree(i));
        auto cols = g.neighbors(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const double dj = static_cast<double>(g.degree(cols[k]));
            out.weights[g.row_offsets[i] + k] = g.weights[g.row_offsets[i] + k] / (std::sqrt(di) * std::sqrt(dj));
        }
    }
    return out;
}

// One neighbor-aggregation step: out(i) = sum_j w_ij e(j). No self term; an
// isolated node passes its embedding through unchanged so zero-degree games
// are not zeroed out.
inline EmbeddingTable lightgcn_layer(const SparseGraph& normed, const EmbeddingTable& table) {
    if (table.rows != normed.num_nodes)
        throw std::invalid_argument("embedding table rows do not match graph nodes");
    EmbeddingTable out(table.rows, table.dim);
    parallel_for(normed.num_nodes, [&](std::size_t i) {
        auto dst = out.row(i);
        auto cols = normed.neighbors(static_cast<std::uint32_t>(i));
        if (cols.empty()) {
            auto src = table.row(i);
            std::copy(src.begin(), src.end(), dst.begin());
            return;
        }
        auto w = normed.edge_weights(static_cast<std::uint32_t>(i));
        for (std::size_t k = 0; k < cols.size(); ++k) {
            auto src = table.row(cols[k]);
            const double c = w[k];
            for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += c * src[d];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Popularity-reweighted bipartite propagation

// One convolution layer over the player-game bipartite graph with
// popularity-guided edge and node reweighting:
//   out_u = (1/|N_u|) e_u + sum_{i in N_u} theta_e(i)*theta_n(i) / (sqrt|N_u| sqrt|N_i|) e_i
//   out_i = (theta_n(i)/|N_i|) e_i + sum_{u in N_i} 1 / (sqrt|N_i| sqrt|N_u|) e_u
// Games with no interactions pass through as theta_n(i) * e_i; users are
// expected to have degree >= 1 (k-core) but degree-0 users pass through too.
inline std::pair<EmbeddingTable, EmbeddingTable> reweighted_bipartite_layer(
    const BipartiteGraph& bg, const EmbeddingTable& users, const EmbeddingTable& games,
    const PopularitySets& pop, const ThetaConfig& cfg) {
    if (users.rows != bg.num_users || games.rows != bg.num_games || users.dim != games.dim)
        throw std::invalid_argument("embedding shapes do not match bipartite graph");

    const std::size_t dim = users.dim;
    EmbeddingTable out_u(users.rows, dim), out_i(games.rows, dim);
    const auto offset = static_cast<std::uint32_t>(bg.num_users);

    parallel_for(bg.num_users, [&](std::size_t u) {
        auto dst = out_u.row(u);
        const double du = static_cast<double>(bg.user_degree(static_cast<std::uint32_t>(u)));
        auto src_self = users.row(u);
        if (du == 0) {
            std::copy(src_self.begin(), src_self.end(), dst.begin());
            return;
        }
        const double self_c = 1.0 / du;
        for (std::size_t d = 0; d < dim; ++d) dst[d] = self_c * src_self[d];
        for (std::uint32_t node : bg.user_row(static_cast<std::uint32_t>(u))) {
            const std::uint32_t g = node - offset;
            const double dg = static_cast<double>(bg.game_degree(g));
            const double c = theta_e(g, pop, cfg) * theta_n(g, pop, cfg) / (std::sqrt(du) * std::sqrt(dg));
            auto src = games.row(g);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += c * src[d];
        }
    });

    parallel_for(bg.num_games, [&](std::size_t g) {
        auto dst = out_i.row(g);
        const double tn = theta_n(static_cast<std::uint32_t>(g), pop, cfg);
        const double dg = static_cast<double>(bg.game_degree(static_cast<std::uint32_t>(g)));
        auto src_self = games.row(g);
        const double self_c = dg == 0 ? tn : tn / dg;
        for (std::size_t d = 0; d < dim; ++d) dst[d] = self_c * src_self[d];
        if (dg == 0) return;
        for (std::uint32_t u : bg.game_row(static_cast<std::uint32_t>(g))) {
            const double du = static_cast<double>(bg.user_degree(u));
            const double c = 1.0 / (std::sqrt(dg) * std::sqrt(du));
            auto src = users.row(u);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += c * src[d];
        }
    });
    return {std::move(out_u), std::move(out_i)};
}

// Adjoint of reweighted_bipartite_layer: maps gradients w.r.t. the layer
// outputs to gradients w.r.t. its inputs. The layer is linear, so this is the
// transpose of the same coefficient matrix.
inline std::pair<EmbeddingTable, EmbeddingTable> reweighted_bipartite_layer_adjoint(
    const BipartiteGraph& bg, const EmbeddingTable& grad_out_u, const EmbeddingTable& grad_out_i,
    const PopularitySets& pop, const ThetaConfig& cfg) {
    const std::size_t dim = grad_out_u.dim;
    EmbeddingTable grad_u(grad_out_u.rows, dim), grad_i(grad_out_i.rows, dim);
    const auto offset = static_cast<std::uint32_t>(bg.num_users);

    parallel_for(bg.num_users, [&](std::size_t u) {
        auto dst = grad_u.row(u);
        const double du = static_cast<double>(bg.user_degree(static_cast<std::uint32_t>(u)));
        auto src_self = grad_out_u.row(u);
        if (du == 0) {
            std::copy(src_self.begin(), src_self.end(), dst.begin());
            return;
        }
        const double self_c = 1.0 / du;
        for (std::size_t d = 0; d < dim; ++d) dst[d] = self_c * src_self[d];
        // e_u feeds out_i of every neighboring game with coefficient 1/(sqrt|N_i| sqrt|N_u|)
        for (std::uint32_t node : bg.user_row(static_cast<std::uint32_t>(u))) {
            const std::uint32_t g = node - offset;
            const double dg = static_cast<double>(bg.game_degree(g));
            const double c = 1.0 / (std::sqrt(dg) * std::sqrt(du));
            auto src = grad_out_i.row(g);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += c * src[d];
        }
    });

    parallel_for(bg.num_games, [&](std::size_t g) {
        auto dst = grad_i.row(g);
        const double tn = theta_n(static_cast<std::uint32_t>(g), pop, cfg);
        const double dg = static_cast<double>(bg.game_degree(static_cast<std::uint32_t>(g)));
        auto src_self = grad_out_i.row(g);
        const double self_c = dg == 0 ? tn : tn / dg;
        for (std::size_t d = 0; d < dim; ++d) dst[d] = self_c * src_self[d];
        if (dg == 0) return;
        // e_i feeds out_u of every neighboring user with coefficient
        // theta_e(i) theta_n(i) / (sqrt|N_u| sqrt|N_i|)
        const double te_tn = theta_e(static_cast<std::uint32_t>(g), pop, cfg) * tn;
        for (std::uint32_t u : bg.game_row(static_cast<std::uint32_t>(g))) {
            const double du = static_cast<double>(bg.user_degree(u));
            const double c = te_tn / (std::sqrt(du) * std::sqrt(dg));
            auto src = grad_out_u.row(u);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += c * src[d];
        }
    });
    return {std::move(grad_u), std::move(grad_i)};
}

// ---------------------------------------------------------------------------
// Layer weights and attention fusion

// w_l = 1 - (k - l) * beta for l = 1..k; the deepest layer always gets 1 and
// deeper layers get more weight for beta > 0.
inline std::vector<double> layer_weights(std::size_t k, double beta) {
    if (k < 1) throw ConfigError("layer count must be >= 1");
    if (beta < 0 || (k > 1 && beta >= 1.0 / static_cast<double>(k - 1)))
        throw ConfigError("layer decay beta must satisfy 0 <= beta < 1/(k-1)");
    std::vector<double> w(k);
    for (std::size_t l = 1; l <= k; ++l)
        w[l - 1] = 1.0 - static_cast<double>(k - l) * beta;
    return w;
}

// Row-wise softmax fusion: per row, logits are dot products of the query with
// each candidate row, and the output is the softmax-weighted sum. Softmax is
// computed with max subtraction.
inline EmbeddingTable attention_fuse(const AttentionParams& q,
                                     std::span<const EmbeddingTable> candidates) {
    if (candidates.empty()) throw std::invalid_argument("attention needs at least one candidate");
    const std::size_t rows = candidates[0].rows, dim = candidates[0].dim;
    for (const auto& c : candidates)
        if (!c.same_shape(candidates[0])) throw std::invalid_argument("candidate shape mismatch");
    if (q.query.size() != dim) throw std::invalid_argument("query dimension mismatch");

    const std::size_t s = candidates.size();
    EmbeddingTable out(rows, dim);
    parallel_for(rows, [&](std::size_t i) {
        double logits[16];
        double* lp = logits;
        std::vector<double> heap;
        if (s > 16) { heap.resize(s); lp = heap.data(); }
        double mx = -HUGE_VAL;
        for (std::size_t c = 0; c < s; ++c) {
            lp[c] = dot({q.query.data(), dim}, candidates[c].row(i));
            mx = std::max(mx, lp[c]);
        }
        double z = 0;
        for (std::size_t c = 0; c < s; ++c) {
            lp[c] = std::exp(lp[c] - mx);
            z += lp[c];
        }
        auto dst = out.row(i);
        for (std::size_t c = 0; c < s; ++c) {
            const double alpha = lp[c] / z;
            auto src = candidates[c].row(i);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += alpha * src[d];
        }
    });
    return out;
}

struct AttentionBackward {
    std::vector<EmbeddingTable> grad_candidates;
    std::vector<double> grad_query;
};

// Gradients of attention_fuse w.r.t. candidates and query, given the gradient
// of the loss w.r.t. the fused output. With z_c = q . c_c, alpha = softmax(z),
// out = sum alpha_c c_c and p_c = g . c_c:
//   dL/dc_c = alpha_c g + alpha_c (p_c - sum_t alpha_t p_t) q
//   dL/dq   = sum_c alpha_c (p_c - sum_t alpha_t p_t) c_c
inline AttentionBackward attention_fuse_backward(const AttentionParams& q,
                                                 std::span<const EmbeddingTable> candidates,
                                                 const EmbeddingTable& grad_out) {
    const std::size_t rows = candidates[0].rows, dim = candidates[0].dim;
    const std::size_t s = candidates.size();
    AttentionBackward bwd;
    bwd.grad_candidates.assign(s, EmbeddingTable(rows, dim));
    bwd.grad_query.assign(dim, 0.0);

    std::vector<double> logits(s), p(s);
    for (std::size_t i = 0; i < rows; ++i) {
        double mx = -HUGE_VAL;
        for (std::size_t c = 0; c < s; ++c) {
            logits[c] = dot({q.query.data(), dim}, candidates[c].row(i));
            mx = std::max(mx, logits[c]);
        }
        double z = 0;
        for (std::size_t c = 0; c < s; ++c) {
            logits[c] = std::exp(logits[c] - mx);
            z += logits[c];
        }
        auto g = grad_out.row(i);
        double pbar = 0;
        for (std::size_t c = 0; c < s; ++c) {
            logits[c] /= z;  // now alpha_c
            p[c] = dot(g, candidates[c].row(i));
            pbar += logits[c] * p[c];
        }
        for (std::size_t c = 0; c < s; ++c) {
            const double alpha = logits[c];
            const double zgrad = alpha * (p[c] - pbar);  // dL/dz_c
            auto dst = bwd.grad_candidates[c].row(i);
            auto cand = candidates[c].row(i);
            for (std::size_t d = 0; d < dim; ++d) {
                dst[d] = alpha * g[d] + zgrad * q.query[d];
                bwd.grad_query[d] += zgrad * cand[d];
            }
        }
    }
    return bwd;
}

// ---------------------------------------------------------------------------
// Branch forwards

struct SgcForward {
    std::array<EmbeddingTable, 3> branch_outputs;  // one per strict graph
    EmbeddingTable fused;
};

// Runs k LightGCN layers on each strict graph from the shared base game table
// and fuses the three final-layer outputs with graphwise attention.
inline SgcForward run_sgc(const EmbeddingTable& base_games, const AttentionParams& query,
                          std::span<const SparseGraph> strict_normed, std::size_t k) {
    if (strict_normed.size() != 3) throw std::invalid_argument("expected three strict graphs");
    SgcForward fw;
    for (std::size_t s = 0; s < 3; ++s) {
        EmbeddingTable e = base_games;
        for (std::size_t l = 0; l < k; ++l) e = lightgcn_layer(strict_normed[s], e);
        fw.branch_outputs[s] = std::move(e);
    }
    fw.fused = attention_fuse(query, fw.branch_outputs);
    return fw;
}

inline EmbeddingTable forward_sgc(const EmbeddingTable& base_games, const AttentionParams& query,
                                  std::span<const SparseGraph> strict_normed, std::size_t k) {
    return run_sgc(base_games, query, strict_normed, k).fused;
}

struct CnaForward {
    std::vector<EmbeddingTable> scaled_layers;  // w_l * e^(l), l = 1..k
    EmbeddingTable fused;
};

// Runs k LightGCN layers on the connectivity graph, scales layer l by the
// layer weight w_l, and fuses the scaled layer outputs with layerwise
// attention.
inline CnaForward run_cna(const EmbeddingTable& base_games, const AttentionParams& query,
                          const SparseGraph& co_normed, std::size_t k, double beta) {
    const std::vector<double> w = layer_weights(k, beta);
    CnaForward fw;
    fw.scaled_layers.reserve(k);
    EmbeddingTable e = base_games;
    for (std::size_t l = 0; l < k; ++l) {
        e = lightgcn_layer(co_normed, e);
        EmbeddingTable scaled = e;
        scaled.scale(w[l]);
        fw.scaled_layers.push_back(std::move(scaled));
    }
    fw.fused = attention_fuse(query, fw.scaled_layers);
    return fw;
}

inline EmbeddingTable forward_cna(const EmbeddingTable& base_games, const AttentionParams& query,
                                  const SparseGraph& co_normed, std::size_t k, double beta) {
    return run_cna(base_games, query, co_normed, k, beta).fused;
}

// k reweighted bipartite layers from the base tables; only the final layer's
// outputs are kept.
inline std::pair<EmbeddingTable, EmbeddingTable> forward_penr(
    const BipartiteGraph& bg, const EmbeddingTable& base_users, const EmbeddingTable& base_games,
    const PopularitySets& pop, const ThetaConfig& cfg, std::size_t k) {
    if (k < 1) throw ConfigError("bipartite layer count must be >= 1");
    EmbeddingTable u = base_users, g = base_games;
    for (std::size_t l = 0; l < k; ++l) {
        auto [nu, ng] = reweighted_bipartite_layer(bg, u, g, pop, cfg);
        u = std::move(nu);
        g = std::move(ng);
    }
    return {std::move(u), std::move(g)};
}

// Final combination: the user table is the bipartite-propagated one, the game
// table is the fixed weighted sum of the three branch outputs.
inline std::pair<EmbeddingTable, EmbeddingTable> fuse_final(const EmbeddingTable& e_ca,
                                                            const EmbeddingTable& e_co,
                                                            const EmbeddingTable& e_po_games,
                                                            const EmbeddingTable& e_po_users,
                                                            const FusionWeights& w) {
    w.validate();
    if (!e_ca.same_shape(e_co) || !e_ca.same_shape(e_po_games))
        throw std::invalid_argument("game table shape mismatch");
    EmbeddingTable games(e_ca.rows, e_ca.dim);
    for (std::size_t i = 0; i < games.values.size(); ++i)
        games.values[i] = w.w_ca * e_ca.values[i] + w.w_co * e_co.values[i] + w.w_po * e_po_games.values[i];
    return {e_po_users, std::move(games)};
}

}  // namespace cpgrec

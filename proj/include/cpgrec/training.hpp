#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cpgrec/evaluation.hpp"
#include "cpgrec/model.hpp"

namespace cpgrec {

// ---------------------------------------------------------------------------
// Scores and the reweighted BPR loss

inline double score(std::span<const double> user, std::span<const double> game) {
    return dot(user, game);
}

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log_sigmoid(double x) {
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

// Negative-sample score reweighting r~ = m * sigmoid(r) * r. Amplifies the
// penalty on high-scoring negatives and shrinks it for strongly negative
// scores, leaving moderate scores nearly unchanged.
inline double nsr(double r, double m) { return m * sigmoid(r) * r; }

// d r~ / d r = m * sigmoid(r) * (1 + r * (1 - sigmoid(r)))
inline double nsr_grad(double r, double m) {
    const double s = sigmoid(r);
    return m * s * (1.0 + r * (1.0 - s));
}

struct Triple {
    std::uint32_t user, pos, neg;
};

struct TrainBatch {
    std::vector<Triple> triples;
};

namespace detail {

// Data term of the loss plus, per triple, the gradient contributions with
// respect to the fused embeddings. grad tables may be null when only the
// loss value is wanted.
inline double loss_and_fused_grads(const TrainBatch& batch, const ForwardPass& fp,
                                   const Hyperparams& hp, EmbeddingTable* grad_users,
                                   EmbeddingTable* grad_games) {
    if (batch.triples.empty()) return 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.triples.size());
    const std::size_t dim = fp.users.dim;
    double data = 0;
    for (const Triple& t : batch.triples) {
        auto eu = fp.users.row(t.user);
        auto ei = fp.games.row(t.pos);
        auto ej = fp.games.row(t.neg);
        const double r_pos = dot(eu, ei);
        const double r_neg_raw = dot(eu, ej);
        const double r_neg = hp.use_nsr ? nsr(r_neg_raw, hp.m) : r_neg_raw;
        const double x = r_pos - r_neg;
        data += -log_sigmoid(x);
        if (!grad_users) continue;
        const double gx = -(1.0 - sigmoid(x)) * inv_b;
        const double dneg = hp.use_nsr ? nsr_grad(r_neg_raw, hp.m) : 1.0;
        auto gu = grad_users->row(t.user);
        auto gi = grad_games->row(t.pos);
        auto gj = grad_games->row(t.neg);
        for (std::size_t d = 0; d < dim; ++d) {
            gu[d] += gx * (ei[d] - dneg * ej[d]);
            gi[d] += gx * eu[d];
            gj[d] += -gx * dneg * eu[d];
        }
    }
    return data * inv_b;
}

}  // namespace detail

// Mean pairwise ranking loss over the batch (positive score against the
// reweighted negative score) plus the L2 regularizer over all learnable
// parameters, added once.
inline double bpr_nsr_loss(const TrainBatch& batch, const ModelParams& params,
                           const GraphSet& graphs, const Hyperparams& hp) {
    ForwardPass fp = forward_all(params, graphs, hp);
    return detail::loss_and_fused_grads(batch, fp, hp, nullptr, nullptr) +
           hp.lambda * params.squared_norm();
}

// ---------------------------------------------------------------------------
// Negative sampling

// One uniform negative per positive, rejection-sampled over the games the
// user has not interacted with in the training split.
inline TrainBatch sample_negatives(const UserGameIndex& train_index, std::size_t num_games,
                                   std::span<const std::pair<std::uint32_t, std::uint32_t>> positives,
                                   Rng& rng) {
    TrainBatch batch;
    batch.triples.reserve(positives.size());
    for (const auto& [u, i] : positives) {
        if (train_index.degree(u) >= num_games)
            throw ValidationError("user " + std::to_string(u) +
                                  " interacted with every game; no negative exists");
        std::uint32_t j;
        do {
            j = static_cast<std::uint32_t>(rng.next_below(num_games));
        } while (train_index.contains(u, j));
        batch.triples.push_back({u, i, j});
    }
    return batch;
}

inline TrainBatch sample_negatives(const InteractionLog& train,
                                   std::span<const std::pair<std::uint32_t, std::uint32_t>> positives,
                                   Rng& rng) {
    return sample_negatives(UserGameIndex::build(train), train.num_games, positives, rng);
}

// ---------------------------------------------------------------------------
// Exact gradients

struct Gradients {
    EmbeddingTable user_embeddings;
    EmbeddingTable game_embeddings;
    std::vector<double> graphwise_query;
    std::vector<double> layerwise_query;
};

// Backpropagates the loss through the fusion, both attention modules and all
// propagation stacks. Every propagation operator is linear, so its backward
// pass is the adjoint operator applied to the output gradient; the game-graph
// operators are symmetric and are their own adjoints.
inline Gradients compute_gradients(const TrainBatch& batch, const ModelParams& params,
                                   const GraphSet& graphs, const Hyperparams& hp,
                                   double* loss_out = nullptr) {
    const ForwardPass fp = forward_all(params, graphs, hp);
    const std::size_t dim = params.dim();

    EmbeddingTable grad_fused_users = EmbeddingTable::zeros_like(fp.users);
    EmbeddingTable grad_fused_games = EmbeddingTable::zeros_like(fp.games);
    const double data =
        detail::loss_and_fused_grads(batch, fp, hp, &grad_fused_users, &grad_fused_games);
    if (loss_out) *loss_out = data + hp.lambda * params.squared_norm();

    Gradients g;
    g.user_embeddings = EmbeddingTable::zeros_like(params.user_embeddings);
    g.game_embeddings = EmbeddingTable::zeros_like(params.game_embeddings);
    g.graphwise_query.assign(dim, 0.0);
    g.layerwise_query.assign(dim, 0.0);

    // split of the fused game gradient across the three branches
    EmbeddingTable grad_ca = grad_fused_games;
    grad_ca.scale(params.fusion.w_ca);
    EmbeddingTable grad_co = grad_fused_games;
    grad_co.scale(params.fusion.w_co);
    EmbeddingTable grad_po_games = std::move(grad_fused_games);
    grad_po_games.scale(params.fusion.w_po);
    EmbeddingTable& grad_po_users = grad_fused_users;  // e_u is the bipartite output directly

    // strict-graph branches: attention, then k_ca symmetric layers back to base
    {
        AttentionBackward bwd =
            attention_fuse_backward(params.graphwise_query, fp.sgc.branch_outputs, grad_ca);
        for (std::size_t d = 0; d < dim; ++d) g.graphwise_query[d] += bwd.grad_query[d];
        for (std::size_t s = 0; s < 3; ++s) {
            EmbeddingTable back = std::move(bwd.grad_candidates[s]);
            for (std::size_t l = 0; l < hp.k_ca; ++l)
                back = lightgcn_layer(graphs.strict_normed[s], back);
            g.game_embeddings.add_scaled(back, 1.0);
        }
    }

    // connectivity branch: attention over scaled layers, then a reverse pass
    // accumulating sum_l M^l (w_l * grad_l)
    {
        AttentionBackward bwd =
            attention_fuse_backward(params.layerwise_query, fp.cna.scaled_layers, grad_co);
        for (std::size_t d = 0; d < dim; ++d) g.layerwise_query[d] += bwd.grad_query[d];
        const std::vector<double> w = layer_weights(hp.k_co, hp.beta);
        EmbeddingTable acc = std::move(bwd.grad_candidates[hp.k_co - 1]);
        acc.scale(w[hp.k_co - 1]);
        for (std::size_t l = hp.k_co - 1; l-- > 0;) {
            acc = lightgcn_layer(graphs.co_normed, acc);
            acc.add_scaled(bwd.grad_candidates[l], w[l]);
        }
        acc = lightgcn_layer(graphs.co_normed, acc);
        g.game_embeddings.add_scaled(acc, 1.0);
    }

    // bipartite branch: k_po adjoint layers back to both base tables
    {
        EmbeddingTable gu = std::move(grad_po_users);
        EmbeddingTable gi = std::move(grad_po_games);
        for (std::size_t l = 0; l < hp.k_po; ++l) {
            auto [nu, ni] = reweighted_bipartite_layer_adjoint(graphs.bipartite, gu, gi,
                                                               graphs.popularity, params.theta);
            gu = std::move(nu);
            gi = std::move(ni);
        }
        g.user_embeddings.add_scaled(gu, 1.0);
        g.game_embeddings.add_scaled(gi, 1.0);
    }

    // L2 regularizer over every learnable parameter
    const double two_lambda = 2.0 * hp.lambda;
    if (two_lambda != 0) {
        g.user_embeddings.add_scaled(params.user_embeddings, two_lambda);
        g.game_embeddings.add_scaled(params.game_embeddings, two_lambda);
        for (std::size_t d = 0; d < dim; ++d) {
            g.graphwise_query[d] += two_lambda * params.graphwise_query.query[d];
            g.layerwise_query[d] += two_lambda * params.layerwise_query.query[d];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    std::vector<double> m_user, v_user, m_game, v_game, m_gq, v_gq, m_lq, v_lq;
    std::uint64_t step = 0;

    static AdamState init(const ModelParams& params) {
        AdamState s;
        s.m_user.assign(params.user_embeddings.values.size(), 0.0);
        s.v_user = s.m_user;
        s.m_game.assign(params.game_embeddings.values.size(), 0.0);
        s.v_game = s.m_game;
        s.m_gq.assign(params.graphwise_query.query.size(), 0.0);
        s.v_gq = s.m_gq;
        s.m_lq.assign(params.layerwise_query.query.size(), 0.0);
        s.v_lq = s.m_lq;
        return s;
    }
};

namespace detail {

inline void adam_update(std::span<double> param, std::span<const double> grad,
                        std::vector<double>& m, std::vector<double>& v, double lr,
                        double bias1, double bias2) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
    }
}

}  // namespace detail

// Standard Adam with beta1=0.9, beta2=0.999, eps=1e-8 and bias correction.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
                      const Hyperparams& hp) {
    ++state.step;
    const double bias1 = 1.0 - std::pow(0.9, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(0.999, static_cast<double>(state.step));
    detail::adam_update(params.user_embeddings.values, grads.user_embeddings.values, state.m_user,
                        state.v_user, hp.learning_rate, bias1, bias2);
    detail::adam_update(params.game_embeddings.values, grads.game_embeddings.values, state.m_game,
                        state.v_game, hp.learning_rate, bias1, bias2);
    detail::adam_update(params.graphwise_query.query, grads.graphwise_query, state.m_gq,
                        state.v_gq, hp.learning_rate, bias1, bias2);
    detail::adam_update(params.layerwise_query.query, grads.layerwise_query, state.m_lq,
                        state.v_lq, hp.learning_rate, bias1, bias2);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0;
    double val_recall10 = 0;
    double val_coverage5 = 0;
};

struct TrainResult {
    ModelParams params;      // best validation recall@10, or final if no validation data
    std::vector<EpochStats> history;
    GraphSet graphs;
};

struct TrainCallbacks {
    // called after every epoch with the current (not best) parameters
    std::function<void(const EpochStats&, const ModelParams&)> on_epoch;
};

// Epochs of shuffled positive pairs in fixed-size batches with one fresh
// uniform negative per positive. Early-stops on validation recall@10 with the
// configured patience and returns the best-validation parameters.
inline TrainResult train(const SplitLog& split, const GameCatalog& catalog, Hyperparams hp,
                         Preset preset = Preset::balanced, FusionWeights fusion = FusionWeights{},
                         ThetaConfig theta = ThetaConfig{}, const TrainCallbacks& callbacks = {},
                         std::size_t start_epoch = 0, const ModelParams* warm_start = nullptr) {
    hp.validate();
    apply_preset(preset, fusion, theta);
    fusion.validate();
    theta.validate();

    TrainResult result;
    result.graphs = build_graph_set(catalog, split.train);
    const GraphSet& graphs = result.graphs;

    Rng init_rng(hp.seed, "init");
    if (warm_start) {
        result.params = *warm_start;
        result.params.fusion = fusion;  // run configuration wins over checkpoint metadata
        result.params.theta = theta;
    } else {
        result.params = init_params(split.train.num_users(), split.train.num_games, hp, fusion,
                                    theta, init_rng);
    }
    ModelParams& params = result.params;

    const UserGameIndex train_index = UserGameIndex::build(split.train);
    const UserGameIndex val_index = UserGameIndex::build(split.val);
    const bool has_val = split.val.num_pairs() > 0;

    AdamState adam = AdamState::init(params);
    Rng sampling_rng(hp.seed, "sampling");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> positives = split.train.pairs;

    ModelParams best_params = params;
    double best_recall = -1.0;
    std::size_t epochs_since_best = 0;

    for (std::size_t e = 1; e <= hp.max_epochs; ++e) {
        sampling_rng.shuffle(positives);
        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < positives.size(); start += hp.batch_size) {
            const std::size_t len = std::min(hp.batch_size, positives.size() - start);
            TrainBatch batch = sample_negatives(
                train_index, split.train.num_games,
                std::span<const std::pair<std::uint32_t, std::uint32_t>>(positives.data() + start, len),
                sampling_rng);
            double batch_loss = 0;
            Gradients grads = compute_gradients(batch, params, graphs, hp, &batch_loss);
            adam_step(params, grads, adam, hp);
            loss_sum += batch_loss;
            ++batches;
        }

        EpochStats stats;
        stats.epoch = start_epoch + e;
        stats.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        if (has_val) {
            ForwardPass fp = forward_all(params, graphs, hp);
            MetricsReport rep =
                evaluate_against(fp.users, fp.games, train_index, val_index, catalog, {5, 10});
            stats.val_recall10 = rep.rows[1].recall;
            stats.val_coverage5 = rep.rows[0].coverage_total;
        }
        result.history.push_back(stats);
        if (callbacks.on_epoch) callbacks.on_epoch(stats, params);

        if (has_val) {
            if (stats.val_recall10 > best_recall) {
                best_recall = stats.val_recall10;
                best_params = params;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= hp.patience) {
                break;
            }
        }
    }

    if (has_val && hp.max_epochs > 0) result.params = std::move(best_params);
    return result;
}

// ---------------------------------------------------------------------------
// Training history CSV

inline constexpr const char* kHistoryHeader = "epoch,loss,val_recall@10,val_coverage@5";

inline std::string history_row(const EpochStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g", s.epoch, s.loss, s.val_recall10,
                  s.val_coverage5);
    return buf;
}

}  // namespace cpgrec

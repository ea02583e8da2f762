#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cpgrec/propagation.hpp"
#include "cpgrec/rng.hpp"

namespace cpgrec {

// Everything the model propagates over, built once from the catalog and the
// training log. Strict and connectivity graphs are stored pre-normalized.
struct GraphSet {
    std::array<SparseGraph, 3> raw;            // genre, developer, publisher
    std::array<SparseGraph, 3> strict_normed;  // genre&developer, genre&publisher, developer&publisher
    SparseGraph co_normed;
    BipartiteGraph bipartite;
    PopularitySets popularity;
};

inline GraphSet build_graph_set(const GameCatalog& catalog, const InteractionLog& train,
                                double popularity_quantile = 0.2) {
    GraphSet gs;
    for (int c = 0; c < 3; ++c) gs.raw[c] = build_raw_graph(catalog, Category(c));
    const std::array<std::pair<int, int>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
    for (int s = 0; s < 3; ++s)
        gs.strict_normed[s] =
            normalize_game_graph(intersect_graphs(gs.raw[pairs[s].first], gs.raw[pairs[s].second]));
    gs.co_normed = normalize_game_graph(connectivity_from_raw(gs.raw[0], gs.raw[1], gs.raw[2]));
    gs.bipartite = build_bipartite(train);
    gs.popularity = popularity_sets(train, popularity_quantile);
    return gs;
}

struct Hyperparams {
    double learning_rate = 0.03;
    std::size_t batch_size = 1024;
    std::size_t dim = 32;
    double beta = 0.1;     // layer-weight decay
    double m = 6.5;        // negative-score reweighting intensity
    double lambda = 1e-4;  // L2 coefficient
    std::size_t k_ca = 2;
    std::size_t k_co = 3;
    std::size_t k_po = 3;
    std::size_t max_epochs = 50;
    std::size_t patience = 10;
    std::uint64_t seed = 42;
    bool use_nsr = true;

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
        if (m <= 0) throw ConfigError("m must be > 0");
        if (lambda < 0) throw ConfigError("lambda must be >= 0");
        if (batch_size < 1 || dim < 1) throw ConfigError("batch_size and dim must be >= 1");
        layer_weights(k_co, beta);  // validates beta against k_co
    }
};

enum class Preset { balanced, accuracy_focused, diversity_focused, custom };

inline Preset preset_from_name(const std::string& name) {
    if (name == "balanced") return Preset::balanced;
    if (name == "accuracy_focused") return Preset::accuracy_focused;
    if (name == "diversity_focused") return Preset::diversity_focused;
    if (name == "custom") return Preset::custom;
    throw ConfigError("unknown preset '" + name + "'");
}

// Presets pin the fusion weights and theta configuration; `custom` keeps
// whatever the caller supplied.
inline void apply_preset(Preset p, FusionWeights& fusion, ThetaConfig& theta) {
    switch (p) {
        case Preset::balanced:
            fusion = {0.4, 0.3, 0.3};
            theta = ThetaConfig{};
            break;
        case Preset::accuracy_focused:
            fusion = {1.0, 0.0, 0.0};
            theta = ThetaConfig::unit();
            break;
        case Preset::diversity_focused:
            fusion = {0.0, 0.5, 0.5};
            theta = ThetaConfig{};
            break;
        case Preset::custom:
            break;
    }
}

// Learnable state (embedding tables and attention queries) plus the fixed
// fusion weights and theta configuration they were trained with.
struct ModelParams {
    EmbeddingTable user_embeddings;
    EmbeddingTable game_embeddings;
    AttentionParams graphwise_query;
    AttentionParams layerwise_query;
    FusionWeights fusion;
    ThetaConfig theta;

    std::size_t dim() const { return user_embeddings.dim; }

    double squared_norm() const {
        double s = 0;
        for (double v : user_embeddings.values) s += v * v;
        for (double v : game_embeddings.values) s += v * v;
        for (double v : graphwise_query.query) s += v * v;
        for (double v : layerwise_query.query) s += v * v;
        return s;
    }
};

// Embedding tables start uniform in +-sqrt(6/(rows+dim)); query vectors start
// at all ones so the initial attention is close to uniform. Values are drawn
// on the float32 grid because that is the checkpoint storage precision.
inline ModelParams init_params(std::size_t num_users, std::size_t num_games,
                               const Hyperparams& hp, FusionWeights fusion, ThetaConfig theta,
                               Rng& rng) {
    fusion.validate();
    theta.validate();
    ModelParams p;
    p.fusion = fusion;
    p.theta = theta;
    p.user_embeddings = EmbeddingTable(num_users, hp.dim);
    p.game_embeddings = EmbeddingTable(num_games, hp.dim);
    for (EmbeddingTable* t : {&p.user_embeddings, &p.game_embeddings}) {
        const double bound = std::sqrt(6.0 / static_cast<double>(t->rows + t->dim));
        for (double& v : t->values)
            v = static_cast<double>(static_cast<float>(rng.next_double(-bound, bound)));
    }
    p.graphwise_query.query.assign(hp.dim, 1.0);
    p.layerwise_query.query.assign(hp.dim, 1.0);
    return p;
}

// Full forward pass with per-branch intermediates kept for gradient reuse.
struct ForwardPass {
    SgcForward sgc;
    CnaForward cna;
    EmbeddingTable penr_users, penr_games;
    EmbeddingTable users, games;  // fused final embeddings
};

inline ForwardPass forward_all(const ModelParams& params, const GraphSet& graphs,
                               const Hyperparams& hp) {
    ForwardPass fp;
    fp.sgc = run_sgc(params.game_embeddings, params.graphwise_query, graphs.strict_normed, hp.k_ca);
    fp.cna = run_cna(params.game_embeddings, params.layerwise_query, graphs.co_normed, hp.k_co,
                     hp.beta);
    auto [pu, pg] = forward_penr(graphs.bipartite, params.user_embeddings, params.game_embeddings,
                                 graphs.popularity, params.theta, hp.k_po);
    fp.penr_users = std::move(pu);
    fp.penr_games = std::move(pg);
    auto [users, games] = fuse_final(fp.sgc.fused, fp.cna.fused, fp.penr_games, fp.penr_users,
                                     params.fusion);
    fp.users = std::move(users);
    fp.games = std::move(games);
    return fp;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary layout, little-endian:
//   magic "CPGR" | version u32 | num_users u32 | num_games u32 | dim u32 |
//   w_ca w_co w_po f64 | theta_e_hot theta_n_hot theta_n_cold f64 |
//   user table f32[] | game table f32[] | graphwise query f32[] | layerwise query f32[]

namespace detail {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kCheckpointMagic[4] = {'C', 'P', 'G', 'R'};

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError(path + ": truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline double get_f64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError(path + ": truncated checkpoint");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline double get_f32(std::istream& in, const std::string& path) {
    std::uint32_t bits = get_u32(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return static_cast<double>(v);
}

}  // namespace detail

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(detail::kCheckpointMagic, 4);
    detail::put_u32(out, detail::kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(params.user_embeddings.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(params.game_embeddings.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(params.dim()));
    detail::put_f64(out, params.fusion.w_ca);
    detail::put_f64(out, params.fusion.w_co);
    detail::put_f64(out, params.fusion.w_po);
    detail::put_f64(out, params.theta.theta_e_hot);
    detail::put_f64(out, params.theta.theta_n_hot);
    detail::put_f64(out, params.theta.theta_n_cold);
    for (const std::vector<double>* arr :
         {&params.user_embeddings.values, &params.game_embeddings.values,
          &params.graphwise_query.query, &params.layerwise_query.query})
        for (double v : *arr) detail::put_f32(out, static_cast<float>(v));
    if (!out) throw IoError("write failed for " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, detail::kCheckpointMagic, 4) != 0)
        throw IoError(path + ": not a checkpoint (bad magic)");
    const std::uint32_t version = detail::get_u32(in, path);
    if (version != detail::kCheckpointVersion)
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t num_users = detail::get_u32(in, path);
    const std::uint32_t num_games = detail::get_u32(in, path);
    const std::uint32_t dim = detail::get_u32(in, path);

    ModelParams p;
    p.fusion.w_ca = detail::get_f64(in, path);
    p.fusion.w_co = detail::get_f64(in, path);
    p.fusion.w_po = detail::get_f64(in, path);
    p.theta.theta_e_hot = detail::get_f64(in, path);
    p.theta.theta_n_hot = detail::get_f64(in, path);
    p.theta.theta_n_cold = detail::get_f64(in, path);
    p.user_embeddings = EmbeddingTable(num_users, dim);
    p.game_embeddings = EmbeddingTable(num_games, dim);
    p.graphwise_query.query.resize(dim);
    p.layerwise_query.query.resize(dim);
    for (std::vector<double>* arr : {&p.user_embeddings.values, &p.game_embeddings.values,
                                     &p.graphwise_query.query, &p.layerwise_query.query})
        for (double& v : *arr) v = detail::get_f32(in, path);
    return p;
}

}  // namespace cpgrec

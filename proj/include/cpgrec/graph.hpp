#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpgrec/data.hpp"

namespace cpgrec {

// Undirected weighted adjacency in compressed sparse row form. Column indices
// are strictly increasing within a row and self-loops are never stored; when
// `symmetric` is set, (a,b) is stored iff (b,a) is, with equal weight.
struct SparseGraph {
    std::size_t num_nodes = 0;
    std::vector<std::size_t> row_offsets;    // size num_nodes + 1
    std::vector<std::uint32_t> col_indices;
    std::vector<double> weights;
    bool symmetric = true;

    std::size_t degree(std::uint32_t node) const {
        return row_offsets[node + 1] - row_offsets[node];
    }
    std::span<const std::uint32_t> neighbors(std::uint32_t node) const {
        return {col_indices.data() + row_offsets[node], degree(node)};
    }
    std::span<const double> edge_weights(std::uint32_t node) const {
        return {weights.data() + row_offsets[node], degree(node)};
    }
    std::size_t stored_entries() const { return col_indices.size(); }
    std::size_t undirected_edge_count() const { return symmetric ? stored_entries() / 2 : stored_entries(); }

    bool has_edge(std::uint32_t a, std::uint32_t b) const {
        auto n = neighbors(a);
        return std::binary_search(n.begin(), n.end(), b);
    }

    static SparseGraph empty(std::size_t nodes) {
        SparseGraph g;
        g.num_nodes = nodes;
        g.row_offsets.assign(nodes + 1, 0);
        return g;
    }

    // Builds from undirected (a,b) pairs; both directions get stored with
    // weight 1, duplicates and self-loops dropped.
    static SparseGraph from_undirected_edges(std::size_t nodes,
                                             std::vector<std::pair<std::uint32_t, std::uint32_t>> edges) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> directed;
        directed.reserve(edges.size() * 2);
        for (auto [a, b] : edges) {
            if (a == b) continue;
            directed.emplace_back(a, b);
            directed.emplace_back(b, a);
        }
        std::sort(directed.begin(), directed.end());
        directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

        SparseGraph g;
        g.num_nodes = nodes;
        g.row_offsets.assign(nodes + 1, 0);
        for (auto& [a, b] : directed) ++g.row_offsets[a + 1];
        std::partial_sum(g.row_offsets.begin(), g.row_offsets.end(), g.row_offsets.begin());
        g.col_indices.reserve(directed.size());
        for (auto& [a, b] : directed) g.col_indices.push_back(b);
        g.weights.assign(directed.size(), 1.0);
        return g;
    }
};

// ---------------------------------------------------------------------------
// Game graphs

// Edge (i,j) iff the label sets of the chosen category intersect.
inline SparseGraph build_raw_graph(const GameCatalog& catalog, Category category) {
    const std::size_t n = catalog.num_games();
    const auto& labels = catalog.labels[static_cast<int>(category)];

    std::vector<std::vector<std::uint32_t>> by_label(catalog.num_labels(category));
    for (std::uint32_t g = 0; g < n; ++g)
        for (std::uint32_t l : labels[g]) by_label[l].push_back(g);

    // gather candidate co-labelled games per row, dedupe with an epoch stamp
    std::vector<std::uint32_t> stamp(n, UINT32_MAX);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t g = 0; g < n; ++g) {
        for (std::uint32_t l : labels[g]) {
            for (std::uint32_t other : by_label[l]) {
                if (other <= g || stamp[other] == g) continue;
                stamp[other] = g;
                edges.emplace_back(g, other);
            }
        }
    }
    return SparseGraph::from_undirected_edges(n, std::move(edges));
}

// Edge-set intersection of two symmetric graphs over the same node set.
inline SparseGraph intersect_graphs(const SparseGraph& a, const SparseGraph& b) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t i = 0; i < a.num_nodes; ++i) {
        auto na = a.neighbors(i);
        auto nb = b.neighbors(i);
        std::size_t x = 0, y = 0;
        while (x < na.size() && y < nb.size()) {
            if (na[x] == nb[y]) {
                if (na[x] > i) edges.emplace_back(i, na[x]);
                ++x, ++y;
            } else if (na[x] < nb[y]) {
                ++x;
            } else {
                ++y;
            }
        }
    }
    return SparseGraph::from_undirected_edges(a.num_nodes, std::move(edges));
}

// Strict cross-category graph: games connected iff they share labels in both
// categories. Computed as the intersection of the two raw graphs, which keeps
// a single construction path and makes the intersection law testable.
inline SparseGraph build_strict_graph(const GameCatalog& catalog, Category a, Category b) {
    if (a == b) throw ConfigError("strict graph needs two distinct categories");
    return intersect_graphs(build_raw_graph(catalog, a), build_raw_graph(catalog, b));
}

inline SparseGraph connectivity_from_raw(const SparseGraph& genre, const SparseGraph& developer,
                                         const SparseGraph& publisher) {
    const std::size_t n = genre.num_nodes;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::vector<std::uint8_t> count(n, 0);
    std::vector<std::uint32_t> touched;
    for (std::uint32_t i = 0; i < n; ++i) {
        touched.clear();
        for (const SparseGraph* g : {&genre, &developer, &publisher}) {
            for (std::uint32_t j : g->neighbors(i)) {
                if (j <= i) continue;
                if (count[j]++ == 0) touched.push_back(j);
            }
        }
        for (std::uint32_t j : touched) {
            if (count[j] == 1) edges.emplace_back(i, j);
            count[j] = 0;
        }
    }
    return SparseGraph::from_undirected_edges(n, std::move(edges));
}

// Edge (i,j) iff exactly one of the three category types has intersecting
// label sets; neighbors therefore diverge in the other two categories.
inline SparseGraph build_connectivity_graph(const GameCatalog& catalog) {
    return connectivity_from_raw(build_raw_graph(catalog, Category::genre),
                                 build_raw_graph(catalog, Category::developer),
                                 build_raw_graph(catalog, Category::publisher));
}

// ---------------------------------------------------------------------------
// Player-game bipartite graph

// Users occupy node ids [0, num_users), games [num_users, num_users+num_games).
struct BipartiteGraph {
    std::size_t num_users = 0;
    std::size_t num_games = 0;
    SparseGraph adjacency;

    std::uint32_t game_node(std::uint32_t game) const {
        return static_cast<std::uint32_t>(num_users) + game;
    }
    std::size_t user_degree(std::uint32_t user) const { return adjacency.degree(user); }
    std::size_t game_degree(std::uint32_t game) const { return adjacency.degree(game_node(game)); }
    // columns of a user row are game *node* ids (subtract num_users for the game index)
    std::span<const std::uint32_t> user_row(std::uint32_t user) const {
        return adjacency.neighbors(user);
    }
    // columns of a game row are user ids
    std::span<const std::uint32_t> game_row(std::uint32_t game) const {
        return adjacency.neighbors(game_node(game));
    }
};

inline BipartiteGraph build_bipartite(const InteractionLog& train) {
    if (train.num_pairs() == 0) throw ValidationError("cannot build bipartite graph from an empty log");
    BipartiteGraph bg;
    bg.num_users = train.num_users();
    bg.num_games = train.num_games;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    edges.reserve(train.num_pairs());
    const auto offset = static_cast<std::uint32_t>(bg.num_users);
    for (const auto& [u, g] : train.pairs) edges.emplace_back(u, offset + g);
    bg.adjacency = SparseGraph::from_undirected_edges(bg.num_users + bg.num_games, std::move(edges));
    return bg;
}

// ---------------------------------------------------------------------------
// Popularity

// Top/bottom quantile of games by distinct-player count in the training log.
// Ties break by ascending game index so the boundary is reproducible.
struct PopularitySets {
    std::vector<std::uint32_t> hot;   // sorted game indices
    std::vector<std::uint32_t> cold;  // sorted game indices
    std::vector<std::uint32_t> player_count;
    std::vector<std::int8_t> flag;    // 1 hot, -1 cold, 0 neither

    bool is_hot(std::uint32_t game) const { return flag[game] == 1; }
    bool is_cold(std::uint32_t game) const { return flag[game] == -1; }
};

inline PopularitySets popularity_sets(const InteractionLog& train, double quantile = 0.2) {
    if (!(quantile > 0 && quantile < 0.5)) throw ConfigError("popularity quantile must be in (0, 0.5)");
    const std::size_t n = train.num_games;
    PopularitySets pop;
    pop.player_count.assign(n, 0);
    for (const auto& [u, g] : train.pairs) ++pop.player_count[g];  // pairs are distinct

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (pop.player_count[a] != pop.player_count[b]) return pop.player_count[a] > pop.player_count[b];
        return a < b;
    });

    const std::size_t take = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(n)));
    pop.flag.assign(n, 0);
    pop.hot.assign(order.begin(), order.begin() + take);
    pop.cold.assign(order.end() - take, order.end());
    std::sort(pop.hot.begin(), pop.hot.end());
    std::sort(pop.cold.begin(), pop.cold.end());
    for (std::uint32_t g : pop.hot) pop.flag[g] = 1;
    for (std::uint32_t g : pop.cold) pop.flag[g] = -1;
    return pop;
}

struct ThetaConfig {
    double theta_e_hot = 30.0;
    double theta_n_hot = 0.5;
    double theta_n_cold = 5.0;

    void validate() const {
        if (theta_e_hot <= 0 || theta_n_hot <= 0 || theta_n_cold <= 0)
            throw ConfigError("theta weights must be strictly positive");
    }

    static ThetaConfig unit() { return {1.0, 1.0, 1.0}; }
};

// Edge weight mapping: boosts edges emanating from popular games.
inline double theta_e(std::uint32_t game, const PopularitySets& pop, const ThetaConfig& cfg) {
    return pop.is_hot(game) ? cfg.theta_e_hot : 1.0;
}

// Node weight mapping: damps popular-game embeddings, amplifies long-tail ones.
inline double theta_n(std::uint32_t game, const PopularitySets& pop, const ThetaConfig& cfg) {
    if (pop.is_hot(game)) return cfg.theta_n_hot;
    if (pop.is_cold(game)) return cfg.theta_n_cold;
    return 1.0;
}

// ---------------------------------------------------------------------------
// Export

// Edge-list text: one `# nodes=<n> symmetric=<0|1>` header line, then
// `src,dst,weight` rows (each undirected edge once, src < dst when symmetric).
inline void write_graph_edges(const SparseGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "# nodes=" << g.num_nodes << " symmetric=" << (g.symmetric ? 1 : 0) << '\n';
    out.precision(17);
    for (std::uint32_t i = 0; i < g.num_nodes; ++i) {
        auto cols = g.neighbors(i);
        auto w = g.edge_weights(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (g.symmetric && cols[k] < i) continue;
            out << i << ',' << cols[k] << ',' << w[k] << '\n';
        }
    }
}

inline SparseGraph read_graph_edges(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path, 1, "missing graph header");
    std::size_t nodes = 0;
    int symmetric = 1;
    if (std::sscanf(line.c_str(), "# nodes=%zu symmetric=%d", &nodes, &symmetric) != 2)
        throw ParseError(path, 1, "malformed graph header");

    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::vector<double> edge_weights;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        std::string t = csv::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::uint32_t a, b;
        double w;
        if (std::sscanf(t.c_str(), "%u,%u,%lf", &a, &b, &w) != 3)
            throw ParseError(path, line_number, "malformed edge row");
        edges.emplace_back(a, b);
        edge_weights.push_back(w);
    }
    // Rebuild CSR; weights are reattached by lookup since from_undirected_edges
    // normalizes ordering.
    SparseGraph g = SparseGraph::from_undirected_edges(nodes, edges);
    g.symmetric = symmetric != 0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [a, b] = edges[e];
        for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
            auto cols = g.neighbors(x);
            auto it = std::lower_bound(cols.begin(), cols.end(), y);
            if (it != cols.end() && *it == y)
                g.weights[g.row_offsets[x] + static_cast<std::size_t>(it - cols.begin())] =
                    edge_weights[e];
        }
    }
    return g;
}

}  // namespace cpgrec

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpgrec/model.hpp"

namespace cpgrec {

// ---------------------------------------------------------------------------
// Top-K recommendation

// Highest-scoring games for one user, excluding the user's training
// interactions. Scores are inner products of the fused embeddings; ties break
// by ascending game index. Returns fewer than K entries when fewer games are
// eligible.
inline std::vector<std::uint32_t> recommend_topk(const EmbeddingTable& users,
                                                 const EmbeddingTable& games, std::uint32_t user,
                                                 std::size_t K, const UserGameIndex& train_index) {
    auto mask = train_index.games_of(user);
    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(games.rows - mask.size());
    auto u = users.row(user);
    for (std::uint32_t g = 0; g < games.rows; ++g) {
        if (std::binary_search(mask.begin(), mask.end(), g)) continue;
        scored.emplace_back(dot(u, games.row(g)), g);
    }
    const std::size_t take = std::min(K, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });
    std::vector<std::uint32_t> out(take);
    for (std::size_t r = 0; r < take; ++r) out[r] = scored[r].second;
    return out;
}

// Convenience overload that runs the full forward pass first.
inline std::vector<std::uint32_t> recommend_topk(const ModelParams& params, const GraphSet& graphs,
                                                 const Hyperparams& hp, std::uint32_t user,
                                                 std::size_t K, const UserGameIndex& train_index) {
    ForwardPass fp = forward_all(params, graphs, hp);
    return recommend_topk(fp.users, fp.games, user, K, train_index);
}

// Ordered top-K lists for every user, indexed by user.
struct Recommendations {
    std::size_t K = 0;
    std::vector<std::vector<std::uint32_t>> items;
};

inline Recommendations recommend_all(const EmbeddingTable& users, const EmbeddingTable& games,
                                     std::size_t K, const UserGameIndex& train_index) {
    Recommendations recs;
    recs.K = K;
    recs.items.resize(users.rows);
    parallel_for(users.rows, [&](std::size_t u) {
        recs.items[u] = recommend_topk(users, games, static_cast<std::uint32_t>(u), K, train_index);
    });
    return recs;
}

// ---------------------------------------------------------------------------
// Per-user metrics

struct RankingMetrics {
    double ndcg = 0, recall = 0, hit = 0, precision = 0;
};

// Binary-relevance ranking metrics against the user's held-out games.
// DCG sums 1/log2(rank+1) over hits; IDCG assumes the first min(K, |test|)
// ranks are all hits.
inline RankingMetrics ranking_metrics(std::span<const std::uint32_t> rec,
                                      std::span<const std::uint32_t> test_games, std::size_t K) {
    RankingMetrics m;
    const std::size_t upto = std::min(K, rec.size());
    std::size_t hits = 0;
    double dcg = 0;
    for (std::size_t r = 0; r < upto; ++r) {
        if (std::binary_search(test_games.begin(), test_games.end(), rec[r])) {
            ++hits;
            dcg += 1.0 / std::log2(static_cast<double>(r + 2));
        }
    }
    double idcg = 0;
    const std::size_t ideal = std::min(K, test_games.size());
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r + 2));
    m.ndcg = idcg > 0 ? dcg / idcg : 0.0;
    m.recall = test_games.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(test_games.size());
    m.hit = hits > 0 ? 1.0 : 0.0;
    m.precision = static_cast<double>(hits) / static_cast<double>(K);
    return m;
}

struct CoverageMetrics {
    double genre = 0, developer = 0, publisher = 0, total = 0;
};

// Distinct label counts per category over the union of the top-K games'
// label sets.
inline CoverageMetrics coverage_at_k(std::span<const std::uint32_t> rec,
                                     const GameCatalog& catalog, std::size_t K) {
    CoverageMetrics cm;
    double* out[3] = {&cm.genre, &cm.developer, &cm.publisher};
    const std::size_t upto = std::min(K, rec.size());
    std::vector<std::uint32_t> seen;
    for (int c = 0; c < 3; ++c) {
        seen.clear();
        for (std::size_t r = 0; r < upto; ++r)
            for (std::uint32_t l : catalog.game_labels(Category(c), rec[r])) seen.push_back(l);
        std::sort(seen.begin(), seen.end());
        *out[c] = static_cast<double>(
            std::unique(seen.begin(), seen.end()) - seen.begin());
    }
    cm.total = cm.genre + cm.developer + cm.publisher;
    return cm;
}

// Shannon entropy of the label multiset over the top-K games: each game
// contributes each of its labels of the given category once. Natural log by
// default; zero for an empty multiset.
inline double entropy_at_k(std::span<const std::uint32_t> rec, const GameCatalog& catalog,
                           std::size_t K, Category category, bool use_log2 = false) {
    std::unordered_map<std::uint32_t, std::size_t> counts;
    const std::size_t upto = std::min(K, rec.size());
    std::size_t total = 0;
    for (std::size_t r = 0; r < upto; ++r) {
        for (std::uint32_t l : catalog.game_labels(category, rec[r])) {
            ++counts[l];
            ++total;
        }
    }
    if (total == 0) return 0.0;
    double h = 0;
    for (const auto& [l, n] : counts) {
        const double p = static_cast<double>(n) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return use_log2 ? h / std::log(2.0) : h;
}

// ---------------------------------------------------------------------------
// Aggregated evaluation

struct MetricsRow {
    std::size_t k = 0;
    double ndcg = 0, recall = 0, hit = 0, precision = 0;
    double coverage_genre = 0, coverage_developer = 0, coverage_publisher = 0, coverage_total = 0;
    double entropy_genre = 0, entropy_developer = 0, entropy_publisher = 0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;  // one per K
    std::size_t evaluated_users = 0;
};

// Averages every metric over the users with at least one interaction in
// `target` (the "evaluated users"); recommendations mask `train_index`.
inline MetricsReport evaluate_against(const EmbeddingTable& users, const EmbeddingTable& games,
                                      const UserGameIndex& train_index,
                                      const UserGameIndex& target_index,
                                      const GameCatalog& catalog,
                                      std::vector<std::size_t> Ks = {5, 10},
                                      bool entropy_log2 = false) {
    if (train_index.num_users() != users.rows || target_index.num_users() != users.rows)
        throw std::invalid_argument("interaction indices do not cover the user table");
    std::sort(Ks.begin(), Ks.end());
    const std::size_t k_max = Ks.back();

    std::vector<std::uint32_t> evaluated;
    for (std::uint32_t u = 0; u < users.rows; ++u)
        if (target_index.degree(u) > 0) evaluated.push_back(u);
    if (evaluated.empty()) throw ValidationError("no users with held-out interactions to evaluate");

    // per-user rows first (parallel), then a fixed-order reduction
    std::vector<std::vector<MetricsRow>> per_user(evaluated.size());
    parallel_for(evaluated.size(), [&](std::size_t idx) {
        const std::uint32_t u = evaluated[idx];
        auto rec = recommend_topk(users, games, u, k_max, train_index);
        auto test_games = target_index.games_of(u);
        auto& rows = per_user[idx];
        rows.resize(Ks.size());
        for (std::size_t ki = 0; ki < Ks.size(); ++ki) {
            const std::size_t K = Ks[ki];
            std::span<const std::uint32_t> prefix{rec.data(), std::min(K, rec.size())};
            RankingMetrics rm = ranking_metrics(prefix, test_games, K);
            CoverageMetrics cm = coverage_at_k(prefix, catalog, K);
            MetricsRow& row = rows[ki];
            row.k = K;
            row.ndcg = rm.ndcg;
            row.recall = rm.recall;
            row.hit = rm.hit;
            row.precision = rm.precision;
            row.coverage_genre = cm.genre;
            row.coverage_developer = cm.developer;
            row.coverage_publisher = cm.publisher;
            row.coverage_total = cm.total;
            row.entropy_genre = entropy_at_k(prefix, catalog, K, Category::genre, entropy_log2);
            row.entropy_developer =
                entropy_at_k(prefix, catalog, K, Category::developer, entropy_log2);
            row.entropy_publisher =
                entropy_at_k(prefix, catalog, K, Category::publisher, entropy_log2);
        }
    });

    MetricsReport report;
    report.evaluated_users = evaluated.size();
    report.rows.resize(Ks.size());
    for (std::size_t ki = 0; ki < Ks.size(); ++ki) report.rows[ki].k = Ks[ki];
    const double inv = 1.0 / static_cast<double>(evaluated.size());
    for (const auto& rows : per_user) {
        for (std::size_t ki = 0; ki < Ks.size(); ++ki) {
            MetricsRow& acc = report.rows[ki];
            const MetricsRow& r = rows[ki];
            acc.ndcg += r.ndcg * inv;
            acc.recall += r.recall * inv;
            acc.hit += r.hit * inv;
            acc.precision += r.precision * inv;
            acc.coverage_genre += r.coverage_genre * inv;
            acc.coverage_developer += r.coverage_developer * inv;
            acc.coverage_publisher += r.coverage_publisher * inv;
            acc.coverage_total += r.coverage_total * inv;
            acc.entropy_genre += r.entropy_genre * inv;
            acc.entropy_developer += r.entropy_developer * inv;
            acc.entropy_publisher += r.entropy_publisher * inv;
        }
    }
    return report;
}

inline MetricsReport evaluate(const ModelParams& params, const GraphSet& graphs,
                              const SplitLog& split, const GameCatalog& catalog,
                              const Hyperparams& hp, std::vector<std::size_t> Ks = {5, 10}) {
    ForwardPass fp = forward_all(params, graphs, hp);
    return evaluate_against(fp.users, fp.games, UserGameIndex::build(split.train),
                            UserGameIndex::build(split.test), catalog, std::move(Ks));
}

inline void write_metrics_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "k,ndcg,recall,hit,precision,coverage_genre,coverage_developer,coverage_publisher,"
           "coverage_total,entropy_genre,entropy_developer,entropy_publisher\n";
    out.precision(10);
    for (const auto& r : report.rows)
        out << r.k << ',' << r.ndcg << ',' << r.recall << ',' << r.hit << ',' << r.precision << ','
            << r.coverage_genre << ',' << r.coverage_developer << ',' << r.coverage_publisher << ','
            << r.coverage_total << ',' << r.entropy_genre << ',' << r.entropy_developer << ','
            << r.entropy_publisher << '\n';
}

// ---------------------------------------------------------------------------
// Case-study instrumentation

// Mean number of long-tail games inside the top-K lists of evaluated users.
inline double longtail_exposure(const EmbeddingTable& users, const EmbeddingTable& games,
                                const UserGameIndex& train_index, const UserGameIndex& test_index,
                                const PopularitySets& pop, std::size_t K) {
    std::size_t evaluated = 0, cold_hits = 0;
    for (std::uint32_t u = 0; u < users.rows; ++u) {
        if (test_index.degree(u) == 0) continue;
        ++evaluated;
        for (std::uint32_t g : recommend_topk(users, games, u, K, train_index))
            if (pop.is_cold(g)) ++cold_hits;
    }
    if (evaluated == 0) return 0.0;
    return static_cast<double>(cold_hits) / static_cast<double>(evaluated);
}

// The "deceptive" games of a run: games most frequently recommended to a user
// sample without being held-out positives. Built from a model trained without
// negative-score reweighting.
inline std::vector<std::uint32_t> build_deceptive_set(const EmbeddingTable& users,
                                                      const EmbeddingTable& games,
                                                      const UserGameIndex& train_index,
                                                      const UserGameIndex& test_index, Rng& rng,
                                                      std::size_t K = 5,
                                                      double sample_fraction = 0.25,
                                                      std::size_t count = 10) {
    std::vector<std::uint32_t> sample(users.rows);
    std::iota(sample.begin(), sample.end(), 0);
    rng.shuffle(sample);
    sample.resize(std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(sample_fraction * static_cast<double>(users.rows)))));

    std::vector<std::size_t> freq(games.rows, 0);
    for (std::uint32_t u : sample)
        for (std::uint32_t g : recommend_topk(users, games, u, K, train_index))
            if (!test_index.contains(u, g)) ++freq[g];

    std::vector<std::uint32_t> order(games.rows);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (freq[a] != freq[b]) return freq[a] > freq[b];
        return a < b;
    });
    std::vector<std::uint32_t> out;
    for (std::uint32_t g : order) {
        if (out.size() >= count || freq[g] == 0) break;
        out.push_back(g);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Mean count, over all users, of deceptive games inside the top-K list that
// are not held-out positives of that user.
inline double deceptive_frequency(const EmbeddingTable& users, const EmbeddingTable& games,
                                  const UserGameIndex& train_index,
                                  const UserGameIndex& test_index,
                                  std::span<const std::uint32_t> deceptive, std::size_t K) {
    if (users.rows == 0) return 0.0;
    std::size_t total = 0;
    for (std::uint32_t u = 0; u < users.rows; ++u) {
        for (std::uint32_t g : recommend_topk(users, games, u, K, train_index)) {
            if (std::binary_search(deceptive.begin(), deceptive.end(), g) &&
                !test_index.contains(u, g))
                ++total;
        }
    }
    return static_cast<double>(total) / static_cast<double>(users.rows);
}

}  // namespace cpgrec

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cpgrec/csv.hpp"
#include "cpgrec/rng.hpp"

namespace cpgrec {

enum class Category : int { genre = 0, developer = 1, publisher = 2 };

inline constexpr std::array<Category, 3> kCategories = {Category::genre, Category::developer,
                                                        Category::publisher};

inline const char* category_name(Category c) {
    switch (c) {
        case Category::genre: return "genre";
        case Category::developer: return "developer";
        default: return "publisher";
    }
}

// Games with dense indices and, per category, interned label ids sorted
// ascending per game. Label names are kept for reporting and round-trips.
struct GameCatalog {
    std::vector<std::string> game_ids;
    // label_names[c] maps label id -> display name
    std::array<std::vector<std::string>, 3> label_names;
    // labels[c][game] is a sorted vector of label ids
    std::array<std::vector<std::vector<std::uint32_t>>, 3> labels;

    std::size_t num_games() const { return game_ids.size(); }
    std::size_t num_labels(Category c) const { return label_names[static_cast<int>(c)].size(); }

    const std::vector<std::uint32_t>& game_labels(Category c, std::uint32_t game) const {
        return labels[static_cast<int>(c)][game];
    }

    std::uint32_t intern_label(Category c, const std::string& name) {
        auto& names = label_names[static_cast<int>(c)];
        for (std::uint32_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        names.push_back(name);
        return static_cast<std::uint32_t>(names.size() - 1);
    }

    void add_game(const std::string& id, const std::vector<std::string>& genres,
                  const std::vector<std::string>& developers,
                  const std::vector<std::string>& publishers) {
        game_ids.push_back(id);
        const std::array<const std::vector<std::string>*, 3> in = {&genres, &developers,
                                                                   &publishers};
        for (int c = 0; c < 3; ++c) {
            std::vector<std::uint32_t> ids;
            ids.reserve(in[c]->size());
            for (const auto& name : *in[c]) ids.push_back(intern_label(Category(c), name));
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            labels[c].push_back(std::move(ids));
        }
    }
};

inline bool label_sets_intersect(const std::vector<std::uint32_t>& a,
                                 const std::vector<std::uint32_t>& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return true;
        if (a[i] < b[j]) ++i; else ++j;
    }
    return false;
}

// Deduplicated (user, game) interaction pairs over dense indices.
struct InteractionLog {
    std::vector<std::string> user_ids;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // sorted (user, game)
    std::size_t num_games = 0;

    std::size_t num_users() const { return user_ids.size(); }
    std::size_t num_pairs() const { return pairs.size(); }

    void sort_pairs() { std::sort(pairs.begin(), pairs.end()); }
};

struct SplitLog {
    InteractionLog train, val, test;
};

// CSR view of a log: sorted game list per user, for masking and membership
// tests.
struct UserGameIndex {
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> games;

    static UserGameIndex build(const InteractionLog& log) {
        UserGameIndex idx;
        idx.offsets.assign(log.num_users() + 1, 0);
        for (const auto& [u, g] : log.pairs) ++idx.offsets[u + 1];
        for (std::size_t u = 0; u < log.num_users(); ++u) idx.offsets[u + 1] += idx.offsets[u];
        idx.games.resize(log.num_pairs());
        std::vector<std::size_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
        for (const auto& [u, g] : log.pairs) idx.games[cursor[u]++] = g;
        for (std::size_t u = 0; u < log.num_users(); ++u)
            std::sort(idx.games.begin() + idx.offsets[u], idx.games.begin() + idx.offsets[u + 1]);
        return idx;
    }

    std::size_t num_users() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t degree(std::uint32_t user) const { return offsets[user + 1] - offsets[user]; }

    std::span<const std::uint32_t> games_of(std::uint32_t user) const {
        return {games.data() + offsets[user], degree(user)};
    }

    bool contains(std::uint32_t user, std::uint32_t game) const {
        auto g = games_of(user);
        return std::binary_search(g.begin(), g.end(), game);
    }
};

struct SynthConfig {
    std::size_t num_users = 1000;
    std::size_t num_games = 200;
    std::size_t num_genres = 12;
    std::size_t num_developers = 40;
    std::size_t num_publishers = 25;
    double zipf_exponent = 1.0;
    std::size_t interactions_per_user = 20;  // mean; per-user counts vary around it
    std::uint64_t seed = 42;
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline std::vector<std::string> parse_label_cell(const std::string& cell) {
    std::vector<std::string> out;
    for (auto& part : csv::split(cell, ';')) {
        std::string t = csv::trim(part);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace detail

// Catalog CSV: header `game_id,genres,developers,publishers`, `;`-separated
// multi-valued cells, `#` comment lines.
inline GameCatalog load_catalog(const std::string& path) {
    GameCatalog catalog;
    std::unordered_map<std::string, std::size_t> seen;
    auto header = csv::for_each_row(path, ',', [&](const std::vector<std::string>& fields,
                                                   std::size_t line) {
        if (fields.size() < 4)
            throw ParseError(path, line, "expected 4 columns (game_id,genres,developers,publishers), got " +
                                             std::to_string(fields.size()));
        std::string id = csv::trim(fields[0]);
        if (id.empty()) throw ParseError(path, line, "empty game_id");
        if (!seen.emplace(id, line).second)
            throw ParseError(path, line, "duplicate game id '" + id + "'");
        catalog.add_game(id, detail::parse_label_cell(fields[1]), detail::parse_label_cell(fields[2]),
                         detail::parse_label_cell(fields[3]));
    });
    if (header.size() < 4 || csv::trim(header[0]) != "game_id")
        throw ValidationError(path + ": missing catalog header 'game_id,genres,developers,publishers'");
    for (Category c : kCategories) {
        if (catalog.num_labels(c) == 0 && catalog.num_games() > 0)
            throw ValidationError(path + ": no game carries any " + category_name(c) + " label");
    }
    return catalog;
}

// Interactions CSV: header `user_id,game_id`; extra columns ignored.
inline InteractionLog load_interactions(const std::string& path, const GameCatalog& catalog) {
    std::unordered_map<std::string, std::uint32_t> game_index;
    game_index.reserve(catalog.num_games());
    for (std::uint32_t i = 0; i < catalog.num_games(); ++i) game_index.emplace(catalog.game_ids[i], i);

    InteractionLog log;
    log.num_games = catalog.num_games();
    std::unordered_map<std::string, std::uint32_t> user_index;
    auto header = csv::for_each_row(path, ',', [&](const std::vector<std::string>& fields,
                                                   std::size_t line) {
        if (fields.size() < 2)
            throw ParseError(path, line, "expected at least 2 columns (user_id,game_id)");
        std::string uid = csv::trim(fields[0]);
        std::string gid = csv::trim(fields[1]);
        if (uid.empty() || gid.empty()) throw ParseError(path, line, "empty user or game id");
        auto g = game_index.find(gid);
        if (g == game_index.end())
            throw ParseError(path, line, "unknown game id '" + gid + "'");
        auto [it, fresh] = user_index.emplace(uid, static_cast<std::uint32_t>(log.user_ids.size()));
        if (fresh) log.user_ids.push_back(uid);
        log.pairs.emplace_back(it->second, g->second);
    });
    if (!header.empty() && (header.size() < 2 || csv::trim(header[0]) != "user_id"))
        throw ValidationError(path + ": missing interactions header 'user_id,game_id'");
    log.sort_pairs();
    log.pairs.erase(std::unique(log.pairs.begin(), log.pairs.end()), log.pairs.end());
    return log;
}

// ---------------------------------------------------------------------------
// Filtering and splitting

// Drops users with fewer than k interactions and re-densifies user indices.
// Single pass over users only: games are intentionally never removed, so
// low-engagement games stay in the catalog.
inline InteractionLog apply_user_kcore(const InteractionLog& log, std::size_t k) {
    if (k < 1) throw ConfigError("k-core threshold must be >= 1");
    std::vector<std::size_t> counts(log.num_users(), 0);
    for (const auto& [u, g] : log.pairs) ++counts[u];

    std::vector<std::uint32_t> remap(log.num_users(), UINT32_MAX);
    InteractionLog out;
    out.num_games = log.num_games;
    for (std::uint32_t u = 0; u < log.num_users(); ++u) {
        if (counts[u] >= k) {
            remap[u] = static_cast<std::uint32_t>(out.user_ids.size());
            out.user_ids.push_back(log.user_ids[u]);
        }
    }
    out.pairs.reserve(log.num_pairs());
    for (const auto& [u, g] : log.pairs)
        if (remap[u] != UINT32_MAX) out.pairs.emplace_back(remap[u], g);
    out.sort_pairs();
    return out;
}

struct SplitRatios {
    double train = 0.8, val = 0.1, test = 0.1;
};

// Per-user stratified split: each user's pairs are shuffled, the first
// ceil(train*n) (at least one) go to train, then up to floor(val*n) to val,
// and the remainder to test. Users with few interactions may end up with
// empty val/test slices.
inline SplitLog split_interactions(const InteractionLog& log, SplitRatios ratios,
                                   std::uint64_t seed) {
    if (ratios.train <= 0 || ratios.val < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be positive and sum to 1");

    SplitLog split;
    for (InteractionLog* part : {&split.train, &split.val, &split.test}) {
        part->user_ids = log.user_ids;
        part->num_games = log.num_games;
    }

    std::vector<std::vector<std::uint32_t>> per_user(log.num_users());
    for (const auto& [u, g] : log.pairs) per_user[u].push_back(g);

    Rng rng(seed, "split");
    for (std::uint32_t u = 0; u < log.num_users(); ++u) {
        auto& games = per_user[u];
        rng.shuffle(games);
        const std::size_t n = games.size();
        const std::size_t n_train = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(ratios.train * static_cast<double>(n))));
        const std::size_t n_val = std::min(
            n - std::min(n, n_train),
            static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n))));
        for (std::size_t i = 0; i < n; ++i) {
            InteractionLog& dst =
                i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
            dst.pairs.emplace_back(u, games[i]);
        }
    }
    split.train.sort_pairs();
    split.val.sort_pairs();
    split.test.sort_pairs();
    return split;
}

// ---------------------------------------------------------------------------
// Synthetic data

// Catalog with one genre/developer/publisher per game, game popularity
// following a Zipf law on the game index, and users drawing games without
// replacement proportionally to popularity with a 0.7 bias toward one
// preferred genre. Deterministic given the seed.
inline std::pair<GameCatalog, InteractionLog> generate_synthetic(const SynthConfig& cfg) {
    if (cfg.num_users < 1 || cfg.num_games < 1 || cfg.num_genres < 1 || cfg.num_developers < 1 ||
        cfg.num_publishers < 1)
        throw ConfigError("synthetic counts must all be >= 1");
    if (cfg.zipf_exponent <= 0) throw ConfigError("zipf_exponent must be > 0");
    // A user never interacts with the whole catalog, so every user keeps at
    // least one candidate negative. The single-game catalog is the degenerate
    // exception: each user gets exactly that game.
    if (cfg.num_games > 1 && cfg.interactions_per_user >= cfg.num_games)
        throw ConfigError("interactions_per_user must be smaller than num_games");

    auto tag = [](const char* prefix, std::size_t i, int width) {
        std::string n = std::to_string(i);
        std::string out(prefix);
        out.append(static_cast<std::size_t>(std::max(0, width - static_cast<int>(n.size()))), '0');
        return out + n;
    };

    Rng rng(cfg.seed, "synth");
    GameCatalog catalog;
    std::vector<std::uint32_t> genre_of(cfg.num_games);
    for (std::size_t g = 0; g < cfg.num_games; ++g) {
        genre_of[g] = static_cast<std::uint32_t>(rng.next_below(cfg.num_genres));
        const auto dev = rng.next_below(cfg.num_developers);
        const auto pub = rng.next_below(cfg.num_publishers);
        catalog.add_game(tag("g", g, 4), {tag("genre", genre_of[g], 2)}, {tag("dev", dev, 3)},
                         {tag("pub", pub, 3)});
    }

    // popularity ~ 1/(rank+1)^s with rank = game index
    std::vector<double> weight(cfg.num_games);
    for (std::size_t g = 0; g < cfg.num_games; ++g)
        weight[g] = std::pow(static_cast<double>(g + 1), -cfg.zipf_exponent);

    std::vector<std::vector<std::uint32_t>> genre_games(cfg.num_genres);
    for (std::uint32_t g = 0; g < cfg.num_games; ++g) genre_games[genre_of[g]].push_back(g);

    InteractionLog log;
    log.num_games = cfg.num_games;
    const std::size_t mean = cfg.interactions_per_user;
    const std::size_t hi =
        cfg.num_games == 1 ? 1 : std::min(cfg.num_games - 1, mean + mean / 2);
    const std::size_t lo = std::min(hi, std::max<std::size_t>(1, mean - mean / 2));

    std::vector<double> live(cfg.num_games);  // per-user remaining weights
    for (std::uint32_t u = 0; u < cfg.num_users; ++u) {
        log.user_ids.push_back(tag("u", u, 5));
        const std::uint32_t preferred = static_cast<std::uint32_t>(rng.next_below(cfg.num_genres));
        const std::size_t wanted = lo + static_cast<std::size_t>(rng.next_below(hi - lo + 1));

        live = weight;
        double total = 0;
        for (double w : live) total += w;
        double genre_total = 0;
        for (std::uint32_t g : genre_games[preferred]) genre_total += live[g];

        for (std::size_t draw = 0; draw < wanted && total > 0; ++draw) {
            const bool use_genre = genre_total > 1e-12 && rng.next_bernoulli(0.7);
            std::uint32_t picked = 0;
            if (use_genre) {
                double target = rng.next_double() * genre_total;
                double acc = 0;
                picked = genre_games[preferred].back();
                for (std::uint32_t g : genre_games[preferred]) {
                    acc += live[g];
                    if (acc >= target && live[g] > 0) { picked = g; break; }
                }
            } else {
                double target = rng.next_double() * total;
                double acc = 0;
                picked = static_cast<std::uint32_t>(cfg.num_games - 1);
                for (std::uint32_t g = 0; g < cfg.num_games; ++g) {
                    acc += live[g];
                    if (acc >= target && live[g] > 0) { picked = g; break; }
                }
            }
            total -= live[picked];
            if (genre_of[picked] == preferred) genre_total -= live[picked];
            live[picked] = 0;
            log.pairs.emplace_back(u, picked);
        }
    }
    log.sort_pairs();
    return {std::move(catalog), std::move(log)};
}

// ---------------------------------------------------------------------------
// Writing

inline void write_catalog_csv(const GameCatalog& catalog, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "game_id,genres,developers,publishers\n";
    for (std::uint32_t g = 0; g < catalog.num_games(); ++g) {
        out << catalog.game_ids[g];
        for (Category c : kCategories) {
            out << ',';
            const auto& ids = catalog.game_labels(c, g);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (i) out << ';';
                out << catalog.label_names[static_cast<int>(c)][ids[i]];
            }
        }
        out << '\n';
    }
}

inline void write_interactions_csv(const InteractionLog& log, const GameCatalog& catalog,
                                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "user_id,game_id\n";
    for (const auto& [u, g] : log.pairs) out << log.user_ids[u] << ',' << catalog.game_ids[g] << '\n';
}

}  // namespace cpgrec

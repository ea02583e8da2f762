#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "cpgrec/cpgrec.hpp"
#include "oracles.hpp"

using namespace cpgrec;

namespace {

UserGameIndex index_of(std::size_t users, std::size_t games,
                       std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
    InteractionLog log;
    log.num_games = games;
    for (std::size_t u = 0; u < users; ++u) log.user_ids.push_back("u" + std::to_string(u));
    log.pairs = std::move(pairs);
    log.sort_pairs();
    return UserGameIndex::build(log);
}

}  // namespace

TEST_CASE("top-K masks training interactions and handles short lists") {
    EmbeddingTable users(1, 2), games(3, 2);
    users.row(0)[0] = 1;
    games.row(0)[0] = 5;  // trained on: must never appear
    games.row(1)[0] = 2;
    games.row(2)[0] = 3;
    UserGameIndex train = index_of(1, 3, {{0, 0}});

    auto rec = recommend_topk(users, games, 0, 5, train);
    REQUIRE(rec == std::vector<std::uint32_t>{2, 1});  // short list, scores 3 > 2

    SECTION("equal scores break ties by index") {
        games.row(1)[0] = 3;
        auto tied = recommend_topk(users, games, 0, 2, train);
        CHECK(tied == std::vector<std::uint32_t>{1, 2});
    }
}

TEST_CASE("top-K equals a full-sort reference") {
    std::mt19937_64 rng(61);
    for (int round = 0; round < 20; ++round) {
        const std::size_t nu = 1 + rng() % 12, ng = 2 + rng() % 40, dim = 1 + rng() % 6;
        EmbeddingTable users = oracle::random_table(rng, nu, dim);
        EmbeddingTable games = oracle::random_table(rng, ng, dim);
        InteractionLog log = oracle::random_log(rng, nu, ng, 0.2);
        UserGameIndex train = UserGameIndex::build(log);
        const std::size_t K = 1 + rng() % 12;

        for (std::uint32_t u = 0; u < nu; ++u) {
            auto got = recommend_topk(users, games, u, K, train);
            // full sort of all eligible games
            std::vector<std::pair<double, std::uint32_t>> all;
            for (std::uint32_t g = 0; g < ng; ++g)
                if (!train.contains(u, g)) all.emplace_back(dot(users.row(u), games.row(g)), g);
            std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            REQUIRE(got.size() == std::min(K, all.size()));
            for (std::size_t r = 0; r < got.size(); ++r) REQUIRE(got[r] == all[r].second);
            for (std::uint32_t g : got) REQUIRE_FALSE(train.contains(u, g));
        }
    }
}

TEST_CASE("ranking metrics worked examples") {
    SECTION("single test item at rank 1") {
        std::vector<std::uint32_t> rec{4, 1, 2, 3, 0};
        std::vector<std::uint32_t> test{4};
        RankingMetrics m = ranking_metrics(rec, test, 5);
        CHECK(m.ndcg == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.hit == 1.0);
        CHECK(m.precision == Catch::Approx(0.2));
    }
    SECTION("one of two test items at rank 2") {
        std::vector<std::uint32_t> rec{7, 4, 2, 3, 0};
        std::vector<std::uint32_t> test{4, 9};
        RankingMetrics m = ranking_metrics(rec, test, 5);
        // frozen from a 40-digit logarithm evaluation
        CHECK(m.ndcg == Catch::Approx(0.3868528072345416).epsilon(1e-10));
        CHECK(m.recall == Catch::Approx(0.5));
        CHECK(m.hit == 1.0);
        CHECK(m.precision == Catch::Approx(0.2));
    }
    SECTION("no hits") {
        std::vector<std::uint32_t> rec{1, 2, 3};
        std::vector<std::uint32_t> test{9};
        RankingMetrics m = ranking_metrics(rec, test, 5);
        CHECK(m.ndcg == 0.0);
        CHECK(m.recall == 0.0);
        CHECK(m.hit == 0.0);
        CHECK(m.precision == 0.0);
    }
    SECTION("ndcg is 1 exactly when the top ranks are test items") {
        std::vector<std::uint32_t> test{3, 5};
        std::vector<std::uint32_t> perfect{5, 3, 0, 1, 2};
        CHECK(ranking_metrics(perfect, test, 5).ndcg == Catch::Approx(1.0));
        std::vector<std::uint32_t> off{5, 0, 3, 1, 2};
        CHECK(ranking_metrics(off, test, 5).ndcg < 1.0);
    }
}

TEST_CASE("coverage counts distinct labels") {
    GameCatalog cat;
    cat.add_game("g0", {"A"}, {"D"}, {"P"});
    cat.add_game("g1", {"A", "B"}, {"D"}, {"P"});
    cat.add_game("g2", {"B"}, {"D"}, {"P"});
    cat.add_game("g3", {"C"}, {"D"}, {"P"});
    cat.add_game("g4", {"A"}, {"D"}, {"P"});

    std::vector<std::uint32_t> rec{0, 1, 2, 3, 4};
    CoverageMetrics cm = coverage_at_k(rec, cat, 5);
    CHECK(cm.genre == 3.0);
    CHECK(cm.developer == 1.0);
    CHECK(cm.publisher == 1.0);
    CHECK(cm.total == 5.0);

    SECTION("identical games count once") {
        std::vector<std::uint32_t> same{1, 1, 1};
        CoverageMetrics one = coverage_at_k(same, cat, 3);
        CHECK(one.genre == 2.0);
        CHECK(one.total == 4.0);
    }
    SECTION("empty label sets contribute nothing") {
        GameCatalog sparse;
        sparse.add_game("a", {}, {}, {});
        sparse.add_game("b", {"X"}, {}, {});
        std::vector<std::uint32_t> r{0, 1};
        CoverageMetrics cm2 = coverage_at_k(r, sparse, 2);
        CHECK(cm2.genre == 1.0);
        CHECK(cm2.developer == 0.0);
        CHECK(cm2.total == 1.0);
    }
    SECTION("coverage is monotone in K") {
        for (std::size_t k = 1; k < 5; ++k)
            CHECK(coverage_at_k(rec, cat, k).total <= coverage_at_k(rec, cat, k + 1).total);
    }
}

TEST_CASE("entropy of the recommended labels") {
    GameCatalog cat;
    cat.add_game("g0", {"A"}, {"D"}, {"P"});
    cat.add_game("g1", {"A"}, {"D"}, {"P"});
    cat.add_game("g2", {"B"}, {"D"}, {"P"});
    cat.add_game("g3", {"A", "B"}, {"D"}, {"P"});

    SECTION("single genre everywhere has zero entropy") {
        std::vector<std::uint32_t> rec{0, 1};
        CHECK(entropy_at_k(rec, cat, 2, Category::genre) == 0.0);
    }
    SECTION("two distinct single labels give ln 2") {
        std::vector<std::uint32_t> rec{0, 2};
        CHECK(entropy_at_k(rec, cat, 2, Category::genre) ==
              Catch::Approx(0.6931471805599453).epsilon(1e-12));
        CHECK(entropy_at_k(rec, cat, 2, Category::genre, true) == Catch::Approx(1.0));
    }
    SECTION("counts (2,1,1) over four votes") {
        GameCatalog four;
        four.add_game("a", {"X"}, {}, {});
        four.add_game("b", {"X"}, {}, {});
        four.add_game("c", {"Y"}, {}, {});
        four.add_game("d", {"Z"}, {}, {});
        std::vector<std::uint32_t> rec{0, 1, 2, 3};
        // frozen from a 40-digit evaluation of -(1/2 ln 1/2 + 2 * 1/4 ln 1/4)
        CHECK(entropy_at_k(rec, four, 4, Category::genre) ==
              Catch::Approx(1.0397207708399180).epsilon(1e-12));
    }
    SECTION("empty multiset has zero entropy") {
        GameCatalog none;
        none.add_game("a", {}, {"D"}, {"P"});
        std::vector<std::uint32_t> rec{0};
        CHECK(entropy_at_k(rec, none, 1, Category::genre) == 0.0);
    }
    SECTION("multi-label games vote once per label") {
        std::vector<std::uint32_t> rec{0, 3};  // labels A + (A,B): counts A=2, B=1
        const double expected = oracle::ref_entropy({2, 1});
        CHECK(entropy_at_k(rec, cat, 2, Category::genre) == Catch::Approx(expected).epsilon(1e-12));
    }
    SECTION("bounded by the log multiset size, attained on distinct single labels") {
        GameCatalog many;
        for (int i = 0; i < 5; ++i)
            many.add_game("g" + std::to_string(i), {"G" + std::to_string(i)}, {"D"}, {"P"});
        std::vector<std::uint32_t> rec{0, 1, 2, 3, 4};
        CHECK(entropy_at_k(rec, many, 5, Category::genre) ==
              Catch::Approx(std::log(5.0)).epsilon(1e-12));
        std::mt19937_64 rng(12);
        for (int round = 0; round < 20; ++round) {
            GameCatalog random = oracle::random_catalog(rng, 2 + rng() % 20);
            std::vector<std::uint32_t> all(random.num_games());
            std::iota(all.begin(), all.end(), 0);
            std::shuffle(all.begin(), all.end(), rng);
            const std::size_t K = 1 + rng() % all.size();
            all.resize(K);
            for (auto c : kCategories) {
                std::size_t votes = 0;
                for (std::uint32_t g : all) votes += random.game_labels(c, g).size();
                if (votes == 0) continue;
                REQUIRE(entropy_at_k(all, random, K, c) <=
                        std::log(static_cast<double>(votes)) + 1e-12);
            }
        }
    }
}

TEST_CASE("untrained parameters score near the random baseline") {
    SynthConfig cfg;
    cfg.num_users = 400;
    cfg.num_games = 100;
    cfg.interactions_per_user = 12;
    cfg.seed = 23;
    auto [catalog, log] = generate_synthetic(cfg);
    SplitLog split = split_interactions(apply_user_kcore(log, 5), {}, 23);
    GraphSet graphs = build_graph_set(catalog, split.train);
    Hyperparams hp;
    hp.dim = 16;
    Rng rng(23, "init");
    ModelParams params = init_params(split.train.num_users(), split.train.num_games, hp,
                                     FusionWeights{}, ThetaConfig{}, rng);
    MetricsReport rep = evaluate(params, graphs, split, catalog, hp, {10});
    const double baseline = 10.0 / static_cast<double>(cfg.num_games);
    CHECK(rep.rows[0].recall < 3.0 * baseline);
    CHECK(rep.rows[0].recall > baseline / 5.0);
}

TEST_CASE("aggregated evaluation averages per-user metrics") {
    std::mt19937_64 rng(71);
    const std::size_t nu = 14, ng = 25, dim = 4;
    GameCatalog cat = oracle::random_catalog(rng, ng);
    EmbeddingTable users = oracle::random_table(rng, nu, dim);
    EmbeddingTable games = oracle::random_table(rng, ng, dim);
    InteractionLog train_log = oracle::random_log(rng, nu, ng, 0.2);
    InteractionLog test_log = oracle::random_log(rng, nu, ng, 0.1);
    UserGameIndex train = UserGameIndex::build(train_log);
    UserGameIndex test = UserGameIndex::build(test_log);

    MetricsReport rep = evaluate_against(users, games, train, test, cat, {5, 10});

    // independent recomputation with the oracle helpers
    for (std::size_t ki = 0; ki < 2; ++ki) {
        const std::size_t K = ki == 0 ? 5 : 10;
        double ndcg = 0, recall = 0, hit = 0, precision = 0, cov_total = 0, ent_genre = 0;
        std::size_t evaluated = 0;
        for (std::uint32_t u = 0; u < nu; ++u) {
            if (test.degree(u) == 0) continue;
            ++evaluated;
            auto rec = recommend_topk(users, games, u, K, train);
            std::set<std::uint32_t> test_set(test.games_of(u).begin(), test.games_of(u).end());
            oracle::RefMetrics m = oracle::ref_ranking(rec, test_set, K);
            ndcg += m.ndcg;
            recall += m.recall;
            hit += m.hit;
            precision += m.precision;
            CoverageMetrics cm = coverage_at_k(rec, cat, K);
            cov_total += cm.total;
            std::map<std::uint32_t, std::size_t> counts;
            for (std::uint32_t g : rec)
                for (std::uint32_t l : cat.game_labels(Category::genre, g)) ++counts[l];
            std::vector<std::size_t> flat;
            for (auto& [l, c] : counts) flat.push_back(c);
            ent_genre += oracle::ref_entropy(flat);
        }
        REQUIRE(evaluated == rep.evaluated_users);
        const double n = static_cast<double>(evaluated);
        CHECK(rep.rows[ki].ndcg == Catch::Approx(ndcg / n).margin(1e-12));
        CHECK(rep.rows[ki].recall == Catch::Approx(recall / n).margin(1e-12));
        CHECK(rep.rows[ki].hit == Catch::Approx(hit / n).margin(1e-12));
        CHECK(rep.rows[ki].precision == Catch::Approx(precision / n).margin(1e-12));
        CHECK(rep.rows[ki].coverage_total == Catch::Approx(cov_total / n).margin(1e-12));
        CHECK(rep.rows[ki].entropy_genre == Catch::Approx(ent_genre / n).margin(1e-12));
    }

    SECTION("two identical evaluations agree exactly") {
        MetricsReport again = evaluate_against(users, games, train, test, cat, {5, 10});
        CHECK(again.rows[0].ndcg == rep.rows[0].ndcg);
        CHECK(again.rows[1].coverage_total == rep.rows[1].coverage_total);
    }
    SECTION("users without held-out items are skipped") {
        UserGameIndex empty = index_of(nu, ng, {});
        CHECK_THROWS_AS(evaluate_against(users, games, train, empty, cat, {5}), ValidationError);
    }
}

TEST_CASE("single-user and two-user aggregation") {
    GameCatalog cat;
    for (int i = 0; i < 6; ++i)
        cat.add_game("g" + std::to_string(i), {"G" + std::to_string(i % 2)}, {"D"}, {"P"});
    EmbeddingTable users(2, 2), games(6, 2);
    users.row(0)[0] = 1;
    users.row(1)[1] = 1;
    for (std::uint32_t g = 0; g < 6; ++g) {
        games.row(g)[0] = 6.0 - g;
        games.row(g)[1] = static_cast<double>(g);
    }
    UserGameIndex train = index_of(2, 6, {});
    UserGameIndex test = index_of(2, 6, {{0, 0}, {1, 5}});

    MetricsReport rep = evaluate_against(users, games, train, test, cat, {5});
    // both users rank their test item first, so the mean equals each user's value
    CHECK(rep.rows[0].ndcg == Catch::Approx(1.0));
    CHECK(rep.rows[0].precision == Catch::Approx(0.2));
    CHECK(rep.evaluated_users == 2);
}

TEST_CASE("long-tail exposure") {
    std::mt19937_64 rng(81);
    const std::size_t nu = 10, ng = 20, dim = 3;
    EmbeddingTable users = oracle::random_table(rng, nu, dim);
    EmbeddingTable games = oracle::random_table(rng, ng, dim);
    InteractionLog train_log = oracle::random_log(rng, nu, ng, 0.15);
    InteractionLog test_log = oracle::random_log(rng, nu, ng, 0.15);
    UserGameIndex train = UserGameIndex::build(train_log);
    UserGameIndex test = UserGameIndex::build(test_log);
    PopularitySets pop = popularity_sets(train_log, 0.2);

    const double got = longtail_exposure(users, games, train, test, pop, 5);
    double expected = 0;
    std::size_t evaluated = 0;
    for (std::uint32_t u = 0; u < nu; ++u) {
        if (test.degree(u) == 0) continue;
        ++evaluated;
        for (std::uint32_t g : recommend_topk(users, games, u, 5, train))
            if (pop.is_cold(g)) expected += 1;
    }
    CHECK(got == Catch::Approx(expected / static_cast<double>(evaluated)).margin(1e-12));

    SECTION("no cold games means zero exposure") {
        PopularitySets none;
        none.player_count.assign(ng, 0);
        none.flag.assign(ng, 0);
        CHECK(longtail_exposure(users, games, train, test, none, 5) == 0.0);
    }
    SECTION("all-cold catalog saturates at K") {
        PopularitySets all;
        all.player_count.assign(ng, 0);
        all.flag.assign(ng, -1);
        for (std::uint32_t g = 0; g < ng; ++g) all.cold.push_back(g);
        CHECK(longtail_exposure(users, games, train, test, all, 5) == Catch::Approx(5.0));
    }
}

TEST_CASE("deceptive games") {
    std::mt19937_64 rng(91);
    const std::size_t nu = 12, ng = 15, dim = 3;
    EmbeddingTable users = oracle::random_table(rng, nu, dim);
    EmbeddingTable games = oracle::random_table(rng, ng, dim);
    UserGameIndex train = UserGameIndex::build(oracle::random_log(rng, nu, ng, 0.2));
    InteractionLog test_log = oracle::random_log(rng, nu, ng, 0.1);
    UserGameIndex test = UserGameIndex::build(test_log);

    SECTION("empty set gives zero frequency") {
        std::vector<std::uint32_t> none;
        CHECK(deceptive_frequency(users, games, train, test, none, 5) == 0.0);
    }
    SECTION("all games deceptive and no test items counts the whole list") {
        std::vector<std::uint32_t> all(ng);
        std::iota(all.begin(), all.end(), 0);
        UserGameIndex no_test = index_of(nu, ng, {});
        EmbeddingTable one_user(1, dim);
        one_user.values = {0.3, -0.2, 0.9};
        UserGameIndex one_train = index_of(1, ng, {{0, 0}});  // 14 eligible
        const double v = deceptive_frequency(one_user, games, one_train,
                                             index_of(1, ng, {}), all, 5);
        CHECK(v == Catch::Approx(5.0));  // min(K, eligible) with eligible > K
    }
    SECTION("frequency matches a brute-force recount") {
        Rng lib_rng(7, "deceptive");
        auto deceptive =
            build_deceptive_set(users, games, train, test, lib_rng, 5, 0.5, 4);
        REQUIRE(std::is_sorted(deceptive.begin(), deceptive.end()));
        CHECK(deceptive.size() <= 4);
        const double got = deceptive_frequency(users, games, train, test, deceptive, 5);
        double expected = 0;
        for (std::uint32_t u = 0; u < nu; ++u)
            for (std::uint32_t g : recommend_topk(users, games, u, 5, train))
                if (std::binary_search(deceptive.begin(), deceptive.end(), g) &&
                    !test.contains(u, g))
                    expected += 1;
        CHECK(got == Catch::Approx(expected / static_cast<double>(nu)).margin(1e-12));
    }
}

TEST_CASE("metrics CSV layout") {
    MetricsReport rep;
    rep.evaluated_users = 3;
    MetricsRow row;
    row.k = 5;
    row.ndcg = 0.25;
    row.coverage_total = 7.5;
    rep.rows = {row};
    auto dir = oracle::fresh_dir("metrics_csv");
    const std::string path = (dir / "m.csv").string();
    write_metrics_csv(rep, path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    CHECK(header ==
          "k,ndcg,recall,hit,precision,coverage_genre,coverage_developer,coverage_publisher,"
          "coverage_total,entropy_genre,entropy_developer,entropy_publisher");
    CHECK(line.rfind("5,0.25,", 0) == 0);
}

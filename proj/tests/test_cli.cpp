#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cpgrec/cpgrec.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
    const std::string out_path = (dir / "stdout.txt").string();
    const std::string err_path = (dir / "stderr.txt").string();
    const std::string cmd =
        std::string(CPGREC_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    return {WEXITSTATUS(status), slurp(out_path), slurp(err_path)};
}

std::string slurp_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("synth command is reproducible and creates directories") {
    auto dir = oracle::fresh_dir("cli_synth");
    const std::string base = "synth --users 50 --games 25 --interactions 6 --seed 11 ";
    CliResult a = run_cli(base + "--out-dir " + (dir / "a" / "nested").string(), dir);
    REQUIRE(a.exit_code == 0);
    CliResult b = run_cli(base + "--out-dir " + (dir / "b").string(), dir);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp_file(dir / "a" / "nested" / "catalog.csv") == slurp_file(dir / "b" / "catalog.csv"));
    CHECK(slurp_file(dir / "a" / "nested" / "interactions.csv") ==
          slurp_file(dir / "b" / "interactions.csv"));
}

TEST_CASE("synth rejects invalid configurations with a message on stderr") {
    auto dir = oracle::fresh_dir("cli_synth_bad");
    CliResult r = run_cli("synth --users 5 --games 10 --interactions 10 --out-dir " +
                              (dir / "x").string(),
                          dir);
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("interactions_per_user") != std::string::npos);
}

TEST_CASE("ingest then graph-stats on a tiny catalog") {
    auto dir = oracle::fresh_dir("cli_ingest");
    {
        std::ofstream cat(dir / "catalog.csv");
        cat << "game_id,genres,developers,publishers\n"
               "g1,X,D1,P1\n"
               "g2,X,D2,P2\n"
               "g3,Y,D1,P2\n";
        std::ofstream inter(dir / "inter.csv");
        inter << "user_id,game_id\n";
        for (int u = 0; u < 4; ++u)
            for (int g = 1; g <= 3; ++g) inter << "u" << u << ",g" << g << "\n";
    }
    CliResult ing = run_cli("ingest --catalog " + (dir / "catalog.csv").string() +
                                " --interactions " + (dir / "inter.csv").string() +
                                " --kcore 2 --seed 5 --out-prefix " + (dir / "split").string(),
                            dir);
    REQUIRE(ing.exit_code == 0);
    REQUIRE(fs::exists(dir / "split.train.csv"));
    REQUIRE(fs::exists(dir / "split.val.csv"));
    REQUIRE(fs::exists(dir / "split.test.csv"));

    CliResult gs = run_cli("graph-stats --catalog " + (dir / "catalog.csv").string() +
                               " --interactions " + (dir / "split.train.csv").string() +
                               " --export-dir " + (dir / "graphs").string(),
                           dir);
    REQUIRE(gs.exit_code == 0);
    // hand-enumerated: raw genre {g1g2}, raw dev {g1g3}, raw pub {g2g3};
    // no strict edges; connectivity keeps all three pairs
    CHECK(gs.out.find("genre          1          0          0") != std::string::npos);
    CHECK(gs.out.find("developer          0          1          0") != std::string::npos);
    CHECK(gs.out.find("publisher          0          0          1") != std::string::npos);
    CHECK(gs.out.find("connectivity graph edges: 3") != std::string::npos);
    CHECK(fs::exists(dir / "graphs" / "connectivity.edges"));

    SECTION("strict counts never exceed raw counts") {
        std::mt19937_64 rng(13);
        for (int round = 0; round < 10; ++round) {
            cpgrec::GameCatalog cat = oracle::random_catalog(rng, 2 + rng() % 40);
            for (auto [a, b] : {std::pair{cpgrec::Category::genre, cpgrec::Category::developer},
                                std::pair{cpgrec::Category::genre, cpgrec::Category::publisher},
                                std::pair{cpgrec::Category::developer, cpgrec::Category::publisher}}) {
                const auto strict = cpgrec::build_strict_graph(cat, a, b).undirected_edge_count();
                REQUIRE(strict <= cpgrec::build_raw_graph(cat, a).undirected_edge_count());
                REQUIRE(strict <= cpgrec::build_raw_graph(cat, b).undirected_edge_count());
            }
        }
    }
}

TEST_CASE("train, evaluate and recommend round trip through the CLI") {
    auto dir = oracle::fresh_dir("cli_train");
    REQUIRE(run_cli("synth --users 80 --games 30 --interactions 8 --seed 3 --out-dir " +
                        dir.string(),
                    dir)
                .exit_code == 0);
    REQUIRE(run_cli("ingest --catalog " + (dir / "catalog.csv").string() + " --interactions " +
                        (dir / "interactions.csv").string() + " --kcore 4 --seed 3 --out-prefix " +
                        (dir / "split").string(),
                    dir)
                .exit_code == 0);

    const std::string data_args = " --catalog " + (dir / "catalog.csv").string() + " --train " +
                                  (dir / "split.train.csv").string() + " --val " +
                                  (dir / "split.val.csv").string() + " --test " +
                                  (dir / "split.test.csv").string();
    CliResult tr = run_cli("train" + data_args + " --dim 8 --epochs 3 --batch-size 64 --seed 3" +
                               " --out " + (dir / "model.ckpt").string() + " --history " +
                               (dir / "history.csv").string(),
                           dir);
    REQUIRE(tr.exit_code == 0);
    REQUIRE(fs::exists(dir / "model.ckpt"));

    SECTION("history has a row per epoch") {
        std::ifstream in(dir / "history.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == "epoch,loss,val_recall@10,val_coverage@5");
        int rows = 0;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 3);
    }

    SECTION("evaluate twice produces identical CSVs") {
        CliResult e1 = run_cli("evaluate" + data_args + " --checkpoint " +
                                   (dir / "model.ckpt").string() + " --dim 8 --out " +
                                   (dir / "m1.csv").string(),
                               dir);
        REQUIRE(e1.exit_code == 0);
        CliResult e2 = run_cli("evaluate" + data_args + " --checkpoint " +
                                   (dir / "model.ckpt").string() + " --dim 8 --out " +
                                   (dir / "m2.csv").string(),
                               dir);
        REQUIRE(e2.exit_code == 0);
        CHECK(slurp_file(dir / "m1.csv") == slurp_file(dir / "m2.csv"));
    }

    SECTION("missing checkpoint fails with nonzero exit") {
        CliResult bad = run_cli("evaluate" + data_args + " --checkpoint " +
                                    (dir / "nope.ckpt").string(),
                                dir);
        CHECK(bad.exit_code != 0);
        CHECK_FALSE(bad.err.empty());
    }

    SECTION("recommend prints a ranked list") {
        CliResult rec = run_cli("recommend --catalog " + (dir / "catalog.csv").string() +
                                    " --train " + (dir / "split.train.csv").string() +
                                    " --checkpoint " + (dir / "model.ckpt").string() +
                                    " --user u00000 --k 5",
                                dir);
        REQUIRE(rec.exit_code == 0);
        CHECK(rec.out.find("rank,game_id,score") != std::string::npos);
        CHECK(rec.out.find("1,g") != std::string::npos);
    }

    SECTION("resume continues the history epoch numbering") {
        CliResult more = run_cli("train" + data_args +
                                     " --dim 8 --epochs 2 --batch-size 64 --seed 3 --resume " +
                                     (dir / "model.ckpt").string() + " --out " +
                                     (dir / "model2.ckpt").string() + " --history " +
                                     (dir / "history.csv").string(),
                                 dir);
        REQUIRE(more.exit_code == 0);
        std::ifstream in(dir / "history.csv");
        std::string line, last;
        std::getline(in, line);
        std::vector<std::size_t> epochs;
        while (std::getline(in, line))
            if (!line.empty()) epochs.push_back(std::stoul(cpgrec::csv::split(line, ',')[0]));
        REQUIRE(epochs.size() == 5);
        for (std::size_t i = 0; i < epochs.size(); ++i) REQUIRE(epochs[i] == i + 1);
    }
}

TEST_CASE("case-study command") {
    auto dir = oracle::fresh_dir("cli_case");
    REQUIRE(run_cli("synth --users 60 --games 25 --interactions 8 --seed 9 --out-dir " +
                        dir.string(),
                    dir)
                .exit_code == 0);
    REQUIRE(run_cli("ingest --catalog " + (dir / "catalog.csv").string() + " --interactions " +
                        (dir / "interactions.csv").string() + " --kcore 4 --seed 9 --out-prefix " +
                        (dir / "split").string(),
                    dir)
                .exit_code == 0);
    const std::string data_args = " --catalog " + (dir / "catalog.csv").string() + " --train " +
                                  (dir / "split.train.csv").string() + " --val " +
                                  (dir / "split.val.csv").string() + " --test " +
                                  (dir / "split.test.csv").string();

    SECTION("zero snapshots yields a header-only CSV") {
        fs::create_directories(dir / "empty_run");
        CliResult cs = run_cli("case-study" + data_args + " --off-dirs " +
                                   (dir / "empty_run").string() + " --out " +
                                   (dir / "case.csv").string(),
                               dir);
        REQUIRE(cs.exit_code == 0);
        CHECK(slurp_file(dir / "case.csv") ==
              "epoch,longtail@5,longtail@10,deceptive@5,deceptive@10\n");
    }

    SECTION("paired series and seed averaging") {
        const std::string common =
            " --dim 8 --epochs 2 --batch-size 64 --snapshot-every 1 --patience 10";
        REQUIRE(run_cli("train" + data_args + common + " --seed 1 --out " +
                            (dir / "on1.ckpt").string() + " --snapshot-dir " +
                            (dir / "on_s1").string(),
                        dir)
                    .exit_code == 0);
        REQUIRE(run_cli("train" + data_args + common + " --seed 2 --out " +
                            (dir / "on2.ckpt").string() + " --snapshot-dir " +
                            (dir / "on_s2").string(),
                        dir)
                    .exit_code == 0);
        REQUIRE(run_cli("train" + data_args + common + " --no-nsr --seed 1 --out " +
                            (dir / "off1.ckpt").string() + " --snapshot-dir " +
                            (dir / "off_s1").string(),
                        dir)
                    .exit_code == 0);
        REQUIRE(run_cli("train" + data_args + common + " --no-nsr --seed 2 --out " +
                            (dir / "off2.ckpt").string() + " --snapshot-dir " +
                            (dir / "off_s2").string(),
                        dir)
                    .exit_code == 0);

        CliResult both = run_cli(
            "case-study" + data_args + " --seed 4 --on-dirs " + (dir / "on_s1").string() + "," +
                (dir / "on_s2").string() + " --off-dirs " + (dir / "off_s1").string() + "," +
                (dir / "off_s2").string() + " --out " + (dir / "case.csv").string(),
            dir);
        REQUIRE(both.exit_code == 0);
        std::ifstream in(dir / "case.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header ==
              "epoch,longtail@5_on,longtail@5_off,longtail@10_on,longtail@10_off,"
              "deceptive@5_on,deceptive@5_off,deceptive@10_on,deceptive@10_off");
        std::vector<std::string> rows;
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) rows.push_back(line);
        REQUIRE(rows.size() == 2);  // epochs 1 and 2

        // the averaged longtail@5 of the off series equals the mean of per-seed runs
        auto single = [&](const std::string& snapdir, const fs::path& out) {
            CliResult r = run_cli("case-study" + data_args + " --seed 4 --off-dirs " + snapdir +
                                      " --out " + out.string(),
                                  dir);
            REQUIRE(r.exit_code == 0);
            std::ifstream sin(out);
            std::string h, first;
            std::getline(sin, h);
            std::getline(sin, first);
            return std::stod(cpgrec::csv::split(first, ',')[1]);
        };
        const double s1 = single((dir / "off_s1").string(), dir / "c1.csv");
        const double s2 = single((dir / "off_s2").string(), dir / "c2.csv");
        const double merged = std::stod(cpgrec::csv::split(rows[0], ',')[2]);
        CHECK(merged == Catch::Approx((s1 + s2) / 2.0).margin(1e-9));
    }
}

TEST_CASE("config file values are overridden by flags") {
    auto dir = oracle::fresh_dir("cli_config");
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "synth.users = 40\n"
               "synth.games = 20\n"
               "synth.interactions = 6\n"
               "synth.seed = 21\n";
    }
    CliResult a = run_cli("--config " + (dir / "run.cfg").string() + " synth --out-dir " +
                              (dir / "a").string(),
                          dir);
    REQUIRE(a.exit_code == 0);
    // flag wins over the config value
    CliResult b = run_cli("--config " + (dir / "run.cfg").string() +
                              " synth --games 10 --out-dir " + (dir / "b").string(),
                          dir);
    REQUIRE(b.exit_code == 0);
    cpgrec::GameCatalog cat_a = cpgrec::load_catalog((dir / "a" / "catalog.csv").string());
    cpgrec::GameCatalog cat_b = cpgrec::load_catalog((dir / "b" / "catalog.csv").string());
    CHECK(cat_a.num_games() == 20);
    CHECK(cat_b.num_games() == 10);
}

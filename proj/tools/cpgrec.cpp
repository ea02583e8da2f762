// Command-line driver: synthesize datasets, build graphs, train and evaluate
// recommenders, dump case-study curves. Every run is reproducible from a
// single seed; see README.md for the file formats.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpgrec/cpgrec.hpp"

namespace fs = std::filesystem;
using namespace cpgrec;

namespace {

struct CommonOpts {
    std::uint64_t seed = 42;
    int threads = 1;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--seed", c.seed, "master seed for all random streams");
    cmd->add_option("--threads", c.threads, "worker threads for propagation and evaluation")
        ->envname("CPGREC_THREADS");
    cmd->add_flag("--deterministic", c.deterministic, "force single-threaded execution");
}

void apply_common(const CommonOpts& c) {
    set_num_threads(c.deterministic ? 1 : c.threads);
}

struct HyperOpts {
    Hyperparams hp;
    FusionWeights fusion;
    ThetaConfig theta;
    std::string preset = "balanced";
    bool no_nsr = false;
};

void add_hyper(CLI::App* cmd, HyperOpts& h) {
    cmd->add_option("--lr", h.hp.learning_rate, "learning rate");
    cmd->add_option("--batch-size", h.hp.batch_size, "training batch size");
    cmd->add_option("--dim", h.hp.dim, "embedding dimension");
    cmd->add_option("--beta", h.hp.beta, "layer-weight decay");
    cmd->add_option("--m", h.hp.m, "negative-score reweighting intensity");
    cmd->add_option("--lambda", h.hp.lambda, "L2 regularization coefficient");
    cmd->add_option("--k-ca", h.hp.k_ca, "propagation depth on strict graphs");
    cmd->add_option("--k-co", h.hp.k_co, "propagation depth on the connectivity graph");
    cmd->add_option("--k-po", h.hp.k_po, "propagation depth on the bipartite graph");
    cmd->add_option("--epochs", h.hp.max_epochs, "maximum training epochs");
    cmd->add_option("--patience", h.hp.patience, "early-stopping patience (epochs)");
    cmd->add_option("--preset", h.preset,
                    "balanced | accuracy_focused | diversity_focused | custom");
    cmd->add_option("--w-ca", h.fusion.w_ca, "fusion weight of the strict-graph branch");
    cmd->add_option("--w-co", h.fusion.w_co, "fusion weight of the connectivity branch");
    cmd->add_option("--w-po", h.fusion.w_po, "fusion weight of the bipartite branch");
    cmd->add_option("--theta-e-hot", h.theta.theta_e_hot, "edge boost for popular games");
    cmd->add_option("--theta-n-hot", h.theta.theta_n_hot, "node weight for popular games");
    cmd->add_option("--theta-n-cold", h.theta.theta_n_cold, "node weight for long-tail games");
    cmd->add_flag("--no-nsr", h.no_nsr, "disable negative-score reweighting");
}

void ensure_parent_dir(const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// The split CSVs name users by external id; the train file defines the dense
// indexing and val/test rows are remapped onto it.
InteractionLog load_part_aligned(const GameCatalog& catalog, const std::string& path,
                                 const InteractionLog& train) {
    InteractionLog part;
    part.num_games = catalog.num_games();
    part.user_ids = train.user_ids;
    if (path.empty()) return part;
    std::map<std::string, std::uint32_t> index;
    for (std::uint32_t u = 0; u < train.num_users(); ++u) index.emplace(train.user_ids[u], u);
    InteractionLog raw = load_interactions(path, catalog);
    for (const auto& [u, g] : raw.pairs) {
        auto it = index.find(raw.user_ids[u]);
        if (it == index.end())
            throw ValidationError(path + ": user '" + raw.user_ids[u] +
                                  "' is absent from the training split");
        part.pairs.emplace_back(it->second, g);
    }
    part.sort_pairs();
    return part;
}

SplitLog load_aligned_split(const GameCatalog& catalog, const std::string& train_path,
                            const std::string& val_path, const std::string& test_path) {
    SplitLog split;
    split.train = load_interactions(train_path, catalog);
    split.val = load_part_aligned(catalog, val_path, split.train);
    split.test = load_part_aligned(catalog, test_path, split.train);
    return split;
}

int run_synth(const CommonOpts& common, const SynthConfig& cfg_in, const std::string& out_dir) {
    SynthConfig cfg = cfg_in;
    cfg.seed = common.seed;
    auto [catalog, log] = generate_synthetic(cfg);
    fs::create_directories(out_dir);
    const std::string catalog_path = (fs::path(out_dir) / "catalog.csv").string();
    const std::string inter_path = (fs::path(out_dir) / "interactions.csv").string();
    write_catalog_csv(catalog, catalog_path);
    write_interactions_csv(log, catalog, inter_path);
    std::printf("wrote %s (%zu games) and %s (%zu users, %zu interactions)\n",
                catalog_path.c_str(), catalog.num_games(), inter_path.c_str(), log.num_users(),
                log.num_pairs());
    return 0;
}

int run_ingest(const CommonOpts& common, const std::string& catalog_path,
               const std::string& inter_path, std::size_t kcore, SplitRatios ratios,
               const std::string& out_prefix) {
    GameCatalog catalog = load_catalog(catalog_path);
    InteractionLog log = load_interactions(inter_path, catalog);
    const std::size_t users_before = log.num_users();
    InteractionLog filtered = apply_user_kcore(log, kcore);
    SplitLog split = split_interactions(filtered, ratios, common.seed);
    ensure_parent_dir(out_prefix + ".train.csv");
    write_interactions_csv(split.train, catalog, out_prefix + ".train.csv");
    write_interactions_csv(split.val, catalog, out_prefix + ".val.csv");
    write_interactions_csv(split.test, catalog, out_prefix + ".test.csv");
    std::printf("users %zu -> %zu after %zu-core, pairs %zu\n", users_before,
                filtered.num_users(), kcore, filtered.num_pairs());
    std::printf("split: train=%zu val=%zu test=%zu -> %s.{train,val,test}.csv\n",
                split.train.num_pairs(), split.val.num_pairs(), split.test.num_pairs(),
                out_prefix.c_str());
    return 0;
}

int run_graph_stats(const std::string& catalog_path, const std::string& inter_path,
                    double quantile, const std::string& export_dir) {
    GameCatalog catalog = load_catalog(catalog_path);
    InteractionLog train = load_interactions(inter_path, catalog);

    std::array<SparseGraph, 3> raw;
    for (int c = 0; c < 3; ++c) raw[c] = build_raw_graph(catalog, Category(c));
    std::array<std::array<std::size_t, 3>, 3> counts{};
    std::array<std::array<SparseGraph, 3>, 3> strict;
    for (int a = 0; a < 3; ++a) {
        counts[a][a] = raw[a].undirected_edge_count();
        for (int b = a + 1; b < 3; ++b) {
            strict[a][b] = intersect_graphs(raw[a], raw[b]);
            counts[a][b] = counts[b][a] = strict[a][b].undirected_edge_count();
        }
    }
    SparseGraph co = connectivity_from_raw(raw[0], raw[1], raw[2]);
    PopularitySets pop = popularity_sets(train, quantile);

    std::printf("games: %zu  users: %zu  interactions: %zu\n", catalog.num_games(),
                train.num_users(), train.num_pairs());
    std::printf("edge counts (diagonal: raw graphs, off-diagonal: strict graphs)\n");
    std::printf("%12s %10s %10s %10s\n", "", "genre", "developer", "publisher");
    for (int a = 0; a < 3; ++a) {
        std::printf("%12s", category_name(Category(a)));
        for (int b = 0; b < 3; ++b) std::printf(" %10zu", counts[a][b]);
        std::printf("\n");
    }
    std::printf("connectivity graph edges: %zu\n", co.undirected_edge_count());
    std::printf("popularity sets: hot=%zu cold=%zu (quantile %.2f)\n", pop.hot.size(),
                pop.cold.size(), quantile);

    if (!export_dir.empty()) {
        fs::create_directories(export_dir);
        auto path = [&](const std::string& name) {
            return (fs::path(export_dir) / (name + ".edges")).string();
        };
        write_graph_edges(raw[0], path("raw_genre"));
        write_graph_edges(raw[1], path("raw_developer"));
        write_graph_edges(raw[2], path("raw_publisher"));
        write_graph_edges(strict[0][1], path("strict_genre_developer"));
        write_graph_edges(strict[0][2], path("strict_genre_publisher"));
        write_graph_edges(strict[1][2], path("strict_developer_publisher"));
        write_graph_edges(co, path("connectivity"));
        std::printf("exported 7 edge lists to %s\n", export_dir.c_str());
    }
    return 0;
}

std::size_t last_history_epoch(const std::string& path) {
    std::ifstream in(path);
    if (!in) return 0;
    std::string line, last;
    std::getline(in, line);  // header
    while (std::getline(in, line))
        if (!csv::trim(line).empty()) last = line;
    if (last.empty()) return 0;
    return static_cast<std::size_t>(std::stoull(csv::split(last, ',')[0]));
}

int run_train(const CommonOpts& common, const HyperOpts& hopts, const std::string& catalog_path,
              const std::string& train_path, const std::string& val_path,
              const std::string& test_path, const std::string& out_path,
              const std::string& history_path, const std::string& snapshot_dir,
              std::size_t snapshot_every, const std::string& resume_path) {
    GameCatalog catalog = load_catalog(catalog_path);
    SplitLog split = load_aligned_split(catalog, train_path, val_path, test_path);

    Hyperparams hp = hopts.hp;
    hp.seed = common.seed;
    hp.use_nsr = !hopts.no_nsr;
    const Preset preset = preset_from_name(hopts.preset);

    std::optional<ModelParams> warm;
    std::size_t start_epoch = 0;
    if (!resume_path.empty()) {
        warm = load_checkpoint(resume_path);
        if (!history_path.empty()) start_epoch = last_history_epoch(history_path);
        std::printf("resuming from %s at epoch %zu\n", resume_path.c_str(), start_epoch);
    }

    std::ofstream history;
    if (!history_path.empty()) {
        ensure_parent_dir(history_path);
        const bool fresh = start_epoch == 0;
        history.open(history_path, fresh ? std::ios::trunc : std::ios::app);
        if (!history) throw IoError("cannot write " + history_path);
        if (fresh) history << kHistoryHeader << '\n';
    }
    if (!snapshot_dir.empty()) fs::create_directories(snapshot_dir);

    TrainCallbacks callbacks;
    callbacks.on_epoch = [&](const EpochStats& s, const ModelParams& params) {
        std::printf("epoch %4zu  loss %.6f  val_recall@10 %.4f  val_coverage@5 %.3f\n", s.epoch,
                    s.loss, s.val_recall10, s.val_coverage5);
        if (history) history << history_row(s) << '\n' << std::flush;
        if (!snapshot_dir.empty() && snapshot_every > 0 && s.epoch % snapshot_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%04zu.ckpt", s.epoch);
            save_checkpoint(params, (fs::path(snapshot_dir) / name).string());
        }
    };

    TrainResult result = train(split, catalog, hp, preset, hopts.fusion, hopts.theta, callbacks,
                               start_epoch, warm ? &*warm : nullptr);
    ensure_parent_dir(out_path);
    save_checkpoint(result.params, out_path);
    std::printf("saved checkpoint to %s after %zu epochs\n", out_path.c_str(),
                result.history.size());
    return 0;
}

int run_evaluate(const HyperOpts& hopts, const std::string& catalog_path,
                 const std::string& train_path, const std::string& val_path,
                 const std::string& test_path, const std::string& checkpoint_path,
                 const std::string& out_path, std::vector<std::size_t> ks) {
    GameCatalog catalog = load_catalog(catalog_path);
    SplitLog split = load_aligned_split(catalog, train_path, val_path, test_path);
    ModelParams params = load_checkpoint(checkpoint_path);
    Hyperparams hp = hopts.hp;
    hp.dim = params.dim();

    GraphSet graphs = build_graph_set(catalog, split.train);
    MetricsReport report = evaluate(params, graphs, split, catalog, hp, std::move(ks));
    if (!out_path.empty()) {
        ensure_parent_dir(out_path);
        write_metrics_csv(report, out_path);
    }
    std::printf("evaluated %zu users\n", report.evaluated_users);
    for (const auto& r : report.rows)
        std::printf("K=%zu ndcg=%.4f recall=%.4f hit=%.4f precision=%.4f coverage_total=%.3f\n",
                    r.k, r.ndcg, r.recall, r.hit, r.precision, r.coverage_total);
    if (!out_path.empty()) std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

int run_recommend(const HyperOpts& hopts, const std::string& catalog_path,
                  const std::string& train_path, const std::string& checkpoint_path,
                  const std::string& user_id, std::size_t k) {
    GameCatalog catalog = load_catalog(catalog_path);
    InteractionLog train = load_interactions(train_path, catalog);
    ModelParams params = load_checkpoint(checkpoint_path);
    Hyperparams hp = hopts.hp;
    hp.dim = params.dim();

    auto it = std::find(train.user_ids.begin(), train.user_ids.end(), user_id);
    if (it == train.user_ids.end()) throw ValidationError("unknown user id '" + user_id + "'");
    const auto user = static_cast<std::uint32_t>(it - train.user_ids.begin());

    GraphSet graphs = build_graph_set(catalog, train);
    ForwardPass fp = forward_all(params, graphs, hp);
    const UserGameIndex train_index = UserGameIndex::build(train);
    auto rec = recommend_topk(fp.users, fp.games, user, k, train_index);
    if (rec.size() < k)
        std::fprintf(stderr, "note: only %zu eligible games for user %s\n", rec.size(),
                     user_id.c_str());
    std::printf("rank,game_id,score\n");
    for (std::size_t r = 0; r < rec.size(); ++r)
        std::printf("%zu,%s,%.6f\n", r + 1, catalog.game_ids[rec[r]].c_str(),
                    dot(fp.users.row(user), fp.games.row(rec[r])));
    return 0;
}

// checkpoints named epoch_<number>.ckpt inside a snapshot directory
std::map<std::size_t, std::string> find_snapshots(const std::string& dir) {
    std::map<std::size_t, std::string> out;
    if (!fs::is_directory(dir)) throw IoError("snapshot directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("epoch_", 0) != 0 || name.size() < 12 ||
            name.substr(name.size() - 5) != ".ckpt")
            continue;
        const std::string digits = name.substr(6, name.size() - 11);
        if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
        out[static_cast<std::size_t>(std::stoull(digits))] = entry.path().string();
    }
    return out;
}

struct CurvePoint {
    double longtail5 = 0, longtail10 = 0, deceptive5 = 0, deceptive10 = 0;
};

int run_case_study(const CommonOpts& common, const HyperOpts& hopts,
                   const std::string& catalog_path, const std::string& train_path,
                   const std::string& val_path, const std::string& test_path,
                   const std::vector<std::string>& on_dirs, const std::vector<std::string>& off_dirs,
                   const std::string& out_path, std::size_t deceptive_k,
                   std::size_t deceptive_count, double sample_fraction) {
    GameCatalog catalog = load_catalog(catalog_path);
    SplitLog split = load_aligned_split(catalog, train_path, val_path, test_path);
    GraphSet graphs = build_graph_set(catalog, split.train);
    const UserGameIndex train_index = UserGameIndex::build(split.train);
    const UserGameIndex test_index = UserGameIndex::build(split.test);
    Hyperparams hp = hopts.hp;

    const bool paired = !on_dirs.empty();
    ensure_parent_dir(out_path);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    if (paired)
        out << "epoch,longtail@5_on,longtail@5_off,longtail@10_on,longtail@10_off,"
               "deceptive@5_on,deceptive@5_off,deceptive@10_on,deceptive@10_off\n";
    else
        out << "epoch,longtail@5,longtail@10,deceptive@5,deceptive@10\n";

    std::vector<std::map<std::size_t, std::string>> on_runs, off_runs;
    for (const auto& d : on_dirs) on_runs.push_back(find_snapshots(d));
    for (const auto& d : off_dirs) off_runs.push_back(find_snapshots(d));

    // common epochs across every provided run
    std::set<std::size_t> epochs;
    bool first = true;
    for (const auto* runs : {&on_runs, &off_runs}) {
        for (const auto& run : *runs) {
            std::set<std::size_t> here;
            for (const auto& [e, p] : run) here.insert(e);
            if (first) {
                epochs = here;
                first = false;
            } else {
                std::set<std::size_t> merged;
                std::set_intersection(epochs.begin(), epochs.end(), here.begin(), here.end(),
                                      std::inserter(merged, merged.begin()));
                epochs = std::move(merged);
            }
        }
    }
    if (epochs.empty()) {
        std::printf("no common snapshot epochs; wrote header-only %s\n", out_path.c_str());
        return 0;
    }

    // one deceptive set per reweighting-free run, from its final snapshot
    std::vector<std::vector<std::uint32_t>> deceptive_sets(off_runs.size());
    for (std::size_t r = 0; r < off_runs.size(); ++r) {
        const ModelParams params = load_checkpoint(off_runs[r].rbegin()->second);
        hp.dim = params.dim();
        ForwardPass fp = forward_all(params, graphs, hp);
        Rng rng(common.seed, "deceptive");
        deceptive_sets[r] = build_deceptive_set(fp.users, fp.games, train_index, test_index, rng,
                                                deceptive_k, sample_fraction, deceptive_count);
    }
    // the on-series uses the deceptive set of the paired run (by position)
    auto deceptive_for = [&](std::size_t run) -> const std::vector<std::uint32_t>& {
        return deceptive_sets[std::min(run, deceptive_sets.size() - 1)];
    };

    auto measure = [&](const std::string& ckpt,
                       const std::vector<std::uint32_t>& deceptive) -> CurvePoint {
        const ModelParams params = load_checkpoint(ckpt);
        hp.dim = params.dim();
        ForwardPass fp = forward_all(params, graphs, hp);
        CurvePoint p;
        p.longtail5 =
            longtail_exposure(fp.users, fp.games, train_index, test_index, graphs.popularity, 5);
        p.longtail10 =
            longtail_exposure(fp.users, fp.games, train_index, test_index, graphs.popularity, 10);
        p.deceptive5 = deceptive_frequency(fp.users, fp.games, train_index, test_index, deceptive, 5);
        p.deceptive10 =
            deceptive_frequency(fp.users, fp.games, train_index, test_index, deceptive, 10);
        return p;
    };

    auto mean_over = [&](const std::vector<std::map<std::size_t, std::string>>& runs,
                         std::size_t epoch) -> CurvePoint {
        CurvePoint acc;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            CurvePoint p = measure(runs[r].at(epoch), deceptive_for(r));
            acc.longtail5 += p.longtail5;
            acc.longtail10 += p.longtail10;
            acc.deceptive5 += p.deceptive5;
            acc.deceptive10 += p.deceptive10;
        }
        const double n = static_cast<double>(runs.size());
        acc.longtail5 /= n;
        acc.longtail10 /= n;
        acc.deceptive5 /= n;
        acc.deceptive10 /= n;
        return acc;
    };

    out.precision(10);
    for (std::size_t e : epochs) {
        const CurvePoint off = mean_over(off_runs, e);
        if (paired) {
            const CurvePoint on = mean_over(on_runs, e);
            out << e << ',' << on.longtail5 << ',' << off.longtail5 << ',' << on.longtail10 << ','
                << off.longtail10 << ',' << on.deceptive5 << ',' << off.deceptive5 << ','
                << on.deceptive10 << ',' << off.deceptive10 << '\n';
        } else {
            out << e << ',' << off.longtail5 << ',' << off.longtail10 << ',' << off.deceptive5
                << ',' << off.deceptive10 << '\n';
        }
    }
    std::printf("wrote %s (%zu epochs, %zu run(s) with reweighting, %zu without)\n",
                out_path.c_str(), epochs.size(), on_runs.size(), off_runs.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"category- and popularity-guided game recommender"};
    app.require_subcommand(1);
    // `<subcommand>.key = value` lines (or [subcommand] sections); flags win
    app.set_config("--config", "", "configuration file, keys scoped per subcommand");

    CommonOpts common;
    HyperOpts hyper;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic catalog and interaction log");
    SynthConfig synth_cfg;
    std::string synth_out = "data";
    add_common(synth, common);
    synth->add_option("--users", synth_cfg.num_users, "number of users");
    synth->add_option("--games", synth_cfg.num_games, "number of games");
    synth->add_option("--genres", synth_cfg.num_genres, "number of genre labels");
    synth->add_option("--developers", synth_cfg.num_developers, "number of developer labels");
    synth->add_option("--publishers", synth_cfg.num_publishers, "number of publisher labels");
    synth->add_option("--zipf", synth_cfg.zipf_exponent, "popularity Zipf exponent");
    synth->add_option("--interactions", synth_cfg.interactions_per_user,
                      "mean interactions per user");
    synth->add_option("--out-dir", synth_out, "output directory");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "filter and split an interaction log");
    std::string in_catalog, in_inter, in_prefix = "split";
    std::size_t kcore = 5;
    SplitRatios ratios;
    add_common(ingest, common);
    ingest->add_option("--catalog", in_catalog, "catalog CSV")->required();
    ingest->add_option("--interactions", in_inter, "interactions CSV")->required();
    ingest->add_option("--kcore", kcore, "minimum interactions per user");
    ingest->add_option("--train-ratio", ratios.train, "training fraction");
    ingest->add_option("--val-ratio", ratios.val, "validation fraction");
    ingest->add_option("--test-ratio", ratios.test, "test fraction");
    ingest->add_option("--out-prefix", in_prefix, "prefix for .train/.val/.test CSVs");

    // graph-stats
    auto* gstats = app.add_subcommand("graph-stats", "edge counts of all game graphs");
    std::string gs_catalog, gs_inter, gs_export;
    double gs_quantile = 0.2;
    add_common(gstats, common);
    gstats->add_option("--catalog", gs_catalog, "catalog CSV")->required();
    gstats->add_option("--interactions", gs_inter, "interactions CSV (training split)")->required();
    gstats->add_option("--quantile", gs_quantile, "popularity quantile");
    gstats->add_option("--export-dir", gs_export, "write edge-list files here");

    // train
    auto* tr = app.add_subcommand("train", "train a recommender");
    std::string tr_catalog, tr_train, tr_val, tr_test, tr_out = "model.ckpt", tr_history,
                tr_snapshot_dir, tr_resume;
    std::size_t tr_snapshot_every = 1;
    add_common(tr, common);
    add_hyper(tr, hyper);
    tr->add_option("--catalog", tr_catalog, "catalog CSV")->required();
    tr->add_option("--train", tr_train, "training interactions CSV")->required();
    tr->add_option("--val", tr_val, "validation interactions CSV");
    tr->add_option("--test", tr_test, "test interactions CSV");
    tr->add_option("--out", tr_out, "checkpoint output path");
    tr->add_option("--history", tr_history, "per-epoch history CSV");
    tr->add_option("--snapshot-dir", tr_snapshot_dir, "write per-epoch checkpoints here");
    tr->add_option("--snapshot-every", tr_snapshot_every, "epochs between snapshots");
    tr->add_option("--resume", tr_resume, "warm-start from this checkpoint");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "compute ranking and diversity metrics");
    std::string ev_catalog, ev_train, ev_val, ev_test, ev_ckpt, ev_out = "metrics.csv";
    std::vector<std::size_t> ev_ks = {5, 10};
    add_common(ev, common);
    add_hyper(ev, hyper);
    ev->add_option("--catalog", ev_catalog, "catalog CSV")->required();
    ev->add_option("--train", ev_train, "training interactions CSV")->required();
    ev->add_option("--val", ev_val, "validation interactions CSV");
    ev->add_option("--test", ev_test, "test interactions CSV")->required();
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--out", ev_out, "metrics CSV output");
    ev->add_option("--ks", ev_ks, "cutoff list")->delimiter(',');

    // recommend
    auto* rec = app.add_subcommand("recommend", "top-K games for one user");
    std::string rc_catalog, rc_train, rc_ckpt, rc_user;
    std::size_t rc_k = 10;
    add_common(rec, common);
    add_hyper(rec, hyper);
    rec->add_option("--catalog", rc_catalog, "catalog CSV")->required();
    rec->add_option("--train", rc_train, "training interactions CSV")->required();
    rec->add_option("--checkpoint", rc_ckpt, "model checkpoint")->required();
    rec->add_option("--user", rc_user, "user id")->required();
    rec->add_option("--k", rc_k, "list length");

    // case-study
    auto* cs = app.add_subcommand("case-study", "long-tail and deceptive-game curves over epochs");
    std::string cs_catalog, cs_train, cs_val, cs_test, cs_out = "case_study.csv";
    std::vector<std::string> cs_on, cs_off;
    std::size_t cs_deck = 5, cs_count = 10;
    double cs_fraction = 0.25;
    add_common(cs, common);
    add_hyper(cs, hyper);
    cs->add_option("--catalog", cs_catalog, "catalog CSV")->required();
    cs->add_option("--train", cs_train, "training interactions CSV")->required();
    cs->add_option("--val", cs_val, "validation interactions CSV");
    cs->add_option("--test", cs_test, "test interactions CSV")->required();
    cs->add_option("--on-dirs", cs_on, "snapshot dirs of runs trained with reweighting")
        ->delimiter(',');
    cs->add_option("--off-dirs", cs_off, "snapshot dirs of runs trained without reweighting")
        ->delimiter(',')
        ->required();
    cs->add_option("--out", cs_out, "case-study CSV output");
    cs->add_option("--deceptive-k", cs_deck, "list length used to collect deceptive games");
    cs->add_option("--deceptive-count", cs_count, "size of the deceptive set");
    cs->add_option("--sample-fraction", cs_fraction, "user fraction sampled for the deceptive set");

    CLI11_PARSE(app, argc, argv);

    try {
        apply_common(common);
        if (synth->parsed()) return run_synth(common, synth_cfg, synth_out);
        if (ingest->parsed())
            return run_ingest(common, in_catalog, in_inter, kcore, ratios, in_prefix);
        if (gstats->parsed()) return run_graph_stats(gs_catalog, gs_inter, gs_quantile, gs_export);
        if (tr->parsed())
            return run_train(common, hyper, tr_catalog, tr_train, tr_val, tr_test, tr_out,
                             tr_history, tr_snapshot_dir, tr_snapshot_every, tr_resume);
        if (ev->parsed())
            return run_evaluate(hyper, ev_catalog, ev_train, ev_val, ev_test, ev_ckpt, ev_out,
                                ev_ks);
        if (rec->parsed())
            return run_recommend(hyper, rc_catalog, rc_train, rc_ckpt, rc_user, rc_k);
        if (cs->parsed())
            return run_case_study(common, hyper, cs_catalog, cs_train, cs_val, cs_test, cs_on,
                                  cs_off, cs_out, cs_deck, cs_count, cs_fraction);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

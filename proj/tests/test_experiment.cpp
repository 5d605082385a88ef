#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"

#include "dpkit/experiment.hpp"

using namespace dpkit;
using namespace dpkit::experiment;

namespace {

struct Fixture {
    Corpus train;
    Corpus test;
    Dataset data;
};

Fixture synthetic(std::size_t docs_per_class, double flip, std::uint64_t seed, int k = 2, std::size_t pool = 10) {
    auto spec = default_synth_spec(k, docs_per_class, pool, 60, seed);
    spec.keyword_flip_prob = flip;
    auto [train, test] = split(generate_synthetic(spec), 0.3, seed + 1);
    Dataset data = Dataset::prepare(train, test);
    return {std::move(train), std::move(test), std::move(data)};
}

TrainConfig quick_train() {
    TrainConfig cfg;
    cfg.epochs = 30;
    return cfg;
}

ProbabilisticLabels rows(std::vector<double> p, int k) { return ProbabilisticLabels::from_probs(std::move(p), k); }

// The first per_class keywords of every class pool, as LFs.
std::vector<KeywordLF> pool_lfs(int k, std::size_t per_class) {
    std::vector<KeywordLF> lfs;
    for (int c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < per_class; ++j) {
            lfs.push_back(KeywordLF::make("c" + std::to_string(c) + "kw" + std::to_string(j), c));
        }
    }
    return lfs;
}

}  // namespace

TEST_CASE("seed_sample") {
    const Fixture f = synthetic(60, 0.0, 1);
    GoldOracle oracle(f.train);
    const Pools p = seed_sample(oracle, 20, 5);
    std::size_t ones = 0;
    for (const auto& [i, y] : p.labeled.items) ones += y;
    CHECK(p.labeled.items.size() == 20);
    CHECK(ones == 10);
    CHECK(p.labeled.items.size() + p.unlabeled.indices.size() == f.train.size());
    CHECK(oracle.reads() == 20);
    for (const auto& [i, y] : p.labeled.items) CHECK(*f.train[i].gold == y);

    GoldOracle o2(f.train);
    CHECK(seed_sample(o2, 2, 5).labeled.items.size() == 2);
    CHECK(seed_sample(o2, 21, 5).labeled.items.size() == 20);  // odd remainder dropped

    GoldOracle o3(f.train), o4(f.train);
    CHECK(seed_sample(o3, 20, 9).labeled.items == seed_sample(o4, 20, 9).labeled.items);

    GoldOracle o5(f.train);
    CHECK_THROWS_AS(seed_sample(o5, 1, 5), ValidationError);
    CHECK_THROWS_AS(seed_sample(o5, 10000, 5), ValidationError);
}

TEST_CASE("acquisition") {
    const auto three = rows({0.9, 0.1, 0.6, 0.4, 0.5, 0.5}, 2);
    CHECK(acquire_entropy(three) == 2);
    CHECK(acquire_least_confidence(three) == 2);
    CHECK(acquire_entropy(rows({0.3, 0.7}, 2)) == 0);
    CHECK(acquire_entropy(rows({0.5, 0.5, 0.6, 0.4, 0.5, 0.5}, 2)) == 0);  // tie -> lower index

    SUBCASE("random 20x4 pools match brute force") {
        std::mt19937_64 gen(4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> p(80);
            for (std::size_t i = 0; i < 20; ++i) {
                double s = 0.0;
                for (int c = 0; c < 4; ++c) s += (p[i * 4 + c] = u(gen));
                for (int c = 0; c < 4; ++c) p[i * 4 + c] /= s;
            }
            const auto pr = rows(p, 4);
            std::size_t best_h = 0, best_lc = 0;
            for (std::size_t i = 1; i < 20; ++i) {
                if (entropy(pr.row(i)) > entropy(pr.row(best_h))) best_h = i;
                const auto mi = *std::max_element(pr.row(i).begin(), pr.row(i).end());
                const auto mb = *std::max_element(pr.row(best_lc).begin(), pr.row(best_lc).end());
                if (mi < mb) best_lc = i;
            }
            CHECK(acquire_entropy(pr) == best_h);
            CHECK(acquire_least_confidence(pr) == best_lc);
            const auto top3 = acquire(pr, 3, Acquisition::entropy);
            CHECK(top3.size() == 3);
            CHECK(top3[0] == best_h);
        }
    }
    SUBCASE("binary pools: both rules pick the same row") {
        std::mt19937_64 gen(8);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> p;
            for (int i = 0; i < 15; ++i) {
                // include near-0.5 rows where entropy is flat
                const double a = trial % 2 ? 0.5 + (u(gen) - 0.5) * 1e-8 : u(gen);
                p.push_back(a);
                p.push_back(1.0 - a);
            }
            const auto pr = rows(p, 2);
            CHECK(acquire_entropy(pr) == acquire_least_confidence(pr));
            CHECK(acquire(pr, 5, Acquisition::entropy) == acquire(pr, 5, Acquisition::least_confidence));
        }
    }
    CHECK_THROWS_AS(acquire_entropy(ProbabilisticLabels{}), ValidationError);
}

TEST_CASE("active learning") {
    const Fixture f = synthetic(100, 0.0, 3);
    GoldOracle oracle(f.train);
    ALConfig al;
    al.iterations = 50;
    al.seed = 2;
    const Trajectory t = run_active_learning(f.data, oracle, al, quick_train());
    REQUIRE(t.points.size() == 51);
    for (std::size_t i = 0; i < t.points.size(); ++i) {
        CHECK(t.points[i].iteration == i);
        CHECK(t.points[i].labeled_count == 20 + i);
        CHECK(t.points[i].accuracy_wilson.lo <= t.points[i].metrics.accuracy);
    }
    CHECK(t.points.back().metrics.accuracy >= 0.95);
    CHECK(oracle.reads() == 70);
    CHECK_FALSE(t.stopped_early);

    // Queried items are fresh and never repeat.
    GoldOracle o2(f.train);
    const Pools seed = seed_sample(o2, 20, 2);
    std::set<std::size_t> seen;
    for (const auto& [i, y] : seed.labeled.items) seen.insert(i);
    for (const auto& [i, y] : t.added) {
        CHECK(seen.insert(i).second);
        CHECK(*f.train[i].gold == y);
    }

    SUBCASE("query size and pool exhaustion") {
        const Fixture small = synthetic(15, 0.0, 4);  // 21 train docs
        GoldOracle o(small.train);
        ALConfig cfg;
        cfg.seed_size = 4;
        cfg.query_size = 3;
        cfg.iterations = 100;
        const Trajectory tr = run_active_learning(small.data, o, cfg, quick_train());
        const std::size_t left = small.train.size() - 4;
        CHECK(tr.points.size() == left / 3 + 1);
        CHECK(tr.stopped_early);
        CHECK(tr.points.back().labeled_count == 4 + 3 * (left / 3));
    }
    SUBCASE("entropy and least confidence give identical binary runs") {
        GoldOracle a(f.train), b(f.train);
        ALConfig ent = al, lc = al;
        ent.iterations = lc.iterations = 20;
        lc.acquisition = Acquisition::least_confidence;
        const Trajectory te = run_active_learning(f.data, a, ent, quick_train());
        const Trajectory tl = run_active_learning(f.data, b, lc, quick_train());
        CHECK(te.added == tl.added);
        CHECK(trajectory_to_csv(te) == trajectory_to_csv(tl));
    }
}

TEST_CASE("self-training") {
    const Fixture f = synthetic(150, 0.0, 6);
    SSLConfig ssl;
    ssl.seed_size = 20;
    ssl.batch_size = 10;
    ssl.iterations = 8;
    ssl.seed = 1;

    GoldOracle oracle(f.train);
    const Trajectory t = run_self_training(f.data, oracle, ssl, quick_train());
    REQUIRE(t.points.size() == 9);
    for (std::size_t i = 0; i < t.points.size(); ++i) {
        CHECK(t.points[i].labeled_count == 20 + 10 * i);
        CHECK(t.points[i].metrics.labeled_used == 20);
    }
    CHECK(oracle.reads() == 20);  // pseudo-labels never touch the oracle
    std::size_t right = 0;
    std::set<std::size_t> seen;
    for (const auto& [i, y] : t.added) {
        right += *f.train[i].gold == y;
        CHECK(seen.insert(i).second);
    }
    CHECK(static_cast<double>(right) / static_cast<double>(t.added.size()) >= 0.99);

    SUBCASE("impossible cutoff stops at iteration 0") {
        SSLConfig c = ssl;
        c.cutoff = 1.1;
        GoldOracle o(f.train);
        const Trajectory tc = run_self_training(f.data, o, c, quick_train());
        CHECK(tc.points.size() == 1);
        CHECK(tc.stopped_early);
        CHECK(tc.added.empty());
        CHECK(tc.points[0].metrics.accuracy == t.points[0].metrics.accuracy);
    }
}

TEST_CASE("weak, majority and full supervision") {
    // Pool of one: each class keyword is in every document of that class.
    const Fixture f = synthetic(150, 0.0, 8, 2, 1);
    const auto lfs = pool_lfs(2, 1);
    FitConfig fit_cfg;

    GoldOracle oracle(f.train);
    ExperimentConfig cfg;
    cfg.train = quick_train();
    const auto weak = run_regime("weak", f.data, oracle, lfs, cfg);
    const auto maj = run_regime("majority", f.data, oracle, lfs, cfg);
    CHECK(oracle.reads() == 0);
    CHECK(weak.report.labeled_used == 0);
    CHECK(maj.report.labeled_used == 0);
    CHECK(weak.report.accuracy >= 0.95);

    const auto full = run_full_supervision(f.data, oracle, cfg.train);
    CHECK(full.accuracy >= 0.95);
    CHECK(full.labeled_used == f.train.size());
    CHECK(oracle.reads() == f.train.size());

    std::vector<int> gold;
    for (const auto& d : f.train.documents()) gold.push_back(*d.gold);
    const auto same = train_and_evaluate(f.data, ProbabilisticLabels::one_hot(gold, 2), cfg.train, gold.size());
    CHECK(metrics::report_to_json(same) == metrics::report_to_json(full));

    CHECK_THROWS_AS(run_weak_supervision(f.data, {}, fit_cfg, cfg.train), ValidationError);
    CHECK_THROWS_AS(run_regime("bogus", f.data, oracle, lfs, cfg), ValidationError);
}

TEST_CASE("four-class weak supervision") {
    const Fixture f = synthetic(80, 0.0, 10, 4);
    GoldOracle oracle(f.train);
    ExperimentConfig cfg;
    const auto weak = run_regime("weak", f.data, oracle, pool_lfs(4, 10), cfg);
    CHECK(oracle.reads() == 0);
    CHECK_FALSE(weak.report.auc.has_value());
    CHECK(weak.report.accuracy >= 0.9);
}

TEST_CASE("compare is deterministic and complete") {
    const Fixture f = synthetic(60, 0.05, 12);
    ExperimentConfig cfg;
    cfg.apply_global_seed(7);
    cfg.train = quick_train();
    cfg.train.seed = derive_seed(7, 2);
    cfg.al.iterations = 5;
    cfg.ssl.seed_size = 20;
    cfg.ssl.iterations = 3;
    const auto lfs = pool_lfs(2, 3);
    const auto a = compare(f.data, f.train, lfs, cfg);
    const auto b = compare(f.data, f.train, lfs, cfg);
    CHECK(comparison_to_json(a) == comparison_to_json(b));
    std::set<std::string> keys;
    for (const auto& [k, v] : a) keys.insert(k);
    CHECK(keys == std::set<std::string>{"weak", "majority", "full", "active", "semi"});
    CHECK(a.at("weak").report.labeled_used == 0);
    CHECK(a.at("majority").report.labeled_used == 0);
    CHECK(a.at("full").report.labeled_used == f.train.size());
    CHECK(a.at("active").report.labeled_used == 25);
    CHECK(a.at("semi").report.labeled_used == 20);

    ExperimentConfig c2;
    c2.apply_global_seed(7);
    CHECK(c2.fit.seed != c2.train.seed);
    CHECK(c2.al.seed != c2.ssl.seed);
}

TEST_CASE("trajectory CSV") {
    Trajectory t;
    TrajectoryPoint p;
    p.iteration = 0;
    p.labeled_count = 20;
    p.metrics.accuracy = 0.5;
    p.accuracy_wilson = {0.25, 0.75};
    t.points.push_back(p);
    const std::string csv = trajectory_to_csv(t);
    CHECK(csv.rfind("iteration,labeled_count,accuracy,accuracy_wilson_lo,accuracy_wilson_hi,", 0) == 0);
    CHECK(csv.find("\n0,20,0.500000,0.250000,0.750000,,,,") != std::string::npos);
}

TEST_CASE("prepare validates inputs") {
    const Fixture f = synthetic(10, 0.0, 1);
    CHECK_FALSE(f.data.train_texts.any_gold());
    CHECK(f.data.test_gold.size() == f.test.size());
    CHECK_THROWS_AS(Dataset::prepare(f.train, f.test.without_gold()), ValidationError);
    GoldOracle bad_size(f.test);
    CHECK_THROWS_AS(run_full_supervision(f.data, bad_size, quick_train()), ValidationError);
}

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "dpkit/endmodel.hpp"
#include "test_util.hpp"

using namespace dpkit;

namespace {

Corpus corpus_of(const std::vector<std::string>& texts, std::vector<std::optional<int>> gold = {}) {
    std::vector<Document> docs;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        docs.push_back({"d" + std::to_string(i), texts[i], gold.empty() ? std::nullopt : gold[i]});
    }
    return Corpus(std::move(docs), {"neg", "pos"});
}

double norm(const FeatureVector& x) {
    double s = 0.0;
    for (double v : x.values) s += v * v;
    return std::sqrt(s);
}

// Random sparse features, about two thirds of the entries filled.
std::vector<FeatureVector> random_features(std::mt19937_64& gen, std::size_t n, std::size_t d) {
    std::normal_distribution<double> nd;
    std::vector<FeatureVector> out(n);
    for (auto& x : out) {
        x.dimension = d;
        for (std::size_t f = 0; f < d; ++f) {
            if (gen() % 3 == 0) continue;
            x.indices.push_back(static_cast<std::uint32_t>(f));
            x.values.push_back(nd(gen));
        }
    }
    return out;
}

ProbabilisticLabels random_labels(std::mt19937_64& gen, std::size_t n, int k) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> p(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < k; ++c) s += (p[i * k + c] = u(gen));
        for (int c = 0; c < k; ++c) p[i * k + c] /= s;
    }
    return ProbabilisticLabels::from_probs(std::move(p), k);
}

}  // namespace

TEST_CASE("tfidf fit") {
    const Corpus c = corpus_of({"apple banana", "apple cherry cherry", "apple"});
    const auto v = TfidfVectorizer::fit(c);
    CHECK(v.dimension() == 3);
    CHECK(*v.idf_of("apple") == doctest::Approx(1.0));
    CHECK(*v.idf_of("banana") == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
    CHECK(*v.idf_of("cherry") == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
    CHECK_FALSE(v.index_of("durian").has_value());
    for (double x : v.idf()) CHECK(x > 0.0);
    // Dense column indices in token order.
    CHECK(*v.index_of("apple") == 0);
    CHECK(*v.index_of("cherry") == 2);

    SUBCASE("max_features keeps the highest-df tokens") {
        std::vector<std::string> texts(120);
        for (int t = 0; t < 100; ++t) {
            // token t<j> appears in j+1 documents
            for (int d = 0; d <= t; ++d) texts[d] += " t" + std::to_string(t);
        }
        const auto capped = TfidfVectorizer::fit(corpus_of(texts), 10);
        CHECK(capped.dimension() == 10);
        for (int t = 90; t < 100; ++t) CHECK(capped.index_of("t" + std::to_string(t)).has_value());
        CHECK_FALSE(capped.index_of("t89").has_value());
    }
    SUBCASE("ties at the cap break by token order") {
        const auto capped = TfidfVectorizer::fit(corpus_of({"b a c", "c a b"}), 2);
        CHECK(capped.tokens() == std::vector<std::string>{"a", "b"});
    }
}

TEST_CASE("tfidf transform") {
    const Corpus c = corpus_of({"apple banana", "apple cherry cherry", "apple"});
    const auto v = TfidfVectorizer::fit(c);
    CHECK(v.transform("zebra yak").nnz() == 0);
    const auto one = v.transform("banana");
    REQUIRE(one.nnz() == 1);
    CHECK(one.values[0] == doctest::Approx(1.0));

    const auto two = v.transform("apple cherry cherry");
    REQUIRE(two.nnz() == 2);
    const double a = 1.0, ch = 2.0 * (std::log(2.0) + 1.0);
    const double nrm = std::sqrt(a * a + ch * ch);
    CHECK(two.indices[0] == *v.index_of("apple"));
    CHECK(two.values[0] == doctest::Approx(a / nrm));
    CHECK(two.values[1] == doctest::Approx(ch / nrm));

    SUBCASE("unit norm and sorted indices on random text") {
        std::mt19937_64 gen(4);
        std::vector<std::string> texts;
        for (int i = 0; i < 50; ++i) {
            std::string s;
            for (int w = 0; w < 12; ++w) s += " w" + std::to_string(gen() % 30);
            texts.push_back(s);
        }
        const auto vec = TfidfVectorizer::fit(corpus_of(texts), 20);
        for (const auto& x : vec.transform(corpus_of(texts))) {
            if (x.nnz() == 0) continue;
            CHECK(norm(x) == doctest::Approx(1.0).epsilon(1e-12));
            for (std::size_t q = 1; q < x.nnz(); ++q) CHECK(x.indices[q - 1] < x.indices[q]);
            CHECK(x.dimension == 20);
        }
    }
    SUBCASE("JSON round trip keeps the hash") {
        const auto back = TfidfVectorizer::from_json(v.to_json());
        CHECK(back.tokens() == v.tokens());
        CHECK(back.vocabulary_hash() == v.vocabulary_hash());
        CHECK(back.idf() == v.idf());
    }
}

TEST_CASE("linear model predictions") {
    LinearModel zero(3, 4);
    FeatureVector x{{0, 2}, {0.6, 0.8}, 4};
    for (double p : zero.predict_row(x)) CHECK(p == doctest::Approx(1.0 / 3.0));

    LinearModel m(2, 2);
    m.weight(1, 0) = 1.5;
    m.weight(1, 1) = -0.5;
    m.weight(0, 0) = 0.25;
    m.bias(1) = 0.1;
    const FeatureVector pt{{0, 1}, {0.6, 0.8}, 2};
    const double s1 = 1.5 * 0.6 - 0.5 * 0.8 + 0.1, s0 = 0.25 * 0.6;
    const auto p = m.predict_row(pt);
    CHECK(p[1] == doctest::Approx(1.0 / (1.0 + std::exp(s0 - s1))));
    CHECK(p[0] + p[1] == doctest::Approx(1.0));

    LinearModel shifted = m;
    for (int c = 0; c < 2; ++c) shifted.bias(c) += 7.0;
    const auto q = shifted.predict_row(pt);
    CHECK(q[0] == doctest::Approx(p[0]).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(p[1]).epsilon(1e-12));
}

TEST_CASE("objective gradient matches finite differences") {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> nd(0.0, 0.5);
    for (int k : {2, 3}) {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t n = 6, d = 5;
            const auto feats = random_features(gen, n, d);
            const auto labels = random_labels(gen, n, k);
            std::vector<double> rw(n);
            for (auto& w : rw) w = std::abs(nd(gen)) + 0.1;
            std::vector<std::size_t> rows = {0, 2, 3, 5};
            LinearModel m(k, d);
            for (auto& w : m.weights()) w = nd(gen);
            for (auto& b : m.biases()) b = nd(gen);
            std::vector<double> gw, gb;
            objective(m, feats, labels, rw, rows, 0.01, &gw, &gb);
            const double h = 1e-5;
            for (std::size_t q = 0; q < m.weights().size(); ++q) {
                LinearModel up = m, down = m;
                up.weights()[q] += h;
                down.weights()[q] -= h;
                const double num = (objective(up, feats, labels, rw, rows, 0.01) -
                                    objective(down, feats, labels, rw, rows, 0.01)) / (2 * h);
                CHECK(testutil::rel_err(gw[q], num) < 1e-5);
            }
            for (int c = 0; c < k; ++c) {
                LinearModel up = m, down = m;
                up.bias(c) += h;
                down.bias(c) -= h;
                const double num = (objective(up, feats, labels, rw, rows, 0.01) -
                                    objective(down, feats, labels, rw, rows, 0.01)) / (2 * h);
                CHECK(testutil::rel_err(gb[c], num) < 1e-5);
            }
        }
    }
}

TEST_CASE("train") {
    std::mt19937_64 gen(12);
    SUBCASE("zero epochs gives a uniform model") {
        const auto feats = random_features(gen, 10, 4);
        const auto labels = random_labels(gen, 10, 3);
        TrainConfig cfg;
        cfg.epochs = 0;
        const auto m = train(feats, labels, cfg);
        for (double w : m.weights()) CHECK(w == 0.0);
        const auto p = m.predict_proba(feats);
        for (double x : p.probs) CHECK(x == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("separable toy set reaches training accuracy 1") {
        std::vector<FeatureVector> feats;
        std::vector<int> y;
        std::uniform_real_distribution<double> u(0.1, 1.0);
        for (int i = 0; i < 20; ++i) {
            const int label = i % 2;
            const double a = u(gen), b = u(gen);
            // class 1 lives on feature 0, class 0 on feature 1
            FeatureVector x{{0, 1}, {label ? a + 1.0 : a * 0.2, label ? b * 0.2 : b + 1.0}, 2};
            feats.push_back(x);
            y.push_back(label);
        }
        TrainConfig cfg;
        cfg.epochs = 500;
        const auto m = train(feats, ProbabilisticLabels::one_hot(y, 2), cfg);
        CHECK(m.predict_proba(feats).predicted == y);
    }
    SUBCASE("impossible filter threshold") {
        const auto feats = random_features(gen, 5, 3);
        const auto labels = random_labels(gen, 5, 2);
        TrainConfig cfg;
        cfg.noise_mode = NoiseMode::filter;
        cfg.filter_threshold = 1.1;
        try {
            train(feats, labels, cfg);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()) == "no confident samples");
        }
    }
    SUBCASE("filter keeps rows at or above the threshold") {
        const std::vector<FeatureVector> feats(4, FeatureVector{{0}, {1.0}, 1});
        const auto labels = ProbabilisticLabels::from_probs({0.9, 0.1, 0.8, 0.2, 0.5, 0.5, 0.55, 0.45}, 2);
        TrainConfig cfg;
        cfg.noise_mode = NoiseMode::filter;
        cfg.filter_threshold = 0.6;
        cfg.epochs = 1;
        CHECK(train_detailed(feats, labels, cfg).rows_used == 2);
    }
    SUBCASE("weight mode with full confidence equals filter mode at zero") {
        const auto feats = random_features(gen, 40, 6);
        std::vector<int> y(40);
        for (auto& v : y) v = static_cast<int>(gen() % 2);
        const auto labels = ProbabilisticLabels::one_hot(y, 2);
        TrainConfig w;
        w.epochs = 15;
        w.seed = 9;
        TrainConfig f = w;
        f.noise_mode = NoiseMode::filter;
        f.filter_threshold = 0.0;
        const auto a = train_detailed(feats, labels, w);
        const auto b = train_detailed(feats, labels, f);
        CHECK(a.model.weights() == b.model.weights());
        CHECK(a.model.biases() == b.model.biases());
        CHECK(a.epoch_loss == b.epoch_loss);
    }
    SUBCASE("full-batch loss never increases") {
        const auto feats = random_features(gen, 30, 8);
        const auto labels = random_labels(gen, 30, 3);
        TrainConfig cfg;
        cfg.batch_size = 30;
        cfg.learning_rate = 0.05;
        cfg.epochs = 100;
        const auto r = train_detailed(feats, labels, cfg);
        for (std::size_t e = 1; e < r.epoch_loss.size(); ++e) CHECK(r.epoch_loss[e] <= r.epoch_loss[e - 1] + 1e-12);
    }
    SUBCASE("deterministic in seed") {
        const auto feats = random_features(gen, 30, 5);
        const auto labels = random_labels(gen, 30, 2);
        TrainConfig cfg;
        cfg.epochs = 5;
        CHECK(train(feats, labels, cfg).weights() == train(feats, labels, cfg).weights());
    }
    SUBCASE("rejects mismatched inputs") {
        const auto feats = random_features(gen, 3, 2);
        CHECK_THROWS_AS(train(feats, random_labels(gen, 4, 2), TrainConfig{}), ValidationError);
        CHECK_THROWS_AS(train({}, random_labels(gen, 0, 2), TrainConfig{}), ValidationError);
    }
}

TEST_CASE("model file round trip") {
    const Corpus c = corpus_of({"good fine", "bad awful", "good good"}, {1, 0, 1});
    const auto vec = TfidfVectorizer::fit(c);
    const auto feats = vec.transform(c);
    TrainConfig cfg;
    cfg.epochs = 20;
    const auto m = train(feats, ProbabilisticLabels::one_hot(std::vector<int>{1, 0, 1}, 2), cfg);
    TfidfVectorizer restored_vec;
    const auto back = LinearModel::from_json(m.to_json(vec, cfg), &restored_vec);
    CHECK(back.weights() == m.weights());
    CHECK(back.biases() == m.biases());
    CHECK(restored_vec.vocabulary_hash() == vec.vocabulary_hash());
    CHECK(back.predict_proba(restored_vec.transform(c)).probs == m.predict_proba(feats).probs);
}

TEST_CASE("features CSV") {
    const std::vector<FeatureVector> feats = {{{1}, {1.0}, 3}, {{}, {}, 3}, {{0, 2}, {0.6, 0.8}, 3}};
    const std::vector<std::string> ids = {"a", "b", "c"};
    CHECK(features_to_csv(feats, ids) == "doc_id,index,value\na,1,1.000000\nc,0,0.600000\nc,2,0.800000\n");
}

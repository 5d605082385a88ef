#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"

#include "dpkit/io.hpp"
#include "dpkit/labeling.hpp"
#include "test_util.hpp"

using namespace dpkit;

namespace {

Corpus make_corpus(const std::vector<std::string>& texts, int k = 2) {
    std::vector<Document> docs;
    for (std::size_t i = 0; i < texts.size(); ++i) docs.push_back({"d" + std::to_string(i), texts[i], std::nullopt});
    std::vector<std::string> names;
    for (int c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
    return Corpus(std::move(docs), std::move(names));
}

// Brute-force nearest-rank percentile cut over a df table.
std::set<std::string> percentile_oracle(const std::map<std::string, std::size_t>& df, double pct) {
    std::vector<std::size_t> v;
    for (const auto& [t, c] : df) v.push_back(c);
    std::sort(v.begin(), v.end());
    std::size_t rank = 1;
    while (static_cast<double>(rank) < pct / 100.0 * static_cast<double>(v.size())) ++rank;
    const std::size_t cut = v[rank - 1];
    std::set<std::string> out;
    for (const auto& [t, c] : df) {
        if (c >= cut) out.insert(t);
    }
    return out;
}

}  // namespace

TEST_CASE("extract_frequent_unigrams") {
    SUBCASE("a token in every document survives any percentile") {
        const Corpus c = make_corpus({"the cat", "the dog", "the end", "the rest"});
        const auto out = extract_frequent_unigrams(c, 95.0, {});
        REQUIRE_FALSE(out.empty());
        CHECK(out[0] == TokenFrequency{"the", 4});
    }
    SUBCASE("percentile zero keeps every non-stopword token") {
        const Corpus c = make_corpus({"a b c", "b c d", "e"});
        const auto out = extract_frequent_unigrams(c, 0.0, {"a"});
        CHECK(out.size() == 4);
        // df desc then token asc.
        CHECK(out[0].token == "b");
        CHECK(out[1].token == "c");
        CHECK(out[2].token == "d");
        CHECK(out[3].token == "e");
    }
    SUBCASE("engineered 100-doc corpus matches a brute-force percentile") {
        // Token t<j> appears in the first (j * 7) % 100 + 1 documents.
        std::vector<std::string> texts(100);
        std::map<std::string, std::size_t> df;
        for (int j = 0; j < 60; ++j) {
            const std::size_t count = static_cast<std::size_t>((j * 7) % 100 + 1);
            const std::string tok = "t" + std::to_string(j);
            df[tok] = count;
            for (std::size_t d = 0; d < count; ++d) texts[d] += " " + tok;
        }
        for (auto& t : texts) t += " stop";
        const Corpus c = make_corpus(texts);
        for (double pct : {50.0, 80.0, 90.0, 95.0, 99.0}) {
            const auto out = extract_frequent_unigrams(c, pct, {"stop"});
            std::set<std::string> got;
            for (const auto& tf : out) {
                got.insert(tf.token);
                CHECK(tf.document_frequency == df[tf.token]);
            }
            CHECK(got == percentile_oracle(df, pct));
        }
    }
}

TEST_CASE("assign_by_lexicon") {
    const Lexicon lex = {{"masterpiece", 2.0}, {"awful", -2.5}, {"okay", 0.1}, {"edge", 0.5}, {"low", -0.5}};
    const std::vector<std::string> cands = {"masterpiece", "awful", "okay", "missing", "edge", "low"};
    const auto lfs = assign_by_lexicon(cands, lex, 0.5, -0.5);
    REQUIRE(lfs.size() == 4);
    CHECK(lfs[0].keyword == "masterpiece");
    CHECK(lfs[0].class_id == 1);
    CHECK(lfs[0].name == "kw:masterpiece");
    CHECK(lfs[1].class_id == 0);
    CHECK(lfs[2].keyword == "edge");
    CHECK(lfs[2].class_id == 1);
    CHECK(lfs[3].keyword == "low");
    CHECK(lfs[3].class_id == 0);
    CHECK_THROWS_AS(assign_by_lexicon(cands, lex, 0.0, 0.0), ValidationError);
}

TEST_CASE("assign_by_similarity") {
    EmbeddingTable table;
    table.add("alpha", {1, 0, 0});
    table.add("beta", {0, 1, 0});
    table.add("same", {2, 0, 0});
    table.add("ortho", {0, 0, 1});
    const std::vector<std::string> classes = {"alpha", "beta"};

    auto lfs = assign_by_similarity(std::vector<std::string>{"same"}, classes, table, 0.5);
    REQUIRE(lfs.size() == 1);
    CHECK(lfs[0].class_id == 0);

    CHECK(assign_by_similarity(std::vector<std::string>{"ortho", "absent"}, classes, table, 0.1).empty());
    CHECK_THROWS_AS(assign_by_similarity(std::vector<std::string>{"same"}, std::vector<std::string>{"gamma"}, table, 0.1),
                    ValidationError);

    SUBCASE("random vectors match brute-force cosine argmax") {
        std::mt19937_64 gen(3);
        std::normal_distribution<double> nd;
        for (int trial = 0; trial < 20; ++trial) {
            EmbeddingTable t(6);
            std::vector<std::vector<double>> vecs;
            std::vector<std::string> names, cands;
            for (int i = 0; i < 9; ++i) {
                std::vector<double> v(6);
                for (auto& x : v) x = nd(gen);
                vecs.push_back(v);
                t.add("tok" + std::to_string(i), v);
                (i < 4 ? names : cands).push_back("tok" + std::to_string(i));
            }
            const double threshold = 0.2;
            const auto got = assign_by_similarity(cands, names, t, threshold);
            std::vector<KeywordLF> expect;
            for (int i = 4; i < 9; ++i) {
                int best = -1;
                double best_sim = -2.0;
                for (int c = 0; c < 4; ++c) {
                    double dot = 0, na = 0, nb = 0;
                    for (int q = 0; q < 6; ++q) {
                        dot += vecs[i][q] * vecs[c][q];
                        na += vecs[i][q] * vecs[i][q];
                        nb += vecs[c][q] * vecs[c][q];
                    }
                    const double s = dot / std::sqrt(na * nb);
                    if (s > best_sim) {
                        best_sim = s;
                        best = c;
                    }
                }
                if (best_sim >= threshold) expect.push_back(KeywordLF::make("tok" + std::to_string(i), best));
            }
            REQUIRE(got.size() == expect.size());
            for (std::size_t q = 0; q < got.size(); ++q) {
                CHECK(got[q].keyword == expect[q].keyword);
                CHECK(got[q].class_id == expect[q].class_id);
                CHECK(got[q].class_id < 4);
            }
        }
    }
}

TEST_CASE("apply_lfs") {
    SUBCASE("keyword presence votes") {
        const Corpus c = make_corpus({"a fine movie", "nothing here"});
        const std::vector<KeywordLF> lfs = {KeywordLF::make("fine", 1)};
        const VoteMatrix v = apply_lfs(lfs, c);
        CHECK(v.at(0, 0) == 1);
        CHECK(v.at(1, 0) == kAbstain);
    }
    SUBCASE("hand-built 3x2 matrix") {
        const Corpus c = make_corpus({"Good, not BAD.", "bad bad bad", "neutral text"});
        const std::vector<KeywordLF> lfs = {KeywordLF::make("good", 1), KeywordLF::make("bad", 0)};
        const VoteMatrix v = apply_lfs(lfs, c);
        const std::vector<int> expect = {1, 0, kAbstain, 0, kAbstain, kAbstain};
        CHECK(std::vector<int>(v.data().begin(), v.data().end()) == expect);
        CHECK(v.lf_names() == std::vector<std::string>{"kw:good", "kw:bad"});
        CHECK(v.doc_ids() == std::vector<std::string>{"d0", "d1", "d2"});
    }
    SUBCASE("permuting LFs permutes columns") {
        const Corpus c = make_corpus({"x y z", "y", "z w", "w x", ""}, 3);
        std::vector<KeywordLF> lfs = {KeywordLF::make("x", 0), KeywordLF::make("y", 1), KeywordLF::make("z", 2),
                                      KeywordLF::make("w", 1)};
        const VoteMatrix base = apply_lfs(lfs, c);
        std::vector<std::size_t> perm = {0, 1, 2, 3};
        std::mt19937_64 gen(1);
        for (int trial = 0; trial < 10; ++trial) {
            std::shuffle(perm.begin(), perm.end(), gen);
            std::vector<KeywordLF> permuted;
            for (auto p : perm) permuted.push_back(lfs[p]);
            const VoteMatrix v = apply_lfs(permuted, c);
            for (std::size_t i = 0; i < c.size(); ++i) {
                for (std::size_t j = 0; j < perm.size(); ++j) CHECK(v.at(i, j) == base.at(i, perm[j]));
            }
        }
    }
    SUBCASE("class id outside K") {
        const Corpus c = make_corpus({"x"});
        const std::vector<KeywordLF> lfs = {KeywordLF::make("x", 2)};
        CHECK_THROWS_AS(apply_lfs(lfs, c), ValidationError);
    }
}

TEST_CASE("diagnostics") {
    SUBCASE("all-abstain column") {
        const VoteMatrix v({1, kAbstain, 0, kAbstain}, 2, 2, 2);
        const std::vector<int> gold = {1, 0};
        const auto d = diagnostics(v, std::span<const int>(gold));
        CHECK(d.coverage[1] == 0.0);
        CHECK_FALSE(d.accuracy[1].has_value());
        CHECK(d.polarity[1] == kAbstain);
        CHECK(*d.accuracy[0] == 1.0);
    }
    SUBCASE("identical full columns") {
        const VoteMatrix v({1, 1, 0, 0, 1, 1}, 3, 2, 2);
        const auto d = diagnostics(v);
        CHECK(d.overlap == 1.0);
        CHECK(d.conflict == 0.0);
        CHECK_FALSE(d.accuracy[0].has_value());
    }
    SUBCASE("random matrices match a brute-force row scan") {
        std::mt19937_64 gen(17);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t n = 20, m = 4;
            std::vector<int> votes(n * m), gold(n);
            for (auto& x : votes) x = static_cast<int>(gen() % 4) - 1;  // {-1, 0, 1, 2}
            for (auto& g : gold) g = static_cast<int>(gen() % 3);
            const VoteMatrix v(votes, n, m, 3);
            const auto d = diagnostics(v, std::span<const int>(gold));
            for (std::size_t j = 0; j < m; ++j) {
                std::size_t cov = 0, ok = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (votes[i * m + j] == kAbstain) continue;
                    ++cov;
                    ok += votes[i * m + j] == gold[i];
                }
                CHECK(d.coverage[j] == static_cast<double>(cov) / n);
                if (cov) CHECK(*d.accuracy[j] == static_cast<double>(ok) / cov);
            }
            std::size_t ov = 0, cf = 0;
            for (std::size_t i = 0; i < n; ++i) {
                std::set<int> seen;
                int cnt = 0;
                for (std::size_t j = 0; j < m; ++j) {
                    if (votes[i * m + j] == kAbstain) continue;
                    ++cnt;
                    seen.insert(votes[i * m + j]);
                }
                ov += cnt >= 2;
                cf += seen.size() >= 2;
            }
            CHECK(d.overlap == static_cast<double>(ov) / n);
            CHECK(d.conflict == static_cast<double>(cf) / n);
        }
    }
}

TEST_CASE("file formats") {
    SUBCASE("vote CSV round-trips") {
        const VoteMatrix v({1, kAbstain, 0, 2}, 2, 2, 3, {"kw:a", "kw:b"}, {"x", "y,z"});
        const std::string csv = votes_to_csv(v);
        CHECK(csv == "doc_id,kw:a,kw:b\nx,1,\n\"y,z\",0,2\n");
        const VoteMatrix back = parse_votes_csv(csv, 3);
        CHECK(std::vector<int>(back.data().begin(), back.data().end()) ==
              std::vector<int>(v.data().begin(), v.data().end()));
        CHECK(back.doc_ids() == v.doc_ids());
        CHECK_THROWS_AS(parse_votes_csv(csv, 2), ParseError);
    }
    SUBCASE("LF JSON round-trips") {
        const std::vector<KeywordLF> lfs = {KeywordLF::make("don't", 0), {"great", 1, "custom"}};
        const auto back = parse_lfs_json(lfs_to_json(lfs), 2);
        REQUIRE(back.size() == 2);
        CHECK(back[0].keyword == "don't");
        CHECK(back[1].name == "custom");
        CHECK_THROWS_AS(parse_lfs_json(R"([{"keyword":"two words","class":0}])", 2), ValidationError);
        CHECK_THROWS_AS(parse_lfs_json(R"([{"keyword":"x","class":4}])", 2), ValidationError);
    }
    SUBCASE("lexicon TSV") {
        const Lexicon lex = parse_lexicon("# comment\ngood\t1.9\t0.5\t[1,2]\nbad\t-2.5\n");
        CHECK(lex.at("good") == 1.9);
        CHECK(lex.at("bad") == -2.5);
        CHECK_THROWS_AS(parse_lexicon("good 1.9\n"), ParseError);
        CHECK_THROWS_AS(parse_lexicon("good\tabc\n"), ParseError);
    }
    SUBCASE("embedding text file") {
        const EmbeddingTable t = parse_embeddings("a 1 2 3\nb 0.5 -1 2e-1\n");
        CHECK(t.dimension() == 3);
        CHECK((*t.find("b"))[2] == doctest::Approx(0.2));
        CHECK_THROWS_AS(parse_embeddings("a 1 2\nb 1\n"), ParseError);
        CHECK_THROWS_AS(parse_embeddings("a 1 x\n"), ParseError);
    }
}

TEST_CASE("shipped keyword fixtures parse as LF sets") {
    const std::filesystem::path root = DPKIT_SOURCE_DIR;
    const auto imdb = load_lfs(root / "fixtures" / "imdb_keywords.json", 2);
    const auto news = load_lfs(root / "fixtures" / "newsgroups_keywords.json", 4);
    std::size_t pos = 0;
    for (const auto& lf : imdb) pos += lf.class_id == 1;
    CHECK(pos == 97);
    CHECK(imdb.size() - pos == 67);
    CHECK(std::any_of(imdb.begin(), imdb.end(), [](const KeywordLF& lf) { return lf.keyword == "don't"; }));
    CHECK(news.size() == 38 + 41 + 45 + 30);
    const auto stop = load_stopwords(root / "fixtures" / "stopwords.txt");
    CHECK(stop == default_stopwords());
}

#include "dpkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "json.hpp"

#include "dpkit/common.hpp"
#include "dpkit/io.hpp"

namespace dpkit {

using nlohmann::json;

Corpus::Corpus(std::vector<Document> documents, std::vector<std::string> class_names)
    : documents_(std::move(documents)), class_names_(std::move(class_names)) {
    if (class_names_.size() < 2) throw ValidationError("corpus needs at least 2 classes");
    std::unordered_set<std::string> ids;
    for (const auto& d : documents_) {
        if (d.id.empty()) throw ValidationError("document id must be non-empty");
        if (!ids.insert(d.id).second) throw ValidationError("duplicate document id: " + d.id);
        if (d.gold && (*d.gold < 0 || *d.gold >= num_classes())) {
            throw ValidationError("document " + d.id + ": label " + std::to_string(*d.gold) +
                                  " outside [0, " + std::to_string(num_classes()) + ")");
        }
    }
}

bool Corpus::all_gold() const {
    for (const auto& d : documents_) {
        if (!d.gold) return false;
    }
    return true;
}

bool Corpus::any_gold() const {
    for (const auto& d : documents_) {
        if (d.gold) return true;
    }
    return false;
}

Corpus Corpus::without_gold() const {
    std::vector<Document> docs = documents_;
    for (auto& d : docs) d.gold.reset();
    return Corpus(std::move(docs), class_names_);
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
    std::vector<Document> docs;
    docs.reserve(indices.size());
    for (std::size_t i : indices) docs.push_back(documents_.at(i));
    return Corpus(std::move(docs), class_names_);
}

Corpus parse_jsonl(std::string_view contents, std::vector<std::string> class_names) {
    const int k = static_cast<int>(class_names.size());
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    for (const auto& line : io::split_lines(contents)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);
        if (!obj.contains("id") || !obj["id"].is_string()) throw ParseError("missing string field 'id'", line_no);
        if (!obj.contains("text") || !obj["text"].is_string()) {
            throw ParseError("missing string field 'text'", line_no);
        }
        Document doc{obj["id"].get<std::string>(), obj["text"].get<std::string>(), std::nullopt};
        if (doc.id.empty()) throw ParseError("empty id", line_no);
        if (obj.contains("label") && !obj["label"].is_null()) {
            if (!obj["label"].is_number_integer()) throw ParseError("'label' must be an integer", line_no);
            const auto label = obj["label"].get<long long>();
            if (label < 0 || label >= k) {
                throw ParseError("label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")",
                                 line_no);
            }
            doc.gold = static_cast<int>(label);
        }
        if (!seen.insert(doc.id).second) throw ParseError("duplicate id '" + doc.id + "'", line_no);
        docs.push_back(std::move(doc));
    }
    return Corpus(std::move(docs), std::move(class_names));
}

Corpus load_jsonl(const std::filesystem::path& path, std::vector<std::string> class_names) {
    return parse_jsonl(io::read_file(path), std::move(class_names));
}

std::string to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& d : corpus.documents()) {
        json obj = {{"id", d.id}, {"text", d.text}};
        if (d.gold) obj["label"] = *d.gold;
        out += obj.dump();
        out += '\n';
    }
    return out;
}

std::vector<std::string> load_class_names(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("class manifest " + path.string() + ": " + e.what(), 0);
    }
    if (!j.is_array()) throw ValidationError("class manifest must be a JSON list of strings");
    std::vector<std::string> names;
    for (const auto& v : j) {
        if (!v.is_string()) throw ValidationError("class manifest must be a JSON list of strings");
        names.push_back(v.get<std::string>());
    }
    return names;
}

std::string class_names_json(const std::vector<std::string>& names) {
    return json(names).dump() + "\n";
}

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_word_byte(c)) {
            cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (c == '\'' && !cur.empty() && i + 1 < text.size() &&
                   is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
            cur += '\'';
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError("test fraction must lie in (0, 1)");
    }
    if (corpus.empty()) throw ValidationError("cannot split an empty corpus");
    const std::size_t n = corpus.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span(order));
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    // Keep corpus order inside each side.
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {corpus.subset(train_idx), corpus.subset(test_idx)};
}

void SynthSpec::validate() const {
    if (num_classes < 2) throw ValidationError("synthetic corpus needs at least 2 classes");
    if (keyword_pools.size() != static_cast<std::size_t>(num_classes)) {
        throw ValidationError("need one keyword pool per class");
    }
    for (const auto& pool : keyword_pools) {
        if (pool.empty()) throw ValidationError("empty keyword pool");
    }
    if (!(keyword_flip_prob >= 0.0 && keyword_flip_prob <= 1.0)) {
        throw ValidationError("keyword_flip_prob must lie in [0, 1]");
    }
    if (noise_words_per_doc > 0 && noise_words.empty()) {
        throw ValidationError("noise words requested but noise vocabulary is empty");
    }
    if (!class_names.empty() && class_names.size() != static_cast<std::size_t>(num_classes)) {
        throw ValidationError("class_names must have one entry per class");
    }
    std::set<std::string> noise(noise_words.begin(), noise_words.end());
    for (const auto& pool : keyword_pools) {
        for (const auto& w : pool) {
            if (noise.count(w)) throw ValidationError("keyword '" + w + "' also appears in noise words");
            const auto toks = tokenize(w);
            if (toks.size() != 1 || toks[0] != w) throw ValidationError("keyword '" + w + "' is not a single token");
        }
    }
}

SynthSpec default_synth_spec(int num_classes, std::size_t docs_per_class, std::size_t pool_size,
                             std::size_t noise_vocab, std::uint64_t seed) {
    SynthSpec spec;
    spec.num_classes = num_classes;
    spec.docs_per_class = docs_per_class;
    spec.seed = seed;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<std::string> pool;
        for (std::size_t j = 0; j < pool_size; ++j) {
            pool.push_back("c" + std::to_string(c) + "kw" + std::to_string(j));
        }
        spec.keyword_pools.push_back(std::move(pool));
    }
    for (std::size_t j = 0; j < noise_vocab; ++j) spec.noise_words.push_back("w" + std::to_string(j));
    if (noise_vocab == 0) spec.noise_words_per_doc = 0;
    return spec;
}

Corpus generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::vector<std::string> names = spec.class_names;
    if (names.empty()) {
        for (int c = 0; c < spec.num_classes; ++c) names.push_back("class_" + std::to_string(c));
    }
    Rng rng(spec.seed);
    std::vector<Document> docs;
    docs.reserve(spec.docs_per_class * static_cast<std::size_t>(spec.num_classes));
    const auto k = static_cast<std::uint64_t>(spec.num_classes);
    for (int c = 0; c < spec.num_classes; ++c) {
        for (std::size_t d = 0; d < spec.docs_per_class; ++d) {
            std::vector<std::string> words;
            for (std::size_t w = 0; w < spec.keywords_per_doc; ++w) {
                std::size_t pool_class = static_cast<std::size_t>(c);
                if (rng.bernoulli(spec.keyword_flip_prob)) {
                    // Uniform over the K-1 wrong classes.
                    auto other = rng.below(k - 1);
                    if (other >= static_cast<std::uint64_t>(c)) ++other;
                    pool_class = static_cast<std::size_t>(other);
                }
                const auto& pool = spec.keyword_pools[pool_class];
                words.push_back(pool[rng.below(pool.size())]);
            }
            for (std::size_t w = 0; w < spec.noise_words_per_doc; ++w) {
                words.push_back(spec.noise_words[rng.below(spec.noise_words.size())]);
            }
            rng.shuffle(std::span(words));
            std::string text;
            for (const auto& w : words) {
                if (!text.empty()) text += ' ';
                text += w;
            }
            docs.push_back({"c" + std::to_string(c) + "_d" + std::to_string(d), std::move(text), c});
        }
    }
    return Corpus(std::move(docs), std::move(names));
}

}  // namespace dpkit

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpkit/common.hpp"

namespace dpkit {

struct Document {
    std::string id;
    std::string text;
    std::optional<int> gold;  // class id in [0, K); evaluation and simulated oracles only
};

// Ordered, immutable collection of documents over K >= 2 named classes.
// Index i identifies the same document across every derived structure.
class Corpus {
public:
    Corpus(std::vector<Document> documents, std::vector<std::string> class_names);

    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }
    int num_classes() const noexcept { return static_cast<int>(class_names_.size()); }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    const std::vector<Document>& documents() const noexcept { return documents_; }
    const Document& operator[](std::size_t i) const { return documents_[i]; }

    bool all_gold() const;
    bool any_gold() const;

    // Copy with every gold label removed.
    Corpus without_gold() const;

    Corpus subset(std::span<const std::size_t> indices) const;

private:
    std::vector<Document> documents_;
    std::vector<std::string> class_names_;
};

// One JSON object per line: {"id": str, "text": str, "label": int (optional)}.
Corpus load_jsonl(const std::filesystem::path& path, std::vector<std::string> class_names);
Corpus parse_jsonl(std::string_view contents, std::vector<std::string> class_names);
std::string to_jsonl(const Corpus& corpus);

// Class-name manifest: a JSON list of strings.
std::vector<std::string> load_class_names(const std::filesystem::path& path);
std::string class_names_json(const std::vector<std::string>& names);

// Lowercases ASCII, splits on anything that is not a letter, digit or a
// non-ASCII byte, and keeps apostrophes that sit between two word characters.
std::vector<std::string> tokenize(std::string_view text);

// Shuffled train/test split; |test| = round(n * test_fraction).
std::pair<Corpus, Corpus> split(const Corpus& corpus, double test_fraction, std::uint64_t seed);

struct SynthSpec {
    int num_classes = 2;
    std::size_t docs_per_class = 100;
    std::vector<std::vector<std::string>> keyword_pools;  // one per class
    std::vector<std::string> noise_words;
    std::size_t keywords_per_doc = 5;
    std::size_t noise_words_per_doc = 10;
    double keyword_flip_prob = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> class_names;  // defaults to class_0..class_{K-1}

    void validate() const;
};

// Pools of `pool_size` distinct keywords per class (c<k>kw<j>) and a noise
// vocabulary (w<j>) that never collides with them.
SynthSpec default_synth_spec(int num_classes, std::size_t docs_per_class, std::size_t pool_size,
                             std::size_t noise_vocab, std::uint64_t seed);

// Documents are emitted class-major (all class 0 docs, then class 1, ...);
// each doc's gold is its generating class.
Corpus generate_synthetic(const SynthSpec& spec);

}  // namespace dpkit

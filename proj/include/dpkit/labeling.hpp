#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dpkit/common.hpp"
#include "dpkit/corpus.hpp"

namespace dpkit {

// Votes class_id on every document whose token set contains keyword.
struct KeywordLF {
    std::string keyword;
    int class_id = 0;
    std::string name;  // "kw:<keyword>" unless set explicitly

    static KeywordLF make(std::string keyword, int class_id);
};

// n x m matrix of LF outputs: class ids in [0, K) or kAbstain.
class VoteMatrix {
public:
    VoteMatrix() = default;
    VoteMatrix(std::size_t rows, std::size_t cols, int num_classes);
    VoteMatrix(std::vector<int> votes, std::size_t rows, std::size_t cols, int num_classes,
               std::vector<std::string> lf_names = {}, std::vector<std::string> doc_ids = {});

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    int num_classes() const noexcept { return num_classes_; }

    int at(std::size_t i, std::size_t j) const { return votes_[i * cols_ + j]; }
    void set(std::size_t i, std::size_t j, int vote);
    std::span<const int> row(std::size_t i) const { return {votes_.data() + i * cols_, cols_}; }
    std::span<const int> data() const noexcept { return votes_; }

    const std::vector<std::string>& lf_names() const noexcept { return lf_names_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }

    // Copy restricted to the given rows (in that order).
    VoteMatrix select_rows(std::span<const std::size_t> indices) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    int num_classes_ = 2;
    std::vector<int> votes_;
    std::vector<std::string> lf_names_;
    std::vector<std::string> doc_ids_;
};

using Lexicon = std::unordered_map<std::string, double>;

class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

    // Throws on dimension mismatch or non-finite entries; later duplicates replace earlier ones.
    void add(std::string token, std::vector<double> vector);
    const std::vector<double>* find(const std::string& token) const;
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return table_.size(); }

private:
    std::size_t dimension_ = 0;
    std::unordered_map<std::string, std::vector<double>> table_;
};

struct TokenFrequency {
    std::string token;
    std::size_t document_frequency = 0;

    bool operator==(const TokenFrequency&) const = default;
};

struct LFDiagnostics {
    std::vector<double> coverage;
    std::vector<int> polarity;  // most frequent vote in the column, kAbstain if none
    std::vector<std::optional<double>> accuracy;
    double overlap = 0.0;
    double conflict = 0.0;
};

inline constexpr double kDefaultPercentile = 95.0;
inline constexpr double kDefaultLexiconPositive = 0.5;
inline constexpr double kDefaultLexiconNegative = -0.5;
inline constexpr double kDefaultSimilarityThreshold = 0.3;

// Non-stopword tokens whose document frequency reaches the nearest-rank
// percentile of the df distribution. Sorted by df desc, then token asc.
std::vector<TokenFrequency> extract_frequent_unigrams(const Corpus& corpus, double percentile,
                                                      const std::set<std::string>& stopwords);

// Binary assignment: score >= pos -> class 1, score <= neg -> class 0, else dropped.
std::vector<KeywordLF> assign_by_lexicon(std::span<const std::string> candidates, const Lexicon& lexicon,
                                         double pos_threshold = kDefaultLexiconPositive,
                                         double neg_threshold = kDefaultLexiconNegative);

// Assigns each candidate to the class name with the highest cosine similarity,
// kept only when that similarity reaches the threshold.
std::vector<KeywordLF> assign_by_similarity(std::span<const std::string> candidates,
                                            std::span<const std::string> class_names, const EmbeddingTable& table,
                                            double threshold = kDefaultSimilarityThreshold);

VoteMatrix apply_lfs(std::span<const KeywordLF> lfs, const Corpus& corpus);

LFDiagnostics diagnostics(const VoteMatrix& votes, std::optional<std::span<const int>> gold = std::nullopt);

// Shipped English stopword list; excludes negations such as "not" and "don't".
const std::set<std::string>& default_stopwords();

std::set<std::string> load_stopwords(const std::filesystem::path& path);
// TSV "token<TAB>score"; blank lines and lines starting with '#' are skipped.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::string_view contents);
// "token v1 v2 ... vd" per line.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::string_view contents);

// JSON list of {"keyword": str, "class": int, "name": str}.
std::vector<KeywordLF> parse_lfs_json(std::string_view contents, int num_classes);
std::vector<KeywordLF> load_lfs(const std::filesystem::path& path, int num_classes);
std::string lfs_to_json(std::span<const KeywordLF> lfs);

// Header "doc_id,<lf names...>"; ABSTAIN is an empty cell.
std::string votes_to_csv(const VoteMatrix& votes);
VoteMatrix parse_votes_csv(std::string_view contents, int num_classes);

}  // namespace dpkit

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqlab/tensor.hpp"

namespace seqlab {

using TokenId = std::int32_t;

/// Bidirectional token <-> id map. <eos> and <unk> are always reserved;
/// <sep> additionally in translation mode. Non-reserved ids are assigned by
/// descending frequency with lexicographic tie-break, so a vocabulary is a
/// pure function of its training text.
class Vocabulary {
public:
    static constexpr const char* kEos = "<eos>";
    static constexpr const char* kUnk = "<unk>";
    static constexpr const char* kSep = "<sep>";

    /// Builds from token counts, capped at max_size entries total.
    static Vocabulary build(const std::unordered_map<std::string, std::size_t>& counts,
                            std::size_t max_size, bool with_sep);

    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

    TokenId eos_id() const { return 0; }
    TokenId unk_id() const { return 1; }
    TokenId sep_id() const;
    bool has_sep() const { return has_sep_; }

    std::size_t size() const { return id_to_token_.size(); }
    TokenId lookup(const std::string& token) const;  // <unk> for unknown tokens
    std::optional<TokenId> find(const std::string& token) const;
    const std::string& token(TokenId id) const;
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
    bool has_sep_ = false;

    void index_tokens();
};

/// Corpus reshaped into B contiguous streams. Stream b is column b; row r of
/// column b is token b*rows + r of the (truncated) corpus, so successive
/// windows continue each stream exactly where the previous one stopped.
class BatchedCorpus {
public:
    BatchedCorpus(const std::vector<TokenId>& tokens, std::size_t batch);

    std::size_t batch() const { return batch_; }
    std::size_t rows() const { return rows_; }
    std::size_t window_count(std::size_t steps) const;

    struct Window {
        std::vector<TokenId> inputs;   // [T x B] row-major
        std::vector<TokenId> targets;  // [T x B], targets[t] == inputs[t+1]
        std::size_t steps = 0;
        std::size_t batch = 0;
    };

    /// Window k covers input rows [k*steps, k*steps + T). include_tail adds
    /// one final shorter window when rows - 1 is not a multiple of steps.
    Window window(std::size_t k, std::size_t steps) const;
    std::vector<Window> windows(std::size_t steps, bool include_tail = false) const;

    TokenId at(std::size_t row, std::size_t col) const { return grid_[row * batch_ + col]; }

private:
    std::vector<TokenId> grid_;  // [rows x B]
    std::size_t batch_ = 0;
    std::size_t rows_ = 0;
};

struct Corpus {
    std::vector<TokenId> ids;
    Vocabulary vocab;
};

std::vector<std::string> split_tokens(const std::string& line);

/// Tokenizes whitespace-separated text, one sentence per line, appending
/// <eos> per line. Builds the vocabulary when none is supplied.
Corpus load_corpus(const std::filesystem::path& path, const Vocabulary* vocab = nullptr,
                   std::size_t vocab_cap = 10000, bool with_sep = false);

Corpus corpus_from_text(const std::string& text, const Vocabulary* vocab = nullptr,
                        std::size_t vocab_cap = 10000, bool with_sep = false);

/// Translation-as-LM format: per pair, source tokens, <sep>, target tokens,
/// <eos>, all chained into one id sequence.
std::vector<TokenId> concat_pairs(const std::vector<std::string>& source_lines,
                                  const std::vector<std::string>& target_lines,
                                  const Vocabulary& vocab);

std::string detokenize(const std::vector<TokenId>& ids, const Vocabulary& vocab);

}  // namespace seqlab

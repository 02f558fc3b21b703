#include "seqlab/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace seqlab {

Vocabulary Vocabulary::build(const std::unordered_map<std::string, std::size_t>& counts,
                             std::size_t max_size, bool with_sep) {
    Vocabulary v;
    v.has_sep_ = with_sep;
    v.id_to_token_ = {kEos, kUnk};
    if (with_sep) v.id_to_token_.push_back(kSep);
    if (max_size < v.id_to_token_.size()) {
        throw ConfigError("vocabulary cap " + std::to_string(max_size) +
                          " smaller than the reserved token set");
    }

    std::vector<std::pair<std::string, std::size_t>> ranked;
    ranked.reserve(counts.size());
    for (const auto& [token, count] : counts) {
        // Reserved spellings occurring in text map to the reserved ids.
        if (token == kEos || token == kUnk || (with_sep && token == kSep)) continue;
        ranked.emplace_back(token, count);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [token, count] : ranked) {
        if (v.id_to_token_.size() >= max_size) break;
        v.id_to_token_.push_back(token);
    }
    v.index_tokens();
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    v.id_to_token_ = tokens;
    if (v.id_to_token_.size() < 2 || v.id_to_token_[0] != kEos || v.id_to_token_[1] != kUnk) {
        throw ConfigError("vocabulary list must start with the reserved tokens <eos>, <unk>");
    }
    v.has_sep_ = v.id_to_token_.size() > 2 && v.id_to_token_[2] == kSep;
    v.index_tokens();
    return v;
}

void Vocabulary::index_tokens() {
    token_to_id_.clear();
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second) {
            throw ConfigError("duplicate vocabulary entry: " + id_to_token_[i]);
        }
    }
}

TokenId Vocabulary::sep_id() const {
    if (!has_sep_) throw UsageError("vocabulary has no <sep> token (not in translation mode)");
    return 2;
}

TokenId Vocabulary::lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? unk_id() : it->second;
}

std::optional<TokenId> Vocabulary::find(const std::string& token) const {
    auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw IndexError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                         std::to_string(id_to_token_.size()));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary file: " + path.string());
    for (const std::string& t : id_to_token_) out << t << '\n';
    if (!out) throw IoError("failed while writing vocabulary file: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read vocabulary file: " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return from_tokens(tokens);
}

BatchedCorpus::BatchedCorpus(const std::vector<TokenId>& tokens, std::size_t batch) {
    if (batch < 1) throw UsageError("batchify: batch size must be at least 1");
    if (tokens.size() < 2 * batch) {
        throw UsageError("batchify: corpus of " + std::to_string(tokens.size()) +
                         " tokens is too short for " + std::to_string(batch) + " streams");
    }
    batch_ = batch;
    rows_ = tokens.size() / batch;  // remainder dropped
    grid_.resize(rows_ * batch_);
    for (std::size_t b = 0; b < batch_; ++b) {
        for (std::size_t r = 0; r < rows_; ++r) {
            grid_[r * batch_ + b] = tokens[b * rows_ + r];
        }
    }
}

std::size_t BatchedCorpus::window_count(std::size_t steps) const {
    if (steps == 0) throw UsageError("window_count: steps must be positive");
    return (rows_ - 1) / steps;  // last row only ever serves as a target
}

BatchedCorpus::Window BatchedCorpus::window(std::size_t k, std::size_t steps) const {
    const std::size_t start = k * steps;
    const std::size_t t = std::min(steps, rows_ - 1 - start);
    if (start >= rows_ - 1 || t == 0) {
        throw IndexError("window " + std::to_string(k) + " out of range");
    }
    Window w;
    w.steps = t;
    w.batch = batch_;
    w.inputs.assign(grid_.begin() + start * batch_, grid_.begin() + (start + t) * batch_);
    w.targets.assign(grid_.begin() + (start + 1) * batch_, grid_.begin() + (start + 1 + t) * batch_);
    return w;
}

std::vector<BatchedCorpus::Window> BatchedCorpus::windows(std::size_t steps,
                                                          bool include_tail) const {
    std::vector<Window> out;
    const std::size_t full = window_count(steps);
    for (std::size_t k = 0; k < full; ++k) out.push_back(window(k, steps));
    if (include_tail && full * steps < rows_ - 1) out.push_back(window(full, steps));
    return out;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(std::move(tok));
    return out;
}

namespace {

Corpus corpus_from_lines(const std::vector<std::string>& lines, const Vocabulary* vocab,
                         std::size_t vocab_cap, bool with_sep, const std::string& origin) {
    if (lines.empty()) throw UsageError("empty corpus: " + origin);
    std::vector<std::vector<std::string>> tokenized;
    std::size_t total = 0;
    for (const std::string& line : lines) {
        tokenized.push_back(split_tokens(line));
        total += tokenized.back().size() + 1;  // + <eos>
    }

    Corpus c;
    if (vocab) {
        c.vocab = *vocab;
    } else {
        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& toks : tokenized) {
            for (const std::string& t : toks) ++counts[t];
        }
        c.vocab = Vocabulary::build(counts, vocab_cap, with_sep);
    }
    c.ids.reserve(total);
    for (const auto& toks : tokenized) {
        for (const std::string& t : toks) c.ids.push_back(c.vocab.lookup(t));
        c.ids.push_back(c.vocab.eos_id());
    }
    return c;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, const Vocabulary* vocab,
                   std::size_t vocab_cap, bool with_sep) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read corpus file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.empty()) throw UsageError("empty corpus file: " + path.string());
    return corpus_from_lines(lines, vocab, vocab_cap, with_sep, path.string());
}

Corpus corpus_from_text(const std::string& text, const Vocabulary* vocab, std::size_t vocab_cap,
                        bool with_sep) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.empty()) throw UsageError("empty corpus text");
    return corpus_from_lines(lines, vocab, vocab_cap, with_sep, "<text>");
}

std::vector<TokenId> concat_pairs(const std::vector<std::string>& source_lines,
                                  const std::vector<std::string>& target_lines,
                                  const Vocabulary& vocab) {
    if (source_lines.size() != target_lines.size()) {
        throw UsageError("concat_pairs: " + std::to_string(source_lines.size()) +
                         " source lines vs " + std::to_string(target_lines.size()) + " target lines");
    }
    std::vector<TokenId> ids;
    for (std::size_t i = 0; i < source_lines.size(); ++i) {
        for (const std::string& t : split_tokens(source_lines[i])) ids.push_back(vocab.lookup(t));
        ids.push_back(vocab.sep_id());
        for (const std::string& t : split_tokens(target_lines[i])) ids.push_back(vocab.lookup(t));
        ids.push_back(vocab.eos_id());
    }
    return ids;
}

std::string detokenize(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(ids[i]);
    }
    return out;
}

}  // namespace seqlab

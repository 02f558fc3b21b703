#pragma once

#include <cstdint>
#include <string>

namespace seqlab {

/// Deterministic overfit corpus: one fixed sentence repeated until at least
/// n_tokens tokens (counting the <eos> each line contributes). Every token
/// determines its successor, so a trained model can drive perplexity to 1.
std::string cyclic_toy_text(std::size_t n_tokens);

/// Natural-language stand-in with learnable structure and a memorization
/// gap: a random sparse first-order Markov chain over a Zipf-weighted
/// vocabulary. Distinct seeds give distinct chains; the same seed with
/// different skip offsets gives disjoint samples of one chain (train vs
/// validation splits).
struct MarkovTextConfig {
    std::size_t vocab = 2000;
    std::size_t branch = 20;          // successor support per word
    double eos_prob = 0.08;           // sentence-end probability per step
    std::uint64_t seed = 1234;
};

std::string markov_text(std::size_t n_tokens, const MarkovTextConfig& cfg,
                        std::uint64_t sample_offset = 0);

/// "1k" -> 1000, "50k" -> 50000, "2m" -> 2000000, digits pass through.
std::size_t parse_size(const std::string& s);

}  // namespace seqlab

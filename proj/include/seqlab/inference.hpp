#pragma once

#include <cstdint>
#include <vector>

#include "seqlab/data.hpp"
#include "seqlab/model.hpp"

namespace seqlab {

struct EvalDetail {
    double total_nll = 0.0;
    std::size_t tokens = 0;
    // Per-predicted-position NLL, indexed [row][stream] over the batched
    // grid (rows 1..rows-1 are predicted).
    std::vector<double> nlls;

    double perplexity() const;
};

/// Word-level perplexity: exp(total NLL / predicted tokens), states carried
/// across windows exactly as in training, dropout inactive.
double perplexity(const ModelParams& params, const std::vector<TokenId>& ids, std::size_t batch,
                  std::size_t steps);
EvalDetail evaluate(const ModelParams& params, const std::vector<TokenId>& ids, std::size_t batch,
                    std::size_t steps);

/// Probability-averaging ensemble: at each position the predicted
/// distribution is the arithmetic mean of the member models' softmax
/// distributions; each member carries its own state.
double ensemble_perplexity(const std::vector<const ModelParams*>& models,
                           const std::vector<TokenId>& ids, std::size_t batch, std::size_t steps);
EvalDetail ensemble_evaluate(const std::vector<const ModelParams*>& models,
                             const std::vector<TokenId>& ids, std::size_t batch,
                             std::size_t steps);

struct SamplerConfig {
    std::vector<TokenId> prefix;
    std::size_t max_len = 100;
    double temperature = 1.0;          // 0 = greedy argmax
    std::vector<TokenId> forbidden;    // never contains <eos>
    std::uint64_t seed = 0;
    TokenId eos_id = 0;

    void validate() const;
};

/// Zeroes forbidden entries and renormalizes. Throws NumericError when no
/// probability mass survives.
std::vector<double> renormalize_filtered(std::vector<double> probs,
                                         const std::vector<bool>& forbidden);

/// Conditional sampling with a forbidden-token filter. Feeds the prefix
/// (<eos> when empty), then draws from the filtered, temperature-scaled
/// softmax until <eos> or max_len. Returns the generated continuation
/// without the terminating <eos>.
std::vector<TokenId> sample(const ModelParams& params, const SamplerConfig& cfg);

struct BeamHypothesis {
    std::vector<TokenId> tokens;  // generated continuation, <eos> included when completed
    double log_prob = 0.0;
    bool completed = false;
};

struct BeamOptions {
    std::size_t max_len = 100;
    TokenId eos_id = 0;
    bool length_normalize = false;  // off by default: raw cumulative log-prob
};

/// Breadth-limited best-first decoding. Keeps the top beam_width expansions
/// per step by cumulative log-probability (ties broken by lexicographic
/// token order); completed hypotheses are set aside and the best completed
/// one is returned after the beam drains or max_len is reached. Falls back
/// to the best incomplete hypothesis (completed = false) when nothing
/// finished.
BeamHypothesis beam_search(const ModelParams& params, const std::vector<TokenId>& prefix,
                           std::size_t beam_width, const BeamOptions& opts);

}  // namespace seqlab

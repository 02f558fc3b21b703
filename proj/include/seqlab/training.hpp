#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqlab/data.hpp"
#include "seqlab/model.hpp"

namespace seqlab {

struct TrainConfig {
    std::size_t n = 200;      // layer width (also the embedding width)
    std::size_t layers = 2;   // L
    std::size_t unroll = 20;  // T
    std::size_t batch = 20;   // B
    double init_range = 0.1;
    double dropout_p = 0.0;
    double lr0 = 1.0;
    int decay_start_epoch = 4;   // last epoch still at lr0
    double decay_factor = 2.0;   // divide lr by this per epoch afterwards
    int epochs = 13;
    double clip_threshold = 5.0;
    std::uint64_t seed = 1;
    std::size_t vocab_cap = 10000;
    bool translation_mode = false;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// The three named configurations: medium, large, baseline-small.
TrainConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Weights and embeddings i.i.d. uniform on [-init_range, init_range],
/// biases zero. Draw order: embedding, then each layer's W, then the output
/// projection (row-major within each tensor).
ModelParams init_params(const TrainConfig& cfg, std::size_t vocab_size);

/// Tests ||concat(grads)/batch||_2 against threshold and rescales the stored
/// gradients so the normalized norm is at most threshold. Returns the scale
/// applied (1 when no clipping happened).
double clip_gradients(const ModelParams& params, std::size_t batch, double threshold);

/// lr0 through decay_start_epoch, then divided by decay_factor per epoch.
/// epoch is 1-based.
double lr_at_epoch(int epoch, const TrainConfig& cfg);

/// p -= lr * grad / batch, elementwise, nothing else.
void sgd_update(const ModelParams& params, double lr, std::size_t batch);

struct EpochStats {
    double train_ppl = 0.0;
    double mean_loss = 0.0;
    std::size_t clip_events = 0;
    std::size_t updates = 0;
    LstmState final_state;
};

/// Observer called after each window update; return false to stop the epoch
/// early (used by smoke tests that cap the number of updates).
using WindowObserver = std::function<bool(std::size_t window_index, double window_mean_nll,
                                          const LstmState& carried_state)>;

/// One pass over the batched corpus: forward T*B window, backward, clip,
/// SGD step, carry the final state (detached) into the next window. States
/// start at zero; gradient flow is severed at window boundaries.
EpochStats train_epoch(const ModelParams& params, const BatchedCorpus& corpus,
                       const TrainConfig& cfg, int epoch,
                       const WindowObserver& observer = nullptr);

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_ppl = 0.0;
    double valid_ppl = 0.0;
    double wall_seconds = 0.0;
    std::size_t grad_clip_events = 0;
};

/// Called after each epoch with that epoch's metrics and the current
/// parameters; the CLI uses it to write checkpoints and metric rows.
using EpochSink =
    std::function<void(const EpochMetrics&, const ModelParams&, const Vocabulary&)>;

struct TrainResult {
    ModelParams params;
    std::vector<EpochMetrics> metrics;
};

/// Full training run: cfg.epochs epochs with per-epoch validation
/// perplexity. start_epoch > 0 resumes after that many completed epochs
/// using the supplied parameters.
TrainResult train(const TrainConfig& cfg, const Corpus& train_corpus,
                  const std::vector<TokenId>& valid_ids, const EpochSink& sink = nullptr,
                  int start_epoch = 0, std::optional<ModelParams> resume_params = std::nullopt);

/// Dropout streams are re-seeded per epoch so a resumed run continues with
/// identical masks.
std::uint64_t epoch_seed(std::uint64_t base_seed, int epoch);

}  // namespace seqlab

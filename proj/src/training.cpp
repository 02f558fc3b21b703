#include "seqlab/training.hpp"

#include <chrono>
#include <cmath>

#include "seqlab/inference.hpp"
#include "seqlab/rng.hpp"

namespace seqlab {

void TrainConfig::validate() const {
    if (n < 1) throw ConfigError("layer width must be positive");
    if (layers < 1) throw ConfigError("at least one layer is required");
    if (unroll < 1) throw ConfigError("unroll must be positive");
    if (batch < 1) throw ConfigError("batch size must be positive");
    if (init_range <= 0.0) throw ConfigError("init range must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw ConfigError("dropout probability must lie in [0, 1), got " +
                          std::to_string(dropout_p));
    }
    if (lr0 <= 0.0) throw ConfigError("initial learning rate must be positive");
    if (decay_factor <= 1.0) throw ConfigError("decay factor must exceed 1");
    if (clip_threshold <= 0.0) throw ConfigError("clip threshold must be positive");
    if (epochs < 0) throw ConfigError("epoch count must be non-negative");
    if (epochs > 0 && (decay_start_epoch < 1 || decay_start_epoch > epochs)) {
        throw ConfigError("decay start epoch " + std::to_string(decay_start_epoch) +
                          " outside 1.." + std::to_string(epochs));
    }
    if (vocab_cap < 2) throw ConfigError("vocabulary cap must cover the reserved tokens");
}

TrainConfig preset(const std::string& name) {
    TrainConfig c;
    if (name == "medium") {
        c.n = 650;
        c.layers = 2;
        c.unroll = 35;
        c.batch = 20;
        c.init_range = 0.05;
        c.dropout_p = 0.5;
        c.lr0 = 1.0;
        c.decay_start_epoch = 6;
        c.decay_factor = 1.2;
        c.epochs = 39;
        c.clip_threshold = 5.0;
    } else if (name == "large") {
        c.n = 1500;
        c.layers = 2;
        c.unroll = 35;
        c.batch = 20;
        c.init_range = 0.04;
        c.dropout_p = 0.65;
        c.lr0 = 1.0;
        c.decay_start_epoch = 14;
        c.decay_factor = 1.15;
        c.epochs = 55;
        c.clip_threshold = 10.0;
    } else if (name == "baseline-small") {
        c.n = 200;
        c.layers = 2;
        c.unroll = 20;
        c.batch = 20;
        c.init_range = 0.1;
        c.dropout_p = 0.0;
        c.lr0 = 1.0;
        c.decay_start_epoch = 4;
        c.decay_factor = 2.0;
        c.epochs = 13;
        c.clip_threshold = 5.0;
    } else {
        throw ConfigError("unknown preset: " + name + " (expected medium, large, baseline-small)");
    }
    return c;
}

std::vector<std::string> preset_names() {
    return {"medium", "large", "baseline-small"};
}

ModelParams init_params(const TrainConfig& cfg, std::size_t vocab_size) {
    cfg.validate();
    ModelParams p = ModelParams::create(vocab_size, cfg.n, cfg.layers);
    UniformRng rng(cfg.seed);
    const double r = cfg.init_range;
    auto fill = [&](const TensorPtr& t) {
        for (double& v : t->data) v = rng.uniform(-r, r);
    };
    fill(p.embedding);
    for (LayerParams& layer : p.layers) fill(layer.W);  // biases stay zero
    fill(p.output_W);
    return p;
}

double clip_gradients(const ModelParams& params, std::size_t batch, double threshold) {
    if (batch < 1) throw UsageError("clip_gradients: batch must be positive");
    const double inv_b = 1.0 / static_cast<double>(batch);
    double sq = 0.0;
    for (const TensorPtr& t : params.all_tensors()) {
        for (double g : t->grad) {
            const double v = g * inv_b;
            sq += v * v;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm <= threshold || norm == 0.0) return 1.0;
    const double scale = threshold / norm;
    for (const TensorPtr& t : params.all_tensors()) {
        for (double& g : t->grad) g *= scale;
    }
    return scale;
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
    if (epoch < 1 || epoch > cfg.epochs) {
        throw UsageError("epoch " + std::to_string(epoch) + " outside 1.." +
                         std::to_string(cfg.epochs));
    }
    if (epoch <= cfg.decay_start_epoch) return cfg.lr0;
    return cfg.lr0 / std::pow(cfg.decay_factor, epoch - cfg.decay_start_epoch);
}

void sgd_update(const ModelParams& params, double lr, std::size_t batch) {
    const double step = lr / static_cast<double>(batch);
    for (const TensorPtr& t : params.all_tensors()) {
        if (t->grad.empty()) continue;
        for (std::size_t i = 0; i < t->data.size(); ++i) t->data[i] -= step * t->grad[i];
    }
}

std::uint64_t epoch_seed(std::uint64_t base_seed, int epoch) {
    return mix_keys(base_seed, 0x7261696eULL + static_cast<std::uint64_t>(epoch));
}

EpochStats train_epoch(const ModelParams& params, const BatchedCorpus& corpus,
                       const TrainConfig& cfg, int epoch, const WindowObserver& observer) {
    cfg.validate();
    EpochStats stats;
    const std::size_t n_windows = corpus.window_count(cfg.unroll);
    if (n_windows == 0) {
        throw UsageError("corpus too short for even one window of " + std::to_string(cfg.unroll) +
                         " steps");
    }
    const double lr = lr_at_epoch(epoch, cfg);

    DropoutConfig drop;
    drop.p = cfg.dropout_p;
    drop.mode = DropoutMode::train;
    drop.seed = epoch_seed(cfg.seed, epoch);
    drop.counter = 0;

    LstmState state = LstmState::zeros(params.depth(), corpus.batch(), params.width());
    double total_nll = 0.0;
    std::size_t total_tokens = 0;

    for (std::size_t k = 0; k < n_windows; ++k) {
        auto w = corpus.window(k, cfg.unroll);
        Tape tape;
        auto res = forward_sequence(tape, w.inputs, w.targets, w.steps, w.batch, state, params,
                                    &drop);
        const double window_nll = res.total_nll();
        if (!std::isfinite(window_nll)) {
            throw NumericError("non-finite training loss " + std::to_string(window_nll) +
                               " in window " + std::to_string(k) + " of epoch " +
                               std::to_string(epoch));
        }
        params.zero_grad();
        tape.backward(res.loss_sum);
        if (clip_gradients(params, w.batch, cfg.clip_threshold) < 1.0) ++stats.clip_events;
        sgd_update(params, lr, w.batch);

        state = res.final_state.detached();
        total_nll += window_nll;
        total_tokens += res.tokens;
        ++stats.updates;
        if (observer && !observer(k, window_nll / static_cast<double>(res.tokens), state)) break;
    }

    stats.mean_loss = total_nll / static_cast<double>(total_tokens);
    stats.train_ppl = std::exp(stats.mean_loss);
    stats.final_state = state;
    return stats;
}

TrainResult train(const TrainConfig& cfg, const Corpus& train_corpus,
                  const std::vector<TokenId>& valid_ids, const EpochSink& sink, int start_epoch,
                  std::optional<ModelParams> resume_params) {
    cfg.validate();
    TrainResult result;
    result.params = resume_params ? std::move(*resume_params) : init_params(cfg, train_corpus.vocab.size());
    if (start_epoch < 0 || start_epoch > cfg.epochs) {
        throw UsageError("start epoch " + std::to_string(start_epoch) + " outside 0.." +
                         std::to_string(cfg.epochs));
    }

    BatchedCorpus batched(train_corpus.ids, cfg.batch);
    for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochStats stats = train_epoch(result.params, batched, cfg, epoch);
        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr_at_epoch(epoch, cfg);
        m.train_ppl = stats.train_ppl;
        m.valid_ppl = valid_ids.empty()
                          ? 0.0
                          : perplexity(result.params, valid_ids, cfg.batch, cfg.unroll);
        m.grad_clip_events = stats.clip_events;
        m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.metrics.push_back(m);
        if (sink) sink(m, result.params, train_corpus.vocab);
    }
    return result;
}

}  // namespace seqlab

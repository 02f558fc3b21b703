#include "seqlab/dropout.hpp"

#include <algorithm>

#include "seqlab/rng.hpp"

namespace seqlab {

void DropoutConfig::validate() const {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
    }
}

bool MaskTrace::was_applied_to(const Tensor& t) const {
    return std::find(applied_outputs.begin(), applied_outputs.end(), &t) != applied_outputs.end();
}

std::vector<double> draw_mask(std::size_t width, DropoutConfig& cfg) {
    cfg.validate();
    if (cfg.mode == DropoutMode::eval) {
        throw UsageError("draw_mask: eval mode never draws masks");
    }
    if (width == 0) {
        throw UsageError("draw_mask: width must be positive");
    }
    std::vector<double> mask(width);
    const std::uint64_t draw = cfg.counter++;
    if (cfg.p == 0.0) {
        std::fill(mask.begin(), mask.end(), 1.0);
        return mask;
    }
    const double keep_scale = 1.0 / (1.0 - cfg.p);
    for (std::size_t j = 0; j < width; ++j) {
        mask[j] = counter_uniform(cfg.seed, draw, j) < cfg.p ? 0.0 : keep_scale;
    }
    return mask;
}

TensorPtr apply_dropout(Tape& tape, const TensorPtr& x, DropoutConfig& cfg, MaskTrace* trace) {
    cfg.validate();
    // Identity fast path: eval, and p = 0 in train mode, return the input
    // tensor untouched and consume no randomness.
    if (cfg.mode == DropoutMode::eval || cfg.p == 0.0) {
        return x;
    }
    auto mask = make_tensor(x->shape, draw_mask(x->numel(), cfg));
    auto out = tape.multiply(x, mask);
    if (x->drop_depth >= 0) out->drop_depth = x->drop_depth + 1;
    if (trace) {
        trace->applied_outputs.push_back(out.get());
        ++trace->applications;
    }
    return out;
}

}  // namespace seqlab

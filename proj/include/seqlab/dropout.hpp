#pragma once

#include <cstdint>
#include <vector>

#include "seqlab/tape.hpp"
#include "seqlab/tensor.hpp"

namespace seqlab {

enum class DropoutMode { train, eval };

/// Bernoulli masking with inverted scaling: an element is zeroed with
/// probability p, survivors are scaled by 1/(1-p) so evaluation is the
/// identity. Masks are addressed by (seed, counter, element) and therefore
/// reproducible without stored state.
struct DropoutConfig {
    double p = 0.0;
    DropoutMode mode = DropoutMode::train;
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;  // next draw id; advanced once per mask drawn

    void validate() const;
};

/// Instrumentation for the placement contract: tracks which tensors were
/// produced by a dropout application. Path counts live on Tensor::drop_depth
/// and flow through the tape ops; mark_source() starts a count at an input.
struct MaskTrace {
    std::vector<const Tensor*> applied_outputs;
    std::uint64_t applications = 0;

    static void mark_source(Tensor& t) { t.drop_depth = 0; }
    static int path_depth(const Tensor& t) { return t.drop_depth; }
    bool was_applied_to(const Tensor& t) const;
};

/// One mask draw: entries are 0 with probability p, else 1/(1-p).
/// Advances cfg.counter. Train mode only.
std::vector<double> draw_mask(std::size_t width, DropoutConfig& cfg);

/// D(x). Eval mode and p = 0 return x itself (no randomness consumed);
/// train mode multiplies by a fresh mask on the tape so gradients are
/// masked identically.
TensorPtr apply_dropout(Tape& tape, const TensorPtr& x, DropoutConfig& cfg,
                        MaskTrace* trace = nullptr);

}  // namespace seqlab

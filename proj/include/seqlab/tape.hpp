#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "seqlab/tensor.hpp"

namespace seqlab {

// Stable softmax / log-softmax over one row (max-subtraction).
std::vector<double> softmax(const double* logits, std::size_t v);
std::vector<double> log_softmax(const double* logits, std::size_t v);

/// Reverse-mode autodiff tape. Ops run eagerly; a backward rule is recorded
/// when the tape is recording and some input requires a gradient. Nodes are
/// stored in execution order, so the reverse sweep is already topological.
///
/// Gradients accumulate (+=) into Tensor::grad; callers zero them explicitly.
/// After backward() the graph is frozen: recording again without reset() is
/// a usage error, while further backward() calls accumulate once more.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    // y = x W^T + b, applied per batch row. W: [m x n], b: [m], x: [n] or [B x n].
    TensorPtr affine(const TensorPtr& W, const TensorPtr& b, const TensorPtr& x);

    TensorPtr sigmoid(const TensorPtr& x);
    TensorPtr tanh(const TensorPtr& x);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr multiply(const TensorPtr& a, const TensorPtr& b);

    // Per-stream concatenation of two equal-width blocks: layer-below input
    // first, previous-timestep state second.
    TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b);
    TensorPtr slice_cols(const TensorPtr& x, std::size_t start, std::size_t width);

    // Gathers table rows by token id; gradients scatter back into the table.
    TensorPtr embedding_rows(const TensorPtr& table, const std::vector<std::int32_t>& ids);

    // Per-row -log softmax(logits)[target]. logits: [V] or [B x V],
    // targets.size() == B (1 for rank-1 logits). Returns [B].
    TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<std::int32_t>& targets);

    TensorPtr sum(const TensorPtr& x);
    TensorPtr scale(const TensorPtr& x, double c);

    /// Seeds d(loss)/d(loss) = seed_grad and sweeps the tape in reverse.
    /// loss must be a scalar output of this tape.
    void backward(const TensorPtr& loss, double seed_grad = 1.0);

    void reset();
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        std::vector<TensorPtr> inputs;
        TensorPtr output;
        std::function<void()> backward;
    };

    std::vector<Node> nodes_;
    bool recording_ = true;
    bool finalized_ = false;

    void record(std::vector<TensorPtr> inputs, const TensorPtr& output, std::function<void()> fn);
    static bool wants_grad(std::initializer_list<const TensorPtr*> ins);
    static int merged_drop_depth(std::initializer_list<const TensorPtr*> ins);
    void finish_node(std::initializer_list<const TensorPtr*> ins, const TensorPtr& out,
                     std::function<void()> fn);
};

}  // namespace seqlab

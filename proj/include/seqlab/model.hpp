#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "seqlab/dropout.hpp"
#include "seqlab/tape.hpp"
#include "seqlab/tensor.hpp"

namespace seqlab {

// Gate blocks inside the fused 4n preactivation, in checkpoint order.
enum class Gate { input = 0, forget = 1, output = 2, modulation = 3 };

/// One layer's fused affine map: the four n-wide gate blocks (i, f, o, g)
/// stacked into a single [4n x 2n] matrix acting on (input-below, h-prev).
struct LayerParams {
    TensorPtr W;  // [4n x 2n]
    TensorPtr b;  // [4n]

    static LayerParams create(std::size_t n);
    std::size_t width() const { return W->shape[1] / 2; }

    std::span<double> bias_block(Gate g);
    std::span<double> weight_rows(Gate g);  // n consecutive rows, each 2n wide
};

struct ModelParams {
    TensorPtr embedding;  // [V x n]
    std::vector<LayerParams> layers;
    TensorPtr output_W;  // [V x n]
    TensorPtr output_b;  // [V]

    static ModelParams create(std::size_t vocab, std::size_t n, std::size_t depth);

    std::size_t width() const { return embedding->shape[1]; }
    std::size_t vocab() const { return embedding->shape[0]; }
    std::size_t depth() const { return layers.size(); }

    // Checkpoint tensor order: embedding, then (W, b) per layer, then the
    // output head.
    std::vector<TensorPtr> all_tensors() const;
    std::size_t parameter_count() const;
    void zero_grad() const;
    bool grads_finite() const;
};

/// Carried recurrent state: per layer an (h, c) pair of [B x n] tensors.
struct LstmState {
    std::vector<TensorPtr> h;
    std::vector<TensorPtr> c;

    static LstmState zeros(std::size_t depth, std::size_t batch, std::size_t n);

    std::size_t depth() const { return h.size(); }
    std::size_t batch() const { return h.empty() ? 0 : h[0]->rows(); }
    std::size_t width() const { return h.empty() ? 0 : h[0]->cols(); }

    /// Value-equal copy with no graph history: the truncation point of BPTT.
    LstmState detached() const;
};

enum class Activation { sigm, tanh };

/// Classical RNN transition h = f(W [x; h_prev] + b); baseline cell.
TensorPtr rnn_cell(Tape& tape, const TensorPtr& h_below, const TensorPtr& h_prev,
                   const LayerParams& params, Activation f);

/// LSTM transition. Returns (h, c).
std::pair<TensorPtr, TensorPtr> lstm_cell(Tape& tape, const TensorPtr& h_below,
                                          const TensorPtr& h_prev, const TensorPtr& c_prev,
                                          const LayerParams& params);

struct StepResult {
    TensorPtr logits;  // [B x V]
    LstmState state;
};

/// One timestep of the deep LSTM with dropout on the non-recurrent
/// connections only: the embedding output, each between-layer input, and the
/// final hidden state feeding the softmax head (depth + 1 applications).
/// Recurrent h/c edges are never masked. drop == nullptr disables the
/// dropout code path entirely.
StepResult regularized_step(Tape& tape, const TensorPtr& x_emb, const LstmState& state,
                            const ModelParams& params, DropoutConfig* drop,
                            MaskTrace* trace = nullptr);

struct SequenceResult {
    TensorPtr loss_sum;             // scalar: sum of all T*B token losses
    std::vector<TensorPtr> losses;  // per step, [B]
    std::vector<StepResult> steps;  // per-step logits and states
    LstmState final_state;
    std::size_t tokens = 0;

    double total_nll() const { return loss_sum->data[0]; }
};

/// Runs T steps over a [T x B] window (row-major token ids), predicting
/// targets[t] from inputs[t]. trace_step >= 0 marks that step's embedding
/// output as the traced dropout source.
SequenceResult forward_sequence(Tape& tape, const std::vector<std::int32_t>& inputs,
                                const std::vector<std::int32_t>& targets, std::size_t steps,
                                std::size_t batch, const LstmState& init,
                                const ModelParams& params, DropoutConfig* drop,
                                MaskTrace* trace = nullptr, int trace_step = -1);

}  // namespace seqlab

#include "seqlab/model.hpp"

namespace seqlab {

LayerParams LayerParams::create(std::size_t n) {
    return LayerParams{make_param({4 * n, 2 * n}), make_param({4 * n})};
}

std::span<double> LayerParams::bias_block(Gate g) {
    const std::size_t n = width();
    return std::span<double>(b->data.data() + static_cast<std::size_t>(g) * n, n);
}

std::span<double> LayerParams::weight_rows(Gate g) {
    const std::size_t n = width();
    return std::span<double>(W->data.data() + static_cast<std::size_t>(g) * n * 2 * n, n * 2 * n);
}

ModelParams ModelParams::create(std::size_t vocab, std::size_t n, std::size_t depth) {
    ModelParams p;
    p.embedding = make_param({vocab, n});
    for (std::size_t l = 0; l < depth; ++l) p.layers.push_back(LayerParams::create(n));
    p.output_W = make_param({vocab, n});
    p.output_b = make_param({vocab});
    return p;
}

std::vector<TensorPtr> ModelParams::all_tensors() const {
    std::vector<TensorPtr> out;
    out.push_back(embedding);
    for (const LayerParams& l : layers) {
        out.push_back(l.W);
        out.push_back(l.b);
    }
    out.push_back(output_W);
    out.push_back(output_b);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t total = 0;
    for (const TensorPtr& t : all_tensors()) total += t->numel();
    return total;
}

void ModelParams::zero_grad() const {
    for (const TensorPtr& t : all_tensors()) t->zero_grad();
}

bool ModelParams::grads_finite() const {
    for (const TensorPtr& t : all_tensors()) {
        if (!t->grad_all_finite()) return false;
    }
    return true;
}

LstmState LstmState::zeros(std::size_t depth, std::size_t batch, std::size_t n) {
    LstmState s;
    for (std::size_t l = 0; l < depth; ++l) {
        s.h.push_back(make_tensor({batch, n}));
        s.c.push_back(make_tensor({batch, n}));
    }
    return s;
}

LstmState LstmState::detached() const {
    LstmState s;
    for (std::size_t l = 0; l < h.size(); ++l) {
        s.h.push_back(make_tensor(h[l]->shape, h[l]->data));
        s.c.push_back(make_tensor(c[l]->shape, c[l]->data));
    }
    return s;
}

TensorPtr rnn_cell(Tape& tape, const TensorPtr& h_below, const TensorPtr& h_prev,
                   const LayerParams& params, Activation f) {
    auto z = tape.concat_rows(h_below, h_prev);
    const std::size_t n = h_below->cols();
    if (params.W->shape != Shape{n, 2 * n}) {
        throw ShapeError("rnn_cell: expected W [" + std::to_string(n) + "x" +
                         std::to_string(2 * n) + "], got " + shape_str(params.W->shape));
    }
    auto pre = tape.affine(params.W, params.b, z);
    return f == Activation::sigm ? tape.sigmoid(pre) : tape.tanh(pre);
}

std::pair<TensorPtr, TensorPtr> lstm_cell(Tape& tape, const TensorPtr& h_below,
                                          const TensorPtr& h_prev, const TensorPtr& c_prev,
                                          const LayerParams& params) {
    const std::size_t n = h_below->cols();
    if (params.W->shape != Shape{4 * n, 2 * n}) {
        throw ShapeError("lstm_cell: expected W [" + std::to_string(4 * n) + "x" +
                         std::to_string(2 * n) + "], got " + shape_str(params.W->shape));
    }
    if (c_prev->shape != h_prev->shape) {
        throw ShapeError("lstm_cell: h_prev " + shape_str(h_prev->shape) + " vs c_prev " +
                         shape_str(c_prev->shape));
    }
    auto z = tape.concat_rows(h_below, h_prev);
    auto pre = tape.affine(params.W, params.b, z);
    auto i = tape.sigmoid(tape.slice_cols(pre, 0 * n, n));
    auto f = tape.sigmoid(tape.slice_cols(pre, 1 * n, n));
    auto o = tape.sigmoid(tape.slice_cols(pre, 2 * n, n));
    auto g = tape.tanh(tape.slice_cols(pre, 3 * n, n));
    auto c = tape.add(tape.multiply(f, c_prev), tape.multiply(i, g));
    auto h = tape.multiply(o, tape.tanh(c));
    return {h, c};
}

StepResult regularized_step(Tape& tape, const TensorPtr& x_emb, const LstmState& state,
                            const ModelParams& params, DropoutConfig* drop, MaskTrace* trace) {
    if (state.depth() != params.depth()) {
        throw ConfigError("regularized_step: state has " + std::to_string(state.depth()) +
                          " layers, params " + std::to_string(params.depth()));
    }
    StepResult res;
    res.state.h.resize(params.depth());
    res.state.c.resize(params.depth());

    // D on every vertical connection; h/c carry over untouched.
    TensorPtr below = drop ? apply_dropout(tape, x_emb, *drop, trace) : x_emb;
    for (std::size_t l = 0; l < params.depth(); ++l) {
        auto [h, c] = lstm_cell(tape, below, state.h[l], state.c[l], params.layers[l]);
        res.state.h[l] = h;
        res.state.c[l] = c;
        below = drop ? apply_dropout(tape, h, *drop, trace) : h;
    }
    res.logits = tape.affine(params.output_W, params.output_b, below);
    return res;
}

SequenceResult forward_sequence(Tape& tape, const std::vector<std::int32_t>& inputs,
                                const std::vector<std::int32_t>& targets, std::size_t steps,
                                std::size_t batch, const LstmState& init,
                                const ModelParams& params, DropoutConfig* drop, MaskTrace* trace,
                                int trace_step) {
    if (inputs.size() != steps * batch || targets.size() != steps * batch) {
        throw ShapeError("forward_sequence: expected " + std::to_string(steps * batch) +
                         " input and target ids");
    }
    SequenceResult res;
    res.tokens = steps * batch;
    const LstmState* state = &init;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<std::int32_t> in_row(inputs.begin() + t * batch, inputs.begin() + (t + 1) * batch);
        std::vector<std::int32_t> tgt_row(targets.begin() + t * batch,
                                          targets.begin() + (t + 1) * batch);
        auto x = tape.embedding_rows(params.embedding, in_row);
        if (static_cast<int>(t) == trace_step) MaskTrace::mark_source(*x);
        res.steps.push_back(regularized_step(tape, x, *state, params, drop, trace));
        state = &res.steps.back().state;
        auto nll = tape.softmax_cross_entropy(res.steps.back().logits, tgt_row);
        res.losses.push_back(nll);
        auto step_sum = tape.sum(nll);
        res.loss_sum = res.loss_sum ? tape.add(res.loss_sum, step_sum) : step_sum;
    }
    res.final_state = res.steps.back().state;
    return res;
}

}  // namespace seqlab

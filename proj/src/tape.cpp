#include "seqlab/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace seqlab {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatrixRM>;
using MapCM = Eigen::Map<const MatrixRM>;

std::vector<double> softmax(const double* logits, std::size_t v) {
    double m = logits[0];
    for (std::size_t j = 1; j < v; ++j) m = std::max(m, logits[j]);
    std::vector<double> p(v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
        p[j] = std::exp(logits[j] - m);
        z += p[j];
    }
    for (std::size_t j = 0; j < v; ++j) p[j] /= z;
    return p;
}

std::vector<double> log_softmax(const double* logits, std::size_t v) {
    double m = logits[0];
    for (std::size_t j = 1; j < v; ++j) m = std::max(m, logits[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(logits[j] - m);
    const double lse = std::log(z) + m;
    std::vector<double> lp(v);
    for (std::size_t j = 0; j < v; ++j) lp[j] = logits[j] - lse;
    return lp;
}

bool Tape::wants_grad(std::initializer_list<const TensorPtr*> ins) {
    for (const TensorPtr* t : ins) {
        if ((*t)->requires_grad) return true;
    }
    return false;
}

int Tape::merged_drop_depth(std::initializer_list<const TensorPtr*> ins) {
    int depth = -1;
    for (const TensorPtr* t : ins) depth = std::max(depth, (*t)->drop_depth);
    return depth;
}

void Tape::record(std::vector<TensorPtr> inputs, const TensorPtr& output, std::function<void()> fn) {
    if (finalized_) {
        throw UsageError("tape already backpropagated; reset() before recording new ops");
    }
    nodes_.push_back(Node{std::move(inputs), output, std::move(fn)});
}

void Tape::finish_node(std::initializer_list<const TensorPtr*> ins, const TensorPtr& out,
                       std::function<void()> fn) {
    out->drop_depth = merged_drop_depth(ins);
    if (recording_ && wants_grad(ins)) {
        out->requires_grad = true;
        std::vector<TensorPtr> inputs;
        inputs.reserve(ins.size());
        for (const TensorPtr* t : ins) inputs.push_back(*t);
        record(std::move(inputs), out, std::move(fn));
    }
}

namespace {

void check_rank12(const TensorPtr& x, const char* op) {
    if (x->shape.empty() || x->shape.size() > 2) {
        throw ShapeError(std::string(op) + ": expected rank 1 or 2, got " + shape_str(x->shape));
    }
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
    if (a->shape != b->shape) {
        throw ShapeError(std::string(op) + ": operand shapes differ, " + shape_str(a->shape) +
                         " vs " + shape_str(b->shape));
    }
}

Shape rowlike_shape(const TensorPtr& x, std::size_t width) {
    if (x->shape.size() == 2) return Shape{x->shape[0], width};
    return Shape{width};
}

}  // namespace

TensorPtr Tape::affine(const TensorPtr& W, const TensorPtr& b, const TensorPtr& x) {
    if (W->shape.size() != 2) {
        throw ShapeError("affine: W must be a matrix, got " + shape_str(W->shape));
    }
    check_rank12(x, "affine");
    const std::size_t m = W->shape[0];
    const std::size_t n = W->shape[1];
    if (x->cols() != n) {
        throw ShapeError("affine: W " + shape_str(W->shape) + " incompatible with x " +
                         shape_str(x->shape));
    }
    if (b->shape != Shape{m}) {
        throw ShapeError("affine: b " + shape_str(b->shape) + " incompatible with W " +
                         shape_str(W->shape));
    }
    const std::size_t rows = x->rows();

    auto out = make_tensor(rowlike_shape(x, m));
    {
        MapCM xm(x->data.data(), rows, n);
        MapCM wm(W->data.data(), m, n);
        MapM ym(out->data.data(), rows, m);
        Eigen::Map<const Eigen::RowVectorXd> bv(b->data.data(), m);
        ym.noalias() = xm * wm.transpose();
        ym.rowwise() += bv;
    }

    finish_node({&W, &b, &x}, out, [W, b, x, out, rows, m, n]() {
        MapCM gy(out->grad.data(), rows, m);
        if (W->requires_grad) {
            W->ensure_grad();
            MapCM xm(x->data.data(), rows, n);
            MapM gW(W->grad.data(), m, n);
            gW.noalias() += gy.transpose() * xm;
        }
        if (b->requires_grad) {
            b->ensure_grad();
            Eigen::Map<Eigen::RowVectorXd> gb(b->grad.data(), m);
            gb += gy.colwise().sum();
        }
        if (x->requires_grad) {
            x->ensure_grad();
            MapCM wm(W->data.data(), m, n);
            MapM gx(x->grad.data(), rows, n);
            gx.noalias() += gy * wm;
        }
    });
    return out;
}

TensorPtr Tape::sigmoid(const TensorPtr& x) {
    auto out = make_tensor(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const double v = x->data[i];
        if (v >= 0.0) {
            out->data[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out->data[i] = e / (1.0 + e);
        }
    }
    finish_node({&x}, out, [x, out]() {
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) {
            const double y = out->data[i];
            x->grad[i] += out->grad[i] * y * (1.0 - y);
        }
    });
    return out;
}

TensorPtr Tape::tanh(const TensorPtr& x) {
    auto out = make_tensor(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = std::tanh(x->data[i]);
    finish_node({&x}, out, [x, out]() {
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) {
            const double y = out->data[i];
            x->grad[i] += out->grad[i] * (1.0 - y * y);
        }
    });
    return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "add");
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
    finish_node({&a, &b}, out, [a, b, out]() {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i) b->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr Tape::multiply(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "multiply");
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
    finish_node({&a, &b}, out, [a, b, out]() {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i)
                a->grad[i] += out->grad[i] * b->data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < out->numel(); ++i)
                b->grad[i] += out->grad[i] * a->data[i];
        }
    });
    return out;
}

TensorPtr Tape::concat_rows(const TensorPtr& a, const TensorPtr& b) {
    check_rank12(a, "concat_rows");
    check_rank12(b, "concat_rows");
    if (a->cols() != b->cols() || a->rows() != b->rows()) {
        throw ShapeError("concat_rows: width mismatch, " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
    const std::size_t rows = a->rows();
    const std::size_t n = a->cols();
    auto out = make_tensor(rowlike_shape(a, 2 * n));
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a->data.data() + r * n, n, out->data.data() + r * 2 * n);
        std::copy_n(b->data.data() + r * n, n, out->data.data() + r * 2 * n + n);
    }
    finish_node({&a, &b}, out, [a, b, out, rows, n]() {
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* g = out->grad.data() + r * 2 * n;
            for (std::size_t j = 0; j < n; ++j) {
                if (a->requires_grad) a->grad[r * n + j] += g[j];
                if (b->requires_grad) b->grad[r * n + j] += g[n + j];
            }
        }
    });
    return out;
}

TensorPtr Tape::slice_cols(const TensorPtr& x, std::size_t start, std::size_t width) {
    check_rank12(x, "slice_cols");
    const std::size_t n = x->cols();
    if (start + width > n) {
        throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + width) + ") exceeds width of " + shape_str(x->shape));
    }
    const std::size_t rows = x->rows();
    auto out = make_tensor(rowlike_shape(x, width));
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x->data.data() + r * n + start, width, out->data.data() + r * width);
    }
    finish_node({&x}, out, [x, out, rows, n, start, width]() {
        x->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < width; ++j) {
                x->grad[r * n + start + j] += out->grad[r * width + j];
            }
        }
    });
    return out;
}

TensorPtr Tape::embedding_rows(const TensorPtr& table, const std::vector<std::int32_t>& ids) {
    if (table->shape.size() != 2) {
        throw ShapeError("embedding_rows: table must be a matrix, got " + shape_str(table->shape));
    }
    const std::size_t v = table->shape[0];
    const std::size_t n = table->shape[1];
    for (std::int32_t id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= v) {
            throw IndexError("embedding_rows: token id " + std::to_string(id) +
                             " out of range for table " + shape_str(table->shape));
        }
    }
    auto out = make_tensor(Shape{ids.size(), n});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        std::copy_n(table->data.data() + static_cast<std::size_t>(ids[r]) * n, n,
                    out->data.data() + r * n);
    }
    finish_node({&table}, out, [table, out, ids, n]() {
        table->ensure_grad();
        for (std::size_t r = 0; r < ids.size(); ++r) {
            double* dst = table->grad.data() + static_cast<std::size_t>(ids[r]) * n;
            const double* g = out->grad.data() + r * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] += g[j];
        }
    });
    return out;
}

TensorPtr Tape::softmax_cross_entropy(const TensorPtr& logits,
                                      const std::vector<std::int32_t>& targets) {
    check_rank12(logits, "softmax_cross_entropy");
    const std::size_t rows = logits->rows();
    const std::size_t v = logits->cols();
    if (targets.size() != rows) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits->shape));
    }
    for (std::int32_t t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= v) {
            throw IndexError("softmax_cross_entropy: target " + std::to_string(t) +
                             " out of range for vocabulary of " + std::to_string(v));
        }
    }

    auto out = make_tensor(Shape{rows});
    const bool backprop = recording_ && logits->requires_grad;
    // Row softmax kept only when a backward rule is recorded.
    auto probs = backprop ? std::make_shared<std::vector<double>>(rows * v)
                          : std::shared_ptr<std::vector<double>>();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = logits->data.data() + r * v;
        double m = row[0];
        for (std::size_t j = 1; j < v; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - m);
        const double lse = std::log(z) + m;
        out->data[r] = lse - row[targets[r]];
        if (backprop) {
            double* p = probs->data() + r * v;
            for (std::size_t j = 0; j < v; ++j) p[j] = std::exp(row[j] - lse);
        }
    }

    finish_node({&logits}, out, [logits, out, targets, probs, rows, v]() {
        logits->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double g = out->grad[r];
            if (g == 0.0) continue;
            double* gl = logits->grad.data() + r * v;
            const double* p = probs->data() + r * v;
            for (std::size_t j = 0; j < v; ++j) gl[j] += g * p[j];
            gl[targets[r]] -= g;
        }
    });
    return out;
}

TensorPtr Tape::sum(const TensorPtr& x) {
    auto out = make_tensor(Shape{1});
    double s = 0.0;
    for (double v : x->data) s += v;
    out->data[0] = s;
    finish_node({&x}, out, [x, out]() {
        x->ensure_grad();
        const double g = out->grad[0];
        for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += g;
    });
    return out;
}

TensorPtr Tape::scale(const TensorPtr& x, double c) {
    auto out = make_tensor(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = c * x->data[i];
    finish_node({&x}, out, [x, out, c]() {
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += c * out->grad[i];
    });
    return out;
}

void Tape::backward(const TensorPtr& loss, double seed_grad) {
    if (!loss->is_scalar()) {
        throw UsageError("backward: loss must be scalar, got " + shape_str(loss->shape));
    }
    bool on_tape = false;
    for (const Node& node : nodes_) {
        if (node.output == loss) {
            on_tape = true;
            break;
        }
    }
    if (!on_tape) {
        throw UsageError("backward: loss tensor is not an output of this tape");
    }
    // Op outputs are intermediates owned by the tape: their adjoints restart
    // at zero each sweep, so every backward() call adds exactly one more
    // gradient into the leaves.
    for (const Node& node : nodes_) {
        if (!node.output->grad.empty())
            std::fill(node.output->grad.begin(), node.output->grad.end(), 0.0);
    }
    loss->ensure_grad();
    loss->grad[0] += seed_grad;
    // Execution order is topological; nodes whose outputs never received a
    // gradient have nothing to propagate.
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;
        it->backward();
    }
    finalized_ = true;
}

void Tape::reset() {
    nodes_.clear();
    finalized_ = false;
}

}  // namespace seqlab

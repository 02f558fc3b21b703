#include "seqlab/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace seqlab {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

namespace {
std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
}
}  // namespace

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
}

double Tensor::scalar() const {
    if (!is_scalar()) {
        throw ShapeError("expected a scalar tensor, got shape " + shape_str(shape));
    }
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    grad.assign(data.size(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool Tensor::grad_all_finite() const {
    for (double v : grad) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

TensorPtr make_tensor(Shape s, double fill) {
    return std::make_shared<Tensor>(std::move(s), fill);
}

TensorPtr make_tensor(Shape s, std::vector<double> values) {
    return std::make_shared<Tensor>(std::move(s), std::move(values));
}

TensorPtr make_param(Shape s, double fill) {
    auto t = std::make_shared<Tensor>(std::move(s), fill);
    t->requires_grad = true;
    return t;
}

}  // namespace seqlab

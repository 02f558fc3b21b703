#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqlab {

// Error taxonomy. The CLI maps these onto exit codes, so new failure modes
// should reuse one of the existing categories.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Dense row-major fp64 tensor with an optional gradient buffer.
/// Rank is 1 or 2 everywhere in this project; a rank-1 tensor behaves as a
/// single row where a batch dimension is expected.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty means "no gradient accumulated yet"

    // Dropout-application count along the path from a traced input.
    // -1 = not downstream of a traced input. Maintained by the tape ops.
    int drop_depth = -1;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> values);

    std::size_t numel() const { return data.size(); }
    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }
    bool is_scalar() const { return numel() == 1; }

    double scalar() const;

    void ensure_grad();
    void zero_grad();
    bool all_finite() const;
    bool grad_all_finite() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Shape s, double fill = 0.0);
TensorPtr make_tensor(Shape s, std::vector<double> values);
TensorPtr make_param(Shape s, double fill = 0.0);

}  // namespace seqlab

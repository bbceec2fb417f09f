#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jgn {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised whenever a NaN or Inf shows up in a forward value or a gradient.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GraphError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Global numeric mode. Standard trains in 32-bit reals, wide runs the
/// finite-difference checks in 64-bit reals.
enum class Precision { standard, wide };

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS after every op; large fresh mappings page-fault on first touch.
/// Call once at program start. No-op outside glibc.
void tune_allocator();

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename Real>
struct Node;

/// Shared handle to an N-d row-major array that can take part in a recorded
/// reverse-mode graph.
///
/// Copies alias the same storage. Values are only mutated through
/// mutable_data() on leaves (parameters between optimizer steps); everything
/// produced by an op is immutable.
template <typename Real>
class Tensor {
public:
    using BackwardFn = std::function<void(std::span<const Real> out_grad)>;

    Tensor() = default;
    Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Real value, bool requires_grad = false);
    static Tensor scalar(Real value, bool requires_grad = false);

    /// Builds the result of an op. Records `backward` only when some parent
    /// requires a gradient. Throws NumericError on non-finite values.
    static Tensor make_result(Shape shape, std::vector<Real> values,
                              std::vector<Tensor> parents, BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const Real> data() const;
    std::span<Real> mutable_data();
    Real item() const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const Real> grad() const;
    std::span<Real> mutable_grad();
    void zero_grad();

    /// Adds `g` into this tensor's gradient buffer, allocating it on first use.
    void accumulate_grad(std::span<const Real> g) const;

    /// Runs reverse-mode differentiation from this scalar. The recorded graph
    /// is released afterwards; a second call raises GraphError.
    void backward();

    /// Same values, cut from the graph.
    Tensor detach() const;
    Tensor clone() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    explicit Tensor(std::shared_ptr<Node<Real>> node) : node_(std::move(node)) {}

    std::shared_ptr<Node<Real>> node_;
};

template <typename Real>
struct Node {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;
    bool requires_grad = false;
    bool leaf = true;
    bool consumed = false;
    std::vector<Tensor<Real>> parents;
    typename Tensor<Real>::BackwardFn backward;
};

template <typename Real>
void check_finite(std::span<const Real> values, const char* what);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace jgn

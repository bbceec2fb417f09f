#include "jgn/tensor.hpp"

#include <bit>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <cstdint>
#include <type_traits>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace jgn {

void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

template <typename Real>
void check_finite(std::span<const Real> values, const char* what) {
    // Branch-free scan for an all-ones exponent; vectorizes, unlike isfinite.
    using Bits = std::conditional_t<sizeof(Real) == 4, std::uint32_t, std::uint64_t>;
    constexpr Bits exponent = sizeof(Real) == 4 ? Bits(0x7f800000u) : Bits(0x7ff0000000000000ull);
    Bits bad = 0;
    for (auto v : values) {
        const Bits b = std::bit_cast<Bits>(v);
        bad |= static_cast<Bits>((b & exponent) == exponent);
    }
    if (!bad) return;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            std::ostringstream msg;
            msg << "non-finite value " << values[i] << " at index " << i << " in " << what;
            throw NumericError(msg.str());
        }
    }
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> values, bool requires_grad) {
    for (auto d : shape)
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != values.size())
        throw ShapeError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    check_finite<Real>(values, "tensor construction");
    node_ = std::make_shared<Node<Real>>();
    node_->shape = std::move(shape);
    node_->data = std::move(values);
    node_->requires_grad = requires_grad;
}

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<Real>(n, Real(0)), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::full(Shape shape, Real value, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real value, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<Real>{value}, requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::make_result(Shape shape, std::vector<Real> values,
                                       std::vector<Tensor> parents, BackwardFn backward) {
    if (shape_numel(shape) != values.size())
        throw ShapeError("op produced " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
    check_finite<Real>(values, "op output");
    auto node = std::make_shared<Node<Real>>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->leaf = false;
    bool needs = std::any_of(parents.begin(), parents.end(),
                             [](const Tensor& p) { return p.defined() && p.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

template <typename Real>
const Shape& Tensor<Real>::shape() const {
    if (!node_) throw GraphError("use of an undefined tensor");
    return node_->shape;
}

template <typename Real>
std::size_t Tensor<Real>::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw ShapeError("axis out of range for shape " + shape_str(s));
    return s[axis];
}

template <typename Real>
std::size_t Tensor<Real>::numel() const {
    return shape_numel(shape());
}

template <typename Real>
std::span<const Real> Tensor<Real>::data() const {
    if (!node_) throw GraphError("use of an undefined tensor");
    return node_->data;
}

template <typename Real>
std::span<Real> Tensor<Real>::mutable_data() {
    if (!node_) throw GraphError("use of an undefined tensor");
    if (!node_->leaf) throw GraphError("only leaf tensors can be modified in place");
    return node_->data;
}

template <typename Real>
Real Tensor<Real>::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

template <typename Real>
bool Tensor<Real>::requires_grad() const {
    return node_ && node_->requires_grad;
}

template <typename Real>
void Tensor<Real>::set_requires_grad(bool on) {
    if (!node_->leaf) throw GraphError("requires_grad can only be toggled on leaves");
    node_->requires_grad = on;
}

template <typename Real>
bool Tensor<Real>::is_leaf() const {
    return node_->leaf;
}

template <typename Real>
bool Tensor<Real>::has_grad() const {
    return node_ && !node_->grad.empty();
}

template <typename Real>
std::span<const Real> Tensor<Real>::grad() const {
    if (!has_grad()) throw GraphError("tensor has no gradient");
    return node_->grad;
}

template <typename Real>
std::span<Real> Tensor<Real>::mutable_grad() {
    if (!node_) throw GraphError("use of an undefined tensor");
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), Real(0));
    return node_->grad;
}

template <typename Real>
void Tensor<Real>::zero_grad() {
    if (node_) node_->grad.clear();
}

template <typename Real>
void Tensor<Real>::accumulate_grad(std::span<const Real> g) const {
    auto& buf = node_->grad;
    if (g.size() != node_->data.size())
        throw ShapeError("gradient size mismatch for shape " + shape_str(node_->shape));
    if (buf.empty()) {
        buf.assign(g.begin(), g.end());
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

template <typename Real>
void Tensor<Real>::backward() {
    if (!node_) throw GraphError("backward on an undefined tensor");
    if (node_->consumed) throw GraphError("backward called twice on the same recorded graph");
    if (numel() != 1) throw ShapeError("backward requires a scalar, got " + shape_str(shape()));
    if (!node_->requires_grad) throw GraphError("loss does not depend on any parameter");

    // Iterative post-order DFS; parents are visited in recorded order so the
    // traversal (and hence accumulation order) is deterministic.
    // Holding owners keeps interior nodes alive while their children release
    // parents during the sweep.
    std::vector<std::shared_ptr<Node<Real>>> order;
    std::unordered_set<Node<Real>*> seen;
    std::vector<std::pair<std::shared_ptr<Node<Real>>, std::size_t>> stack{{node_, 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            auto p = top.first->parents[top.second++].node_;
            if (p && p->requires_grad && !p->leaf && !seen.count(p.get())) {
                seen.insert(p.get());
                stack.emplace_back(std::move(p), 0);
            }
            continue;
        }
        order.push_back(std::move(top.first));
        stack.pop_back();
    }

    std::vector<std::shared_ptr<Node<Real>>> leaves;
    node_->grad.assign(1, Real(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<Real>* n = it->get();
        for (auto& p : n->parents)
            if (p.defined() && p.node_->leaf && p.node_->requires_grad) leaves.push_back(p.node_);
        if (!n->grad.empty() && n->backward) n->backward(n->grad);
        n->backward = nullptr;
        n->parents.clear();
        if (n != node_.get()) n->grad.clear();
        n->grad.shrink_to_fit();
    }
    node_->consumed = true;
    for (const auto& leaf : leaves)
        if (!leaf->grad.empty()) check_finite<Real>(leaf->grad, "parameter gradient");
}

template <typename Real>
Tensor<Real> Tensor<Real>::detach() const {
    return Tensor(shape(), std::vector<Real>(data().begin(), data().end()), false);
}

template <typename Real>
Tensor<Real> Tensor<Real>::clone() const {
    return Tensor(shape(), std::vector<Real>(data().begin(), data().end()), requires_grad());
}

template void check_finite<float>(std::span<const float>, const char*);
template void check_finite<double>(std::span<const double>, const char*);
template class Tensor<float>;
template class Tensor<double>;

}  // namespace jgn

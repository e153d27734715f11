#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ngp/core/error.hpp"

namespace ngp {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

template <typename T>
class Tensor;

namespace detail {

inline std::uint64_t next_node_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

/// One vertex of the differentiation graph. Ids are issued monotonically at
/// creation, and every input exists before its consumer, so ascending id order
/// is a topological order of any graph.
template <typename T>
struct Node {
    using BackwardFn = std::function<void(const Node&, std::span<const T>, std::span<std::vector<T>*>)>;

    std::uint64_t id = next_node_id();
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::string op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Accumulates d(loss)/d(input_i) into grads[i] (nullptr when input i does
    // not require grad). Receives the node itself for access to saved outputs.
    BackwardFn backward;
};

inline thread_local int no_grad_depth = 0;

} // namespace detail

/// Grad recording is enabled unless a NoGradGuard is alive on this thread.
struct GradMode {
    static bool enabled() { return detail::no_grad_depth == 0; }
};

class NoGradGuard {
public:
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Dense row-major array participating in reverse-mode differentiation.
/// Copies share the underlying node (handle semantics, like torch.Tensor).
template <typename T>
class Tensor {
public:
    using value_type = T;
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (ngp::numel(shape) != static_cast<std::int64_t>(data.size())) {
            throw ShapeError("tensor: shape " + to_string(shape) + " holds " + std::to_string(ngp::numel(shape)) +
                             " elements but data has " + std::to_string(data.size()));
        }
        for (auto e : shape) {
            if (e < 0) throw ShapeError("tensor: negative extent in " + to_string(shape));
        }
        auto n = std::make_shared<detail::Node<T>>();
        n->shape = std::move(shape);
        n->data = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor full(const Shape& shape, T value, bool requires_grad = false) {
        return from_data(shape, std::vector<T>(static_cast<std::size_t>(ngp::numel(shape)), value), requires_grad);
    }
    static Tensor zeros(const Shape& shape, bool requires_grad = false) { return full(shape, T(0), requires_grad); }
    static Tensor ones(const Shape& shape, bool requires_grad = false) { return full(shape, T(1), requires_grad); }
    static Tensor scalar(T value, bool requires_grad = false) { return from_data({}, {value}, requires_grad); }

    bool defined() const { return static_cast<bool>(node_); }
    std::uint64_t id() const { return node().id; }
    const Shape& shape() const { return node().shape; }
    std::int64_t dim(std::size_t axis) const { return node().shape.at(axis); }
    std::size_t ndim() const { return node().shape.size(); }
    std::int64_t numel() const { return static_cast<std::int64_t>(node().data.size()); }
    bool requires_grad() const { return node().requires_grad; }
    bool is_leaf() const { return node().op == "leaf"; }
    const std::string& op() const { return node().op; }

    std::span<const T> data() const { return node().data; }
    /// Mutable view of the payload. Intended for leaves (parameters, inputs);
    /// mutating an interior node invalidates gradients computed through it.
    std::span<T> mutable_data() { return node().data; }
    const std::vector<T>& vec() const& { return node().data; }
    // A temporary tensor may hold the last reference to its node.
    std::vector<T> vec() const&& { return node().data; }

    T item() const {
        if (node().data.size() != 1) {
            throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a single element");
        }
        return node().data[0];
    }
    T operator[](std::size_t i) const { return node().data[i]; }

    /// Marks a leaf as trainable (or not). Interior nodes keep their recorded state.
    void set_requires_grad(bool value) {
        if (!is_leaf()) throw InvalidArgument("set_requires_grad: only leaves can be toggled");
        node().requires_grad = value;
    }

    /// New leaf holding a copy of the values; cuts the graph.
    Tensor detach() const { return from_data(shape(), node().data, false); }

    /// Same payload converted to another scalar type (new leaf).
    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(node().data.begin(), node().data.end());
        return Tensor<U>::from_data(shape(), std::move(out), false);
    }

    const NodePtr& node_ptr() const { return node_; }

private:
    detail::Node<T>& node() const {
        if (!node_) throw InvalidArgument("tensor: use of undefined tensor");
        return *node_;
    }

    NodePtr node_;
};

namespace detail {

/// Creates an op output. The graph edge and backward closure are retained only
/// when recording is enabled and some input requires grad.
template <typename T>
Tensor<T> make_result(std::string op, Shape shape, std::vector<T> data, std::vector<Tensor<T>> inputs,
                      typename Node<T>::BackwardFn backward) {
    auto n = std::make_shared<Node<T>>();
    n->op = std::move(op);
    n->shape = std::move(shape);
    n->data = std::move(data);
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any && GradMode::enabled()) {
        n->requires_grad = true;
        n->inputs.reserve(inputs.size());
        for (const auto& in : inputs) n->inputs.push_back(in.node_ptr());
        n->backward = std::move(backward);
    }
    return Tensor<T>(std::move(n));
}

} // namespace detail

} // namespace ngp

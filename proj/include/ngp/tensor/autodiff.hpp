#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ngp/tensor/ops.hpp"
#include "ngp/tensor/tensor.hpp"

namespace ngp {

/// One recorded primitive application.
struct TapeEntry {
    std::string op;
    std::vector<std::uint64_t> input_ids;
    std::uint64_t output_id = 0;
};

/// Recorded applications reachable from a root, in forward (topological) order.
template <typename T>
class Tape {
public:
    static Tape record(const Tensor<T>& root) {
        Tape tape;
        if (!root.requires_grad()) return tape;
        std::unordered_set<const detail::Node<T>*> seen;
        std::vector<const detail::Node<T>*> stack{root.node_ptr().get()};
        while (!stack.empty()) {
            const auto* n = stack.back();
            stack.pop_back();
            if (!seen.insert(n).second) continue;
            tape.nodes_.push_back(n);
            for (const auto& in : n->inputs)
                if (in->requires_grad) stack.push_back(in.get());
        }
        std::sort(tape.nodes_.begin(), tape.nodes_.end(), [](auto* a, auto* b) { return a->id < b->id; });
        return tape;
    }

    std::vector<TapeEntry> entries() const {
        std::vector<TapeEntry> out;
        for (const auto* n : nodes_) {
            if (n->op == "leaf") continue;
            TapeEntry e{n->op, {}, n->id};
            for (const auto& in : n->inputs) e.input_ids.push_back(in->id);
            out.push_back(std::move(e));
        }
        return out;
    }

    const std::vector<const detail::Node<T>*>& nodes() const { return nodes_; }

private:
    std::vector<const detail::Node<T>*> nodes_;
};

/// Gradients of a scalar with respect to every leaf that required grad.
template <typename T>
class Gradients {
public:
    /// Gradient for `t`; zeros of t's shape if the loss does not depend on it.
    Tensor<T> of(const Tensor<T>& t) const {
        auto it = grads_.find(t.id());
        if (it == grads_.end()) return Tensor<T>::zeros(t.shape());
        return Tensor<T>::from_data(t.shape(), it->second);
    }

    const std::vector<T>* find(std::uint64_t id) const {
        auto it = grads_.find(id);
        return it == grads_.end() ? nullptr : &it->second;
    }

    bool contains(const Tensor<T>& t) const { return grads_.count(t.id()) != 0; }
    std::size_t size() const { return grads_.size(); }
    const std::unordered_map<std::uint64_t, std::vector<T>>& map() const { return grads_; }

    void set(std::uint64_t id, std::vector<T> g) { grads_[id] = std::move(g); }

private:
    std::unordered_map<std::uint64_t, std::vector<T>> grads_;
};

/// Reverse-mode sweep from a scalar `loss`. Interior gradient buffers are
/// released as soon as their node has been processed.
template <typename T>
Gradients<T> backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward: loss must be scalar-shaped, got " + to_string(loss.shape()));
    }
    Gradients<T> result;
    if (!loss.requires_grad()) return result;
    const auto tape = Tape<T>::record(loss);
    std::unordered_map<const detail::Node<T>*, std::vector<T>> buf;
    buf[loss.node_ptr().get()] = {T(1)};
    const auto& nodes = tape.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const auto* n = *it;
        auto found = buf.find(n);
        if (found == buf.end()) continue;
        if (n->op == "leaf") {
            result.set(n->id, std::move(found->second));
            buf.erase(found);
            continue;
        }
        std::vector<T> gout = std::move(found->second);
        buf.erase(found);
        std::vector<std::vector<T>*> gin(n->inputs.size(), nullptr);
        for (std::size_t i = 0; i < n->inputs.size(); ++i) {
            const auto* in = n->inputs[i].get();
            if (!in->requires_grad) continue;
            auto& slot = buf[in];
            if (slot.empty()) slot.assign(in->data.size(), T(0));
            gin[i] = &slot;
        }
        n->backward(*n, gout, gin);
    }
    return result;
}

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for a scalar function f evaluated in double precision.
template <typename F>
double grad_check(F&& f, const Tensor<double>& x, double eps = 1e-5) {
    if (!(eps > 0.0)) throw InvalidArgument("grad_check: eps must be positive");
    auto leaf = Tensor<double>::from_data(x.shape(), x.vec(), true);
    const Tensor<double> y = f(leaf);
    if (y.numel() != 1) throw ShapeError("grad_check: function must be scalar-valued, got " + to_string(y.shape()));
    if (!std::isfinite(y.item())) throw NonFiniteError("grad_check: non-finite function value");
    const auto grads = backward(y);
    const auto analytic = grads.of(leaf).vec();
    double worst = 0.0;
    NoGradGuard guard;
    std::vector<double> probe = x.vec();
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double fp = f(Tensor<double>::from_data(x.shape(), probe)).item();
        probe[i] = saved - eps;
        const double fm = f(Tensor<double>::from_data(x.shape(), probe)).item();
        probe[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NonFiniteError("grad_check: non-finite function value at coordinate " + std::to_string(i));
        }
        const double numeric = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace ngp

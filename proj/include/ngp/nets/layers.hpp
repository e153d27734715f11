#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ngp/core/error.hpp"
#include "ngp/core/rng.hpp"
#include "ngp/tensor/ops.hpp"

namespace ngp {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;

enum class Activation { Relu, Leaky, Tanh };

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "leaky") return Activation::Leaky;
    if (s == "tanh") return Activation::Tanh;
    throw InvalidArgument("unknown activation '" + s + "'");
}

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Leaky: return "leaky";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation a) {
    switch (a) {
        case Activation::Relu: return relu(x);
        case Activation::Leaky: return leaky_relu(x, T(0.2));
        case Activation::Tanh: return tanh(x);
    }
    return x;
}

/// Gaussian(0, std) weights, zero bias.
template <typename T>
Tensor<T> gaussian_param(Rng& rng, const Shape& shape, double stddev) {
    std::vector<T> v(static_cast<std::size_t>(numel(shape)));
    for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
    return Tensor<T>::from_data(shape, std::move(v), true);
}

constexpr double kInitStd = 0.02;

template <typename T>
struct Conv {
    Tensor<T> weight;  // [out, in, k, k]
    Tensor<T> bias;    // [out]
    std::int64_t stride = 1;
    std::int64_t pad = 0;

    Conv() = default;
    Conv(Rng& rng, std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t s, std::int64_t p)
        : weight(gaussian_param<T>(rng, {out, in, k, k}, kInitStd)), bias(Tensor<T>::zeros({out}, true)), stride(s),
          pad(p) {}

    Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, pad); }

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }
};

/// Transposed convolution; weight layout [in, out, k, k].
template <typename T>
struct ConvT {
    Tensor<T> weight;
    Tensor<T> bias;
    std::int64_t stride = 2;
    std::int64_t pad = 1;

    ConvT() = default;
    ConvT(Rng& rng, std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t s, std::int64_t p)
        : weight(gaussian_param<T>(rng, {in, out, k, k}, kInitStd)), bias(Tensor<T>::zeros({out}, true)), stride(s),
          pad(p) {}

    Tensor<T> operator()(const Tensor<T>& x) const { return transpose_conv2d(x, weight, bias, stride, pad); }

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }
};

/// y = x W + b on [B, in].
template <typename T>
struct Linear {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [out]

    Linear() = default;
    Linear(Rng& rng, std::int64_t in, std::int64_t out)
        : weight(gaussian_param<T>(rng, {in, out}, kInitStd)), bias(Tensor<T>::zeros({out}, true)) {}

    Tensor<T> operator()(const Tensor<T>& x) const { return add(matmul(x, weight), bias); }

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }
};

/// conv3 - IN - act - conv3 - IN, plus identity skip.
template <typename T>
struct ResBlock {
    Conv<T> c1, c2;
    Activation act = Activation::Relu;

    ResBlock() = default;
    ResBlock(Rng& rng, std::int64_t ch, Activation a) : c1(rng, ch, ch, 3, 1, 1), c2(rng, ch, ch, 3, 1, 1), act(a) {}

    Tensor<T> operator()(const Tensor<T>& x) const {
        auto h = activate(instance_norm(c1(x), T(1e-5)), act);
        return add(x, instance_norm(c2(h), T(1e-5)));
    }

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        c1.collect(prefix + ".conv1", out);
        c2.collect(prefix + ".conv2", out);
    }
};

/// Appends a code z [B,Z] to x [B,C,H,W] as Z constant channels.
template <typename T>
Tensor<T> concat_code(const Tensor<T>& x, const Tensor<T>& z) {
    if (!z.defined()) return x;
    if (z.ndim() != 2 || z.dim(0) != x.dim(0)) {
        throw ShapeError("concat_code: code " + to_string(z.shape()) + " does not match batch of " + to_string(x.shape()));
    }
    auto tiled = broadcast(reshape(z, {z.dim(0), z.dim(1), 1, 1}), {x.dim(0), z.dim(1), x.dim(2), x.dim(3)});
    return concat<T>({x, tiled}, 1);
}

/// Receptive field of a stack of (kernel, stride) layers.
inline std::int64_t receptive_field(const std::vector<std::pair<std::int64_t, std::int64_t>>& layers) {
    std::int64_t rf = 1;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) rf = (rf - 1) * it->second + it->first;
    return rf;
}

} // namespace ngp

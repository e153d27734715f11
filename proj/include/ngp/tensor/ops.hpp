#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ngp/tensor/gemm.hpp"
#include "ngp/tensor/tensor.hpp"

namespace ngp {

namespace detail {

template <typename T>
using Grads = std::span<std::vector<T>*>;

inline std::int64_t norm_axis(std::int64_t axis, std::size_t ndim, const char* op) {
    const auto n = static_cast<std::int64_t>(ndim);
    if (axis < 0) axis += n;
    if (axis < 0 || axis >= n) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(ndim));
    }
    return axis;
}

/// Trailing-dimension alignment: extents must match or one of them must be 1.
inline Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
    const std::size_t n = std::max(a.size(), b.size());
    Shape out(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t ea = i < n - a.size() ? 1 : a[i - (n - a.size())];
        const std::int64_t eb = i < n - b.size() ? 1 : b[i - (n - b.size())];
        if (ea != eb && ea != 1 && eb != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
        }
        out[i] = ea == 1 ? eb : ea;
    }
    return out;
}

/// For each flat index of `out`, the flat index of the broadcast source `in`.
inline std::vector<std::int64_t> broadcast_index(const Shape& in, const Shape& out) {
    const std::size_t n = out.size();
    const std::size_t off = n - in.size();
    std::vector<std::int64_t> in_stride(n, 0);
    std::int64_t s = 1;
    for (std::size_t i = n; i-- > off;) {
        const std::int64_t e = in[i - off];
        in_stride[i] = e == 1 ? 0 : s;
        s *= e;
    }
    const std::int64_t total = numel(out);
    std::vector<std::int64_t> map(static_cast<std::size_t>(total));
    std::vector<std::int64_t> idx(n, 0);
    std::int64_t src = 0;
    for (std::int64_t f = 0; f < total; ++f) {
        map[static_cast<std::size_t>(f)] = src;
        for (std::size_t d = n; d-- > 0;) {
            ++idx[d];
            src += in_stride[d];
            if (idx[d] < out[d]) break;
            src -= in_stride[d] * idx[d];
            idx[d] = 0;
        }
    }
    return map;
}

inline void ensure_target_broadcastable(const Shape& in, const Shape& target, const char* op) {
    if (in.size() > target.size()) {
        throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(in) + " to lower rank " +
                         to_string(target));
    }
    const std::size_t off = target.size() - in.size();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] != target[i + off] && in[i] != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(in) + " to " + to_string(target));
        }
    }
}

template <typename T, typename F, typename DX>
Tensor<T> unary(const char* name, const Tensor<T>& x, F f, DX dx) {
    const auto& xd = x.vec();
    std::vector<T> y(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) y[i] = f(xd[i]);
    return make_result<T>(name, x.shape(), std::move(y), {x},
                          [dx](const Node<T>& self, std::span<const T> g, Grads<T> grads) {
                              auto* gx = grads[0];
                              if (!gx) return;
                              const auto& xin = self.inputs[0]->data;
                              for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * dx(xin[i], self.data[i]);
                          });
}

/// Elementwise binary op with broadcasting. `da`/`db` return the local
/// partial derivative given (a, b, out).
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary(const char* name, const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
    const bool same = a.shape() == b.shape();
    Shape out_shape = same ? a.shape() : broadcast_shapes(a.shape(), b.shape(), name);
    const auto& ad = a.vec();
    const auto& bd = b.vec();
    const auto total = static_cast<std::size_t>(numel(out_shape));
    std::vector<T> y(total);
    if (same) {
        for (std::size_t i = 0; i < total; ++i) y[i] = f(ad[i], bd[i]);
        return make_result<T>(name, std::move(out_shape), std::move(y), {a, b},
                              [da, db](const Node<T>& self, std::span<const T> g, Grads<T> grads) {
                                  const auto& av = self.inputs[0]->data;
                                  const auto& bv = self.inputs[1]->data;
                                  if (auto* ga = grads[0])
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          (*ga)[i] += g[i] * da(av[i], bv[i], self.data[i]);
                                  if (auto* gb = grads[1])
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          (*gb)[i] += g[i] * db(av[i], bv[i], self.data[i]);
                              });
    }
    auto ia = broadcast_index(a.shape(), out_shape);
    auto ib = broadcast_index(b.shape(), out_shape);
    for (std::size_t i = 0; i < total; ++i) y[i] = f(ad[static_cast<std::size_t>(ia[i])], bd[static_cast<std::size_t>(ib[i])]);
    return make_result<T>(
        name, std::move(out_shape), std::move(y), {a, b},
        [da, db, ia = std::move(ia), ib = std::move(ib)](const Node<T>& self, std::span<const T> g, Grads<T> grads) {
            const auto& av = self.inputs[0]->data;
            const auto& bv = self.inputs[1]->data;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const auto ka = static_cast<std::size_t>(ia[i]);
                const auto kb = static_cast<std::size_t>(ib[i]);
                if (grads[0]) (*grads[0])[ka] += g[i] * da(av[ka], bv[kb], self.data[i]);
                if (grads[1]) (*grads[1])[kb] += g[i] * db(av[ka], bv[kb], self.data[i]);
            }
        });
}

inline std::int64_t conv_out_extent(std::int64_t in, std::int64_t k, std::int64_t stride, std::int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

/// cols[(c*k + ky)*k + kx, oy*Wo + ox] = img[c, oy*s - p + ky, ox*s - p + kx] (0 outside).
template <typename T>
void im2col(const T* img, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t k, std::int64_t s,
            std::int64_t p, std::int64_t Ho, std::int64_t Wo, T* cols) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t ky = 0; ky < k; ++ky) {
            for (std::int64_t kx = 0; kx < k; ++kx) {
                T* row = cols + ((c * k + ky) * k + kx) * Ho * Wo;
                for (std::int64_t oy = 0; oy < Ho; ++oy) {
                    const std::int64_t iy = oy * s - p + ky;
                    T* dst = row + oy * Wo;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + Wo, T(0));
                        continue;
                    }
                    const T* src = img + (c * H + iy) * W;
                    for (std::int64_t ox = 0; ox < Wo; ++ox) {
                        const std::int64_t ix = ox * s - p + kx;
                        dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatters-adds columns back into the image.
template <typename T>
void col2im(const T* cols, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t k, std::int64_t s,
            std::int64_t p, std::int64_t Ho, std::int64_t Wo, T* img) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t ky = 0; ky < k; ++ky) {
            for (std::int64_t kx = 0; kx < k; ++kx) {
                const T* row = cols + ((c * k + ky) * k + kx) * Ho * Wo;
                for (std::int64_t oy = 0; oy < Ho; ++oy) {
                    const std::int64_t iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = img + (c * H + iy) * W;
                    const T* src = row + oy * Wo;
                    for (std::int64_t ox = 0; ox < Wo; ++ox) {
                        const std::int64_t ix = ox * s - p + kx;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

/// Reduction plan: flat input index -> flat output index.
struct ReducePlan {
    Shape out_shape;
    std::vector<std::int64_t> map;
    std::int64_t count = 1;
};

inline ReducePlan reduce_plan(const Shape& in, std::vector<std::int64_t> axes, bool keepdim, const char* op) {
    const std::size_t n = in.size();
    std::vector<bool> reduced(n, axes.empty());
    for (auto a : axes) reduced[static_cast<std::size_t>(norm_axis(a, n, op))] = true;
    ReducePlan plan;
    Shape kept(n);
    for (std::size_t i = 0; i < n; ++i) {
        kept[i] = reduced[i] ? 1 : in[i];
        if (reduced[i]) plan.count *= in[i];
        if (!reduced[i] || keepdim) plan.out_shape.push_back(kept[i]);
    }
    // Source index of the input in the kept-dims output equals broadcast_index
    // run in reverse: enumerate the input and map onto the reduced layout.
    const std::int64_t total = numel(in);
    plan.map.resize(static_cast<std::size_t>(total));
    std::vector<std::int64_t> out_stride(n, 0);
    std::int64_t s = 1;
    for (std::size_t i = n; i-- > 0;) {
        out_stride[i] = reduced[i] ? 0 : s;
        s *= kept[i];
    }
    std::vector<std::int64_t> idx(n, 0);
    std::int64_t dst = 0;
    for (std::int64_t f = 0; f < total; ++f) {
        plan.map[static_cast<std::size_t>(f)] = dst;
        for (std::size_t d = n; d-- > 0;) {
            ++idx[d];
            dst += out_stride[d];
            if (idx[d] < in[d]) break;
            dst -= out_stride[d] * idx[d];
            idx[d] = 0;
        }
    }
    return plan;
}

template <typename T>
Tensor<T> reduce_sum(const char* name, const Tensor<T>& x, std::vector<std::int64_t> axes, bool keepdim, bool mean) {
    auto plan = reduce_plan(x.shape(), std::move(axes), keepdim, name);
    std::vector<T> y(static_cast<std::size_t>(numel(plan.out_shape)), T(0));
    const auto& xd = x.vec();
    for (std::size_t i = 0; i < xd.size(); ++i) y[static_cast<std::size_t>(plan.map[i])] += xd[i];
    const T scale = mean ? T(1) / static_cast<T>(std::max<std::int64_t>(plan.count, 1)) : T(1);
    if (mean)
        for (auto& v : y) v *= scale;
    return make_result<T>(name, plan.out_shape, std::move(y), {x},
                          [map = std::move(plan.map), scale](const Node<T>&, std::span<const T> g, Grads<T> grads) {
                              auto* gx = grads[0];
                              if (!gx) return;
                              for (std::size_t i = 0; i < map.size(); ++i)
                                  (*gx)[i] += g[static_cast<std::size_t>(map[i])] * scale;
                          });
}

} // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary<T>(
        "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary<T>(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary<T>(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary<T>(
        "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
        [](T, T y, T out) { return -out / y; });
}

/// a^b elementwise. For a == 0 the partials are defined as 0 (except d/da at
/// b == 1), which keeps masked pixels with zero exponent well behaved.
template <typename T>
Tensor<T> pow(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary<T>(
        "pow", a, b, [](T x, T y) { return std::pow(x, y); },
        [](T x, T y, T out) {
            if (x == T(0)) return y == T(1) ? T(1) : T(0);
            return y * out / x;
        },
        [](T x, T, T out) { return x > T(0) ? out * std::log(x) : T(0); });
}

template <typename T>
Tensor<T> pow(const Tensor<T>& a, T exponent) {
    return pow(a, Tensor<T>::scalar(exponent));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::unary<T>(
        "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2)) {
    return detail::unary<T>(
        "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
    return detail::unary<T>(
        "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary<T>(
        "sigmoid", x,
        [](T v) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    return detail::unary<T>(
        "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
    return detail::unary<T>(
        "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

/// log(1 + e^x), computed stably.
template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
    return detail::unary<T>(
        "softplus", x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
        [](T v, T) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
    return detail::unary<T>(
        "abs", x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

/// Clamp to [lo, hi]; gradient passes through inside the closed interval.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    return detail::unary<T>(
        "clamp", x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, T lo) {
    return clamp(x, lo, std::numeric_limits<T>::infinity());
}

// ---------------------------------------------------------------- reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::vector<std::int64_t> axes = {}, bool keepdim = false) {
    return detail::reduce_sum<T>("sum", x, std::move(axes), keepdim, false);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::vector<std::int64_t> axes = {}, bool keepdim = false) {
    return detail::reduce_sum<T>("mean", x, std::move(axes), keepdim, true);
}

// ---------------------------------------------------------------- structure

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    std::int64_t known = 1;
    int infer = -1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (infer >= 0) throw ShapeError("reshape: more than one inferred extent in " + to_string(shape));
            infer = static_cast<int>(i);
        } else {
            known *= shape[i];
        }
    }
    if (infer >= 0 && known > 0) shape[static_cast<std::size_t>(infer)] = x.numel() / known;
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    }
    return detail::make_result<T>("reshape", std::move(shape), x.vec(), {x},
                                  [](const detail::Node<T>&, std::span<const T> g, detail::Grads<T> grads) {
                                      if (auto* gx = grads[0])
                                          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                                  });
}

/// Explicit broadcast to `shape` under trailing alignment.
template <typename T>
Tensor<T> broadcast(const Tensor<T>& x, const Shape& shape) {
    detail::ensure_target_broadcastable(x.shape(), shape, "broadcast");
    auto map = detail::broadcast_index(x.shape(), shape);
    std::vector<T> y(map.size());
    const auto& xd = x.vec();
    for (std::size_t i = 0; i < map.size(); ++i) y[i] = xd[static_cast<std::size_t>(map[i])];
    return detail::make_result<T>("broadcast", shape, std::move(y), {x},
                                  [map = std::move(map)](const detail::Node<T>&, std::span<const T> g,
                                                         detail::Grads<T> grads) {
                                      if (auto* gx = grads[0])
                                          for (std::size_t i = 0; i < g.size(); ++i)
                                              (*gx)[static_cast<std::size_t>(map[i])] += g[i];
                                  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::int64_t axis) {
    if (xs.empty()) throw ShapeError("concat: no inputs");
    const Shape& ref = xs.front().shape();
    const auto ax = static_cast<std::size_t>(detail::norm_axis(axis, ref.size(), "concat"));
    Shape out = ref;
    out[ax] = 0;
    for (const auto& x : xs) {
        if (x.ndim() != ref.size()) throw ShapeError("concat: rank mismatch " + to_string(ref) + " vs " + to_string(x.shape()));
        for (std::size_t d = 0; d < ref.size(); ++d) {
            if (d != ax && x.shape()[d] != ref[d]) {
                throw ShapeError("concat: extent mismatch " + to_string(ref) + " vs " + to_string(x.shape()) +
                                 " on axis " + std::to_string(d));
            }
        }
        out[ax] += x.shape()[ax];
    }
    std::int64_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < ax; ++d) outer *= ref[d];
    for (std::size_t d = ax + 1; d < ref.size(); ++d) inner *= ref[d];
    std::vector<std::int64_t> widths;
    for (const auto& x : xs) widths.push_back(x.shape()[ax] * inner);
    const std::int64_t row = out[ax] * inner;
    std::vector<T> y(static_cast<std::size_t>(numel(out)));
    std::int64_t off = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto& xd = xs[k].vec();
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy_n(xd.data() + o * widths[k], widths[k], y.data() + o * row + off);
        off += widths[k];
    }
    return detail::make_result<T>("concat", std::move(out), std::move(y), xs,
                                  [widths, outer, row](const detail::Node<T>&, std::span<const T> g,
                                                       detail::Grads<T> grads) {
                                      std::int64_t o2 = 0;
                                      for (std::size_t k = 0; k < widths.size(); ++k) {
                                          if (auto* gk = grads[k]) {
                                              for (std::int64_t o = 0; o < outer; ++o)
                                                  for (std::int64_t j = 0; j < widths[k]; ++j)
                                                      (*gk)[static_cast<std::size_t>(o * widths[k] + j)] +=
                                                          g[static_cast<std::size_t>(o * row + o2 + j)];
                                          }
                                          o2 += widths[k];
                                      }
                                  });
}

/// x[..., start:end, ...] along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::int64_t axis, std::int64_t start, std::int64_t end) {
    const auto ax = static_cast<std::size_t>(detail::norm_axis(axis, x.ndim(), "slice"));
    const std::int64_t extent = x.shape()[ax];
    if (start < 0 || end > extent || start > end) {
        throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(end) +
                         ") invalid for extent " + std::to_string(extent) + " of " + to_string(x.shape()));
    }
    Shape out = x.shape();
    out[ax] = end - start;
    std::int64_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < ax; ++d) outer *= x.shape()[d];
    for (std::size_t d = ax + 1; d < x.ndim(); ++d) inner *= x.shape()[d];
    const std::int64_t src_row = extent * inner;
    const std::int64_t dst_row = (end - start) * inner;
    std::vector<T> y(static_cast<std::size_t>(numel(out)));
    const auto& xd = x.vec();
    for (std::int64_t o = 0; o < outer; ++o)
        std::copy_n(xd.data() + o * src_row + start * inner, dst_row, y.data() + o * dst_row);
    return detail::make_result<T>("slice", std::move(out), std::move(y), {x},
                                  [outer, src_row, dst_row, start, inner](const detail::Node<T>&,
                                                                          std::span<const T> g,
                                                                          detail::Grads<T> grads) {
                                      auto* gx = grads[0];
                                      if (!gx) return;
                                      for (std::int64_t o = 0; o < outer; ++o)
                                          for (std::int64_t j = 0; j < dst_row; ++j)
                                              (*gx)[static_cast<std::size_t>(o * src_row + start * inner + j)] +=
                                                  g[static_cast<std::size_t>(o * dst_row + j)];
                                  });
}

// ---------------------------------------------------------------- linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }
    const std::int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    std::vector<T> y(static_cast<std::size_t>(M * N), T(0));
    detail::gemm_nn(M, N, K, a.vec().data(), b.vec().data(), y.data());
    return detail::make_result<T>("matmul", {M, N}, std::move(y), {a, b},
                                  [M, K, N](const detail::Node<T>& self, std::span<const T> g,
                                            detail::Grads<T> grads) {
                                      const auto& av = self.inputs[0]->data;
                                      const auto& bv = self.inputs[1]->data;
                                      if (auto* ga = grads[0]) {
                                          std::vector<T> scratch(static_cast<std::size_t>(N * K));
                                          detail::gemm_nt(M, K, N, g.data(), bv.data(), ga->data(), scratch.data());
                                      }
                                      if (auto* gb = grads[1]) detail::gemm_tn(K, N, M, av.data(), g.data(), gb->data());
                                  });
}

/// 2-D cross-correlation. x: [N,Cin,H,W], w: [Cout,Cin,k,k], optional bias [Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::int64_t stride = 1,
                 std::int64_t pad = 0) {
    if (x.ndim() != 4 || w.ndim() != 4 || w.dim(2) != w.dim(3) || x.dim(1) != w.dim(1)) {
        throw ShapeError("conv2d: input " + to_string(x.shape()) + " incompatible with weight " + to_string(w.shape()));
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != w.dim(0))) {
        throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match weight " + to_string(w.shape()));
    }
    if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/padding");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t Co = w.dim(0), k = w.dim(2);
    const std::int64_t Ho = detail::conv_out_extent(H, k, stride, pad);
    const std::int64_t Wo = detail::conv_out_extent(W, k, stride, pad);
    if (Ho < 1 || Wo < 1) {
        throw ShapeError("conv2d: kernel " + std::to_string(k) + " too large for input " + to_string(x.shape()));
    }
    const std::int64_t Kdim = C * k * k, P = Ho * Wo;
    std::vector<T> y(static_cast<std::size_t>(N * Co * P), T(0));
    std::vector<T> cols(static_cast<std::size_t>(Kdim * P));
    for (std::int64_t n = 0; n < N; ++n) {
        detail::im2col(x.vec().data() + n * C * H * W, C, H, W, k, stride, pad, Ho, Wo, cols.data());
        T* yn = y.data() + n * Co * P;
        if (bias.defined())
            for (std::int64_t co = 0; co < Co; ++co) std::fill(yn + co * P, yn + (co + 1) * P, bias.vec()[static_cast<std::size_t>(co)]);
        detail::gemm_nn(Co, P, Kdim, w.vec().data(), cols.data(), yn);
    }
    std::vector<Tensor<T>> inputs{x, w};
    if (bias.defined()) inputs.push_back(bias);
    return detail::make_result<T>(
        "conv2d", {N, Co, Ho, Wo}, std::move(y), std::move(inputs),
        [=](const detail::Node<T>& self, std::span<const T> g, detail::Grads<T> grads) {
            const auto& xv = self.inputs[0]->data;
            const auto& wv = self.inputs[1]->data;
            std::vector<T> cols_b(static_cast<std::size_t>(Kdim * P));
            std::vector<T> scratch(static_cast<std::size_t>(Kdim * P));
            for (std::int64_t n = 0; n < N; ++n) {
                const T* gn = g.data() + n * Co * P;
                if (grads[1]) {
                    detail::im2col(xv.data() + n * C * H * W, C, H, W, k, stride, pad, Ho, Wo, cols_b.data());
                    detail::gemm_nt(Co, Kdim, P, gn, cols_b.data(), grads[1]->data(), scratch.data());
                }
                if (grads[0]) {
                    std::fill(cols_b.begin(), cols_b.end(), T(0));
                    detail::gemm_tn(Kdim, P, Co, wv.data(), gn, cols_b.data());
                    detail::col2im(cols_b.data(), C, H, W, k, stride, pad, Ho, Wo, grads[0]->data() + n * C * H * W);
                }
                if (grads.size() > 2 && grads[2]) {
                    for (std::int64_t co = 0; co < Co; ++co) {
                        T acc = T(0);
                        for (std::int64_t p = 0; p < P; ++p) acc += gn[co * P + p];
                        (*grads[2])[static_cast<std::size_t>(co)] += acc;
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::int64_t stride = 1, std::int64_t pad = 0) {
    return conv2d(x, w, Tensor<T>{}, stride, pad);
}

/// Transposed convolution (adjoint of conv2d). x: [N,Cin,H,W], w: [Cin,Cout,k,k].
/// Output extent: (H-1)*stride - 2*pad + k + output_padding.
template <typename T>
Tensor<T> transpose_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::int64_t stride = 1,
                           std::int64_t pad = 0, std::int64_t output_padding = 0) {
    if (x.ndim() != 4 || w.ndim() != 4 || w.dim(2) != w.dim(3) || x.dim(1) != w.dim(0)) {
        throw ShapeError("transpose_conv2d: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(w.shape()));
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != w.dim(1))) {
        throw ShapeError("transpose_conv2d: bias " + to_string(bias.shape()) + " does not match weight " +
                         to_string(w.shape()));
    }
    if (stride < 1 || pad < 0 || output_padding < 0 || output_padding >= stride) {
        throw ShapeError("transpose_conv2d: invalid stride/padding");
    }
    const std::int64_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t Co = w.dim(1), k = w.dim(2);
    const std::int64_t Ho = (H - 1) * stride - 2 * pad + k + output_padding;
    const std::int64_t Wo = (W - 1) * stride - 2 * pad + k + output_padding;
    if (Ho < 1 || Wo < 1) throw ShapeError("transpose_conv2d: empty output for " + to_string(x.shape()));
    const std::int64_t Kdim = Co * k * k, P = H * W;
    std::vector<T> y(static_cast<std::size_t>(N * Co * Ho * Wo), T(0));
    std::vector<T> cols(static_cast<std::size_t>(Kdim * P));
    for (std::int64_t n = 0; n < N; ++n) {
        std::fill(cols.begin(), cols.end(), T(0));
        detail::gemm_tn(Kdim, P, Ci, w.vec().data(), x.vec().data() + n * Ci * P, cols.data());
        T* yn = y.data() + n * Co * Ho * Wo;
        if (bias.defined())
            for (std::int64_t co = 0; co < Co; ++co)
                std::fill(yn + co * Ho * Wo, yn + (co + 1) * Ho * Wo, bias.vec()[static_cast<std::size_t>(co)]);
        detail::col2im(cols.data(), Co, Ho, Wo, k, stride, pad, H, W, yn);
    }
    std::vector<Tensor<T>> inputs{x, w};
    if (bias.defined()) inputs.push_back(bias);
    return detail::make_result<T>(
        "transpose_conv2d", {N, Co, Ho, Wo}, std::move(y), std::move(inputs),
        [=](const detail::Node<T>& self, std::span<const T> g, detail::Grads<T> grads) {
            const auto& xv = self.inputs[0]->data;
            const auto& wv = self.inputs[1]->data;
            std::vector<T> dcols(static_cast<std::size_t>(Kdim * P));
            std::vector<T> scratch(static_cast<std::size_t>(Kdim * P));
            for (std::int64_t n = 0; n < N; ++n) {
                const T* gn = g.data() + n * Co * Ho * Wo;
                detail::im2col(gn, Co, Ho, Wo, k, stride, pad, H, W, dcols.data());
                if (grads[0]) detail::gemm_nn(Ci, P, Kdim, wv.data(), dcols.data(), grads[0]->data() + n * Ci * P);
                if (grads[1])
                    detail::gemm_nt(Ci, Kdim, P, xv.data() + n * Ci * P, dcols.data(), grads[1]->data(), scratch.data());
                if (grads.size() > 2 && grads[2]) {
                    for (std::int64_t co = 0; co < Co; ++co) {
                        T acc = T(0);
                        for (std::int64_t p = 0; p < Ho * Wo; ++p) acc += gn[co * Ho * Wo + p];
                        (*grads[2])[static_cast<std::size_t>(co)] += acc;
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> transpose_conv2d(const Tensor<T>& x, const Tensor<T>& w, std::int64_t stride = 1, std::int64_t pad = 0,
                           std::int64_t output_padding = 0) {
    return transpose_conv2d(x, w, Tensor<T>{}, stride, pad, output_padding);
}

// ---------------------------------------------------------------- normalization

/// Per-position L2 normalization across axis 1: y = x / sqrt(sum_c x_c^2 + eps).
template <typename T>
Tensor<T> normalize_l2_channel(const Tensor<T>& x, T eps = T(1e-12)) {
    if (x.ndim() < 2) throw ShapeError("normalize_l2_channel: need rank >= 2, got " + to_string(x.shape()));
    const std::int64_t N = x.dim(0), C = x.dim(1), P = x.numel() / std::max<std::int64_t>(N * C, 1);
    const auto& xd = x.vec();
    std::vector<T> y(xd.size());
    std::vector<T> inv(static_cast<std::size_t>(N * P));
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t p = 0; p < P; ++p) {
            T ss = eps;
            for (std::int64_t c = 0; c < C; ++c) {
                const T v = xd[static_cast<std::size_t>((n * C + c) * P + p)];
                ss += v * v;
            }
            const T r = T(1) / std::sqrt(ss);
            inv[static_cast<std::size_t>(n * P + p)] = r;
            for (std::int64_t c = 0; c < C; ++c) {
                const auto i = static_cast<std::size_t>((n * C + c) * P + p);
                y[i] = xd[i] * r;
            }
        }
    }
    return detail::make_result<T>("normalize_l2_channel", x.shape(), std::move(y), {x},
                                  [N, C, P, inv = std::move(inv)](const detail::Node<T>& self, std::span<const T> g,
                                                                  detail::Grads<T> grads) {
                                      auto* gx = grads[0];
                                      if (!gx) return;
                                      const auto& yv = self.data;
                                      for (std::int64_t n = 0; n < N; ++n) {
                                          for (std::int64_t p = 0; p < P; ++p) {
                                              T dot = T(0);
                                              for (std::int64_t c = 0; c < C; ++c) {
                                                  const auto i = static_cast<std::size_t>((n * C + c) * P + p);
                                                  dot += g[i] * yv[i];
                                              }
                                              const T r = inv[static_cast<std::size_t>(n * P + p)];
                                              for (std::int64_t c = 0; c < C; ++c) {
                                                  const auto i = static_cast<std::size_t>((n * C + c) * P + p);
                                                  (*gx)[i] += (g[i] - yv[i] * dot) * r;
                                              }
                                          }
                                      }
                                  });
}

/// Per-(sample, channel) standardization over all trailing axes; biased
/// variance with eps in the denominator. No affine parameters.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5)) {
    if (x.ndim() < 3) throw ShapeError("instance_norm: need rank >= 3, got " + to_string(x.shape()));
    const std::int64_t G = x.dim(0) * x.dim(1), P = x.numel() / std::max<std::int64_t>(G, 1);
    const auto& xd = x.vec();
    std::vector<T> y(xd.size());
    std::vector<T> inv_std(static_cast<std::size_t>(G));
    for (std::int64_t gi = 0; gi < G; ++gi) {
        const T* src = xd.data() + gi * P;
        T mu = T(0);
        for (std::int64_t p = 0; p < P; ++p) mu += src[p];
        mu /= static_cast<T>(P);
        T var = T(0);
        for (std::int64_t p = 0; p < P; ++p) var += (src[p] - mu) * (src[p] - mu);
        var /= static_cast<T>(P);
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(gi)] = is;
        for (std::int64_t p = 0; p < P; ++p) y[static_cast<std::size_t>(gi * P + p)] = (src[p] - mu) * is;
    }
    return detail::make_result<T>("instance_norm", x.shape(), std::move(y), {x},
                                  [G, P, inv_std = std::move(inv_std)](const detail::Node<T>& self,
                                                                       std::span<const T> g, detail::Grads<T> grads) {
                                      auto* gx = grads[0];
                                      if (!gx) return;
                                      const auto& yv = self.data;
                                      for (std::int64_t gi = 0; gi < G; ++gi) {
                                          T mg = T(0), mgy = T(0);
                                          for (std::int64_t p = 0; p < P; ++p) {
                                              const auto i = static_cast<std::size_t>(gi * P + p);
                                              mg += g[i];
                                              mgy += g[i] * yv[i];
                                          }
                                          mg /= static_cast<T>(P);
                                          mgy /= static_cast<T>(P);
                                          const T is = inv_std[static_cast<std::size_t>(gi)];
                                          for (std::int64_t p = 0; p < P; ++p) {
                                              const auto i = static_cast<std::size_t>(gi * P + p);
                                              (*gx)[i] += is * (g[i] - mg - yv[i] * mgy);
                                          }
                                      }
                                  });
}

// ---------------------------------------------------------------- resampling

/// Bilinear resampling of [N,C,H,W] to [N,C,out_h,out_w] with half-pixel
/// centers (align_corners = false) and edge clamping.
template <typename T>
Tensor<T> pixel_resample(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
    if (x.ndim() != 4 || out_h < 1 || out_w < 1) {
        throw ShapeError("pixel_resample: need [N,C,H,W] input and positive size, got " + to_string(x.shape()));
    }
    const std::int64_t NC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    struct Tap {
        std::int64_t i0, i1;
        T w1;
    };
    auto taps = [](std::int64_t in, std::int64_t out) {
        std::vector<Tap> t(static_cast<std::size_t>(out));
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::int64_t o = 0; o < out; ++o) {
            double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(in - 1));
            const auto i0 = static_cast<std::int64_t>(std::floor(s));
            const std::int64_t i1 = std::min(i0 + 1, in - 1);
            t[static_cast<std::size_t>(o)] = {i0, i1, static_cast<T>(s - static_cast<double>(i0))};
        }
        return t;
    };
    auto ty = taps(H, out_h);
    auto tx = taps(W, out_w);
    const auto& xd = x.vec();
    std::vector<T> y(static_cast<std::size_t>(NC * out_h * out_w));
    for (std::int64_t c = 0; c < NC; ++c) {
        const T* src = xd.data() + c * H * W;
        T* dst = y.data() + c * out_h * out_w;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const auto& a = ty[static_cast<std::size_t>(oy)];
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
                const auto& b = tx[static_cast<std::size_t>(ox)];
                const T top = src[a.i0 * W + b.i0] * (T(1) - b.w1) + src[a.i0 * W + b.i1] * b.w1;
                const T bot = src[a.i1 * W + b.i0] * (T(1) - b.w1) + src[a.i1 * W + b.i1] * b.w1;
                dst[oy * out_w + ox] = top * (T(1) - a.w1) + bot * a.w1;
            }
        }
    }
    return detail::make_result<T>(
        "pixel_resample", {x.dim(0), x.dim(1), out_h, out_w}, std::move(y), {x},
        [=, ty = std::move(ty), tx = std::move(tx)](const detail::Node<T>&, std::span<const T> g,
                                                      detail::Grads<T> grads) {
            auto* gx = grads[0];
            if (!gx) return;
            for (std::int64_t c = 0; c < NC; ++c) {
                T* dst = gx->data() + c * H * W;
                const T* src = g.data() + c * out_h * out_w;
                for (std::int64_t oy = 0; oy < out_h; ++oy) {
                    const auto& a = ty[static_cast<std::size_t>(oy)];
                    for (std::int64_t ox = 0; ox < out_w; ++ox) {
                        const auto& b = tx[static_cast<std::size_t>(ox)];
                        const T v = src[oy * out_w + ox];
                        dst[a.i0 * W + b.i0] += v * (T(1) - a.w1) * (T(1) - b.w1);
                        dst[a.i0 * W + b.i1] += v * (T(1) - a.w1) * b.w1;
                        dst[a.i1 * W + b.i0] += v * a.w1 * (T(1) - b.w1);
                        dst[a.i1 * W + b.i1] += v * a.w1 * b.w1;
                    }
                }
            }
        });
}

// ---------------------------------------------------------------- operators

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T>
Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T>
Tensor<T> operator+(const Tensor<T>& a, T s) { return add(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, T s) { return sub(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, T s) { return mul(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> operator*(T s, const Tensor<T>& a) { return mul(Tensor<T>::scalar(s), a); }
template <typename T>
Tensor<T> operator-(T s, const Tensor<T>& a) { return sub(Tensor<T>::scalar(s), a); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a) { return mul(Tensor<T>::scalar(T(-1)), a); }

// ---------------------------------------------------------------- dispatch

using AttrValue = std::variant<double, std::int64_t, std::vector<std::int64_t>>;
using Attrs = std::map<std::string, AttrValue>;

namespace detail {

inline double attr_f(const Attrs& attrs, const std::string& key, double fallback) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return fallback;
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    throw InvalidArgument("attribute '" + key + "' is not a scalar");
}

inline std::int64_t attr_i(const Attrs& attrs, const std::string& key, std::int64_t fallback) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return fallback;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
    if (const auto* d = std::get_if<double>(&it->second)) return static_cast<std::int64_t>(*d);
    throw InvalidArgument("attribute '" + key + "' is not a scalar");
}

inline std::vector<std::int64_t> attr_v(const Attrs& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return {};
    if (const auto* v = std::get_if<std::vector<std::int64_t>>(&it->second)) return *v;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return {*i};
    throw InvalidArgument("attribute '" + key + "' is not an integer list");
}

template <typename T>
void expect_arity(const std::string& op, const std::vector<Tensor<T>>& in, std::size_t lo, std::size_t hi) {
    if (in.size() < lo || in.size() > hi) {
        throw ShapeError(op + ": expected " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) +
                         " inputs, got " + std::to_string(in.size()));
    }
}

} // namespace detail

/// Names accepted by apply_primitive.
inline const std::vector<std::string>& primitive_names() {
    static const std::vector<std::string> names{
        "add",     "sub",        "mul",       "div",           "matmul",   "conv2d",  "transpose_conv2d",
        "leaky_relu", "relu",    "tanh",      "sigmoid",       "exp",      "log",     "pow",
        "sum",     "mean",       "concat",    "slice",         "broadcast", "normalize_l2_channel",
        "instance_norm", "clamp", "pixel_resample", "softplus", "abs",     "reshape"};
    return names;
}

/// Applies a primitive by name. Attributes: stride/padding/output_padding
/// (convs), slope (leaky_relu), exponent (pow with one input), axes/keepdim
/// (sum, mean), axis/start/end (concat, slice), shape (broadcast, reshape),
/// eps (normalizations), min/max (clamp), height/width (pixel_resample).
template <typename T>
Tensor<T> apply_primitive(const std::string& op, const std::vector<Tensor<T>>& in, const Attrs& attrs = {}) {
    using detail::attr_f;
    using detail::attr_i;
    using detail::attr_v;
    using detail::expect_arity;
    if (op == "add") return expect_arity(op, in, 2, 2), add(in[0], in[1]);
    if (op == "sub") return expect_arity(op, in, 2, 2), sub(in[0], in[1]);
    if (op == "mul") return expect_arity(op, in, 2, 2), mul(in[0], in[1]);
    if (op == "div") return expect_arity(op, in, 2, 2), div(in[0], in[1]);
    if (op == "matmul") return expect_arity(op, in, 2, 2), matmul(in[0], in[1]);
    if (op == "conv2d") {
        expect_arity(op, in, 2, 3);
        return conv2d(in[0], in[1], in.size() > 2 ? in[2] : Tensor<T>{}, attr_i(attrs, "stride", 1),
                      attr_i(attrs, "padding", 0));
    }
    if (op == "transpose_conv2d") {
        expect_arity(op, in, 2, 3);
        return transpose_conv2d(in[0], in[1], in.size() > 2 ? in[2] : Tensor<T>{}, attr_i(attrs, "stride", 1),
                                attr_i(attrs, "padding", 0), attr_i(attrs, "output_padding", 0));
    }
    if (op == "leaky_relu") return expect_arity(op, in, 1, 1), leaky_relu(in[0], static_cast<T>(attr_f(attrs, "slope", 0.2)));
    if (op == "relu") return expect_arity(op, in, 1, 1), relu(in[0]);
    if (op == "tanh") return expect_arity(op, in, 1, 1), tanh(in[0]);
    if (op == "sigmoid") return expect_arity(op, in, 1, 1), sigmoid(in[0]);
    if (op == "exp") return expect_arity(op, in, 1, 1), exp(in[0]);
    if (op == "log") return expect_arity(op, in, 1, 1), log(in[0]);
    if (op == "softplus") return expect_arity(op, in, 1, 1), softplus(in[0]);
    if (op == "abs") return expect_arity(op, in, 1, 1), abs(in[0]);
    if (op == "pow") {
        expect_arity(op, in, 1, 2);
        return in.size() == 2 ? pow(in[0], in[1]) : pow(in[0], static_cast<T>(attr_f(attrs, "exponent", 1.0)));
    }
    if (op == "sum") return expect_arity(op, in, 1, 1), sum(in[0], attr_v(attrs, "axes"), attr_i(attrs, "keepdim", 0) != 0);
    if (op == "mean") return expect_arity(op, in, 1, 1), mean(in[0], attr_v(attrs, "axes"), attr_i(attrs, "keepdim", 0) != 0);
    if (op == "concat") return expect_arity(op, in, 1, 1024), concat(in, attr_i(attrs, "axis", 0));
    if (op == "slice") {
        expect_arity(op, in, 1, 1);
        return slice(in[0], attr_i(attrs, "axis", 0), attr_i(attrs, "start", 0), attr_i(attrs, "end", in[0].dim(0)));
    }
    if (op == "broadcast") return expect_arity(op, in, 1, 1), broadcast(in[0], attr_v(attrs, "shape"));
    if (op == "reshape") return expect_arity(op, in, 1, 1), reshape(in[0], attr_v(attrs, "shape"));
    if (op == "normalize_l2_channel")
        return expect_arity(op, in, 1, 1), normalize_l2_channel(in[0], static_cast<T>(attr_f(attrs, "eps", 1e-12)));
    if (op == "instance_norm")
        return expect_arity(op, in, 1, 1), instance_norm(in[0], static_cast<T>(attr_f(attrs, "eps", 1e-5)));
    if (op == "clamp") {
        expect_arity(op, in, 1, 1);
        return clamp(in[0], static_cast<T>(attr_f(attrs, "min", -std::numeric_limits<double>::infinity())),
                     static_cast<T>(attr_f(attrs, "max", std::numeric_limits<double>::infinity())));
    }
    if (op == "pixel_resample") {
        expect_arity(op, in, 1, 1);
        return pixel_resample(in[0], attr_i(attrs, "height", in[0].dim(2)), attr_i(attrs, "width", in[0].dim(3)));
    }
    throw UnknownPrimitiveError(op);
}

} // namespace ngp

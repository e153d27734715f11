#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ngp/nets/layers.hpp"

namespace ngp {

enum class Head { None, L2, Sigmoid, Softplus, Relu };

inline Head head_from_string(const std::string& s) {
    if (s == "none") return Head::None;
    if (s == "l2") return Head::L2;
    if (s == "sigmoid") return Head::Sigmoid;
    if (s == "softplus") return Head::Softplus;
    if (s == "relu") return Head::Relu;
    throw InvalidArgument("unknown output head '" + s + "'");
}

inline const char* to_string(Head h) {
    switch (h) {
        case Head::None: return "none";
        case Head::L2: return "l2";
        case Head::Sigmoid: return "sigmoid";
        case Head::Softplus: return "softplus";
        case Head::Relu: return "relu";
    }
    return "?";
}

template <typename T>
Tensor<T> apply_head(const Tensor<T>& x, Head h) {
    switch (h) {
        case Head::None: return x;
        case Head::L2: return normalize_l2_channel(x, T(1e-12));
        case Head::Sigmoid: return sigmoid(x);
        case Head::Softplus: return softplus(x);
        case Head::Relu: return relu(x);
    }
    return x;
}

/// ResNet encoder-decoder: k3 stem, stride-2 k4 downsampling, residual
/// bottleneck, k4 transposed-conv upsampling, k3 output conv and a head. An
/// optional code is concatenated to the input of every encoder stage.
struct GeneratorConfig {
    int in_channels = 1;
    int out_channels = 3;
    int base = 32;
    int n_down = 2;
    int n_res = 2;
    int code_dim = 0;
    Head head = Head::None;
    Activation activation = Activation::Relu;

    int width(int level) const { return base << std::min(level, 2); }
};

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"kind", "resnet_generator"}, {"in_channels", c.in_channels}, {"out_channels", c.out_channels},
         {"base", c.base},             {"n_down", c.n_down},           {"n_res", c.n_res},
         {"code_dim", c.code_dim},     {"head", to_string(c.head)},    {"activation", to_string(c.activation)}};
}

inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    c.in_channels = j.at("in_channels");
    c.out_channels = j.at("out_channels");
    c.base = j.at("base");
    c.n_down = j.at("n_down");
    c.n_res = j.at("n_res");
    c.code_dim = j.at("code_dim");
    c.head = head_from_string(j.at("head"));
    c.activation = activation_from_string(j.at("activation"));
}

template <typename T>
class ResnetGenerator {
public:
    ResnetGenerator() = default;
    ResnetGenerator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
        if (cfg.base < 1 || cfg.n_down < 0 || cfg.n_res < 0) throw InvalidArgument("generator: invalid widths");
        stem_ = Conv<T>(rng, cfg.in_channels + cfg.code_dim, cfg.width(0), 3, 1, 1);
        for (int i = 0; i < cfg.n_down; ++i) {
            down_.emplace_back(rng, cfg.width(i) + cfg.code_dim, cfg.width(i + 1), 4, 2, 1);
        }
        for (int i = 0; i < cfg.n_res; ++i) res_.emplace_back(rng, cfg.width(cfg.n_down), cfg.activation);
        for (int i = cfg.n_down; i > 0; --i) up_.emplace_back(rng, cfg.width(i), cfg.width(i - 1), 4, 2, 1);
        out_ = Conv<T>(rng, cfg.width(0), cfg.out_channels, 3, 1, 1);
    }

    const GeneratorConfig& config() const { return cfg_; }

    /// x [B,in,H,W] with H and W divisible by 2^n_down; code [B,code_dim] or undefined.
    Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& code = {}) const {
        if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels) {
            throw ShapeError("generator: expected [B," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                             to_string(x.shape()));
        }
        if ((cfg_.code_dim > 0) != code.defined() || (code.defined() && code.dim(1) != cfg_.code_dim)) {
            throw ShapeError("generator: code does not match code_dim " + std::to_string(cfg_.code_dim));
        }
        const auto a = cfg_.activation;
        auto h = activate(instance_norm(stem_(concat_code(x, code)), T(1e-5)), a);
        for (const auto& d : down_) h = activate(instance_norm(d(concat_code(h, code)), T(1e-5)), a);
        for (const auto& r : res_) h = r(h);
        for (const auto& u : up_) h = activate(instance_norm(u(h), T(1e-5)), a);
        return apply_head(out_(h), cfg_.head);
    }

    NamedParams<T> parameters() const {
        NamedParams<T> p;
        stem_.collect("stem", p);
        for (std::size_t i = 0; i < down_.size(); ++i) down_[i].collect("down" + std::to_string(i), p);
        for (std::size_t i = 0; i < res_.size(); ++i) res_[i].collect("res" + std::to_string(i), p);
        for (std::size_t i = 0; i < up_.size(); ++i) up_[i].collect("up" + std::to_string(i), p);
        out_.collect("out", p);
        return p;
    }

private:
    GeneratorConfig cfg_;
    Conv<T> stem_;
    std::vector<Conv<T>> down_;
    std::vector<ResBlock<T>> res_;
    std::vector<ConvT<T>> up_;
    Conv<T> out_;
};

/// Convolutional encoder to a diagonal Gaussian: two stride-2 convs, a
/// residual block, global mean pooling and a linear map to (mu, logvar).
struct EncoderConfig {
    int in_channels = 3;
    int base = 32;
    int code_dim = 8;
    Activation activation = Activation::Leaky;
};

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = {{"kind", "gaussian_encoder"}, {"in_channels", c.in_channels}, {"base", c.base},
         {"code_dim", c.code_dim},     {"activation", to_string(c.activation)}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
    c.in_channels = j.at("in_channels");
    c.base = j.at("base");
    c.code_dim = j.at("code_dim");
    c.activation = activation_from_string(j.at("activation"));
}

template <typename T>
struct GaussianCode {
    Tensor<T> mu;      // [B, Z]
    Tensor<T> logvar;  // [B, Z]
};

template <typename T>
class GaussianEncoder {
public:
    GaussianEncoder() = default;
    GaussianEncoder(const EncoderConfig& cfg, Rng& rng)
        : cfg_(cfg), c1_(rng, cfg.in_channels, cfg.base, 4, 2, 1), c2_(rng, cfg.base, 2 * cfg.base, 4, 2, 1),
          res_(rng, 2 * cfg.base, cfg.activation), fc_(rng, 2 * cfg.base, 2 * cfg.code_dim) {}

    const EncoderConfig& config() const { return cfg_; }

    GaussianCode<T> operator()(const Tensor<T>& x) const {
        if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels) {
            throw ShapeError("encoder: expected [B," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                             to_string(x.shape()));
        }
        auto h = activate(c1_(x), cfg_.activation);
        h = activate(instance_norm(c2_(h), T(1e-5)), cfg_.activation);
        h = res_(h);
        auto out = fc_(mean(h, {2, 3}));
        return {slice(out, 1, 0, cfg_.code_dim), slice(out, 1, cfg_.code_dim, 2 * cfg_.code_dim)};
    }

    NamedParams<T> parameters() const {
        NamedParams<T> p;
        c1_.collect("conv1", p);
        c2_.collect("conv2", p);
        res_.collect("res", p);
        fc_.collect("fc", p);
        return p;
    }

private:
    EncoderConfig cfg_;
    Conv<T> c1_, c2_;
    ResBlock<T> res_;
    Linear<T> fc_;
};

enum class PatchSize { Small, Mid, Large };

inline PatchSize patch_size_from_string(const std::string& s) {
    if (s == "small") return PatchSize::Small;
    if (s == "mid") return PatchSize::Mid;
    if (s == "large") return PatchSize::Large;
    throw InvalidArgument("unknown receptive-field class '" + s + "'");
}

inline const char* to_string(PatchSize p) {
    switch (p) {
        case PatchSize::Small: return "small";
        case PatchSize::Mid: return "mid";
        case PatchSize::Large: return "large";
    }
    return "?";
}

/// (kernel, stride) of every conv, the last being the 1-channel score conv.
/// Receptive fields: small 9, mid 18, large 35 pixels.
inline std::vector<std::pair<std::int64_t, std::int64_t>> patch_layers(PatchSize p) {
    switch (p) {
        case PatchSize::Small: return {{3, 1}, {3, 2}, {3, 1}};
        case PatchSize::Mid: return {{4, 2}, {4, 2}, {3, 1}};
        case PatchSize::Large: return {{3, 2}, {3, 2}, {4, 2}, {3, 1}};
    }
    return {};
}

struct DiscriminatorConfig {
    int in_channels = 3;
    int base = 32;
    PatchSize patch = PatchSize::Mid;
};

inline void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"kind", "patch_discriminator"},
         {"in_channels", c.in_channels},
         {"base", c.base},
         {"receptive_field", to_string(c.patch)}};
}

inline void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    c.in_channels = j.at("in_channels");
    c.base = j.at("base");
    c.patch = patch_size_from_string(j.at("receptive_field"));
}

/// Fully convolutional critic emitting an unbounded score per patch.
template <typename T>
class PatchDiscriminator {
public:
    PatchDiscriminator() = default;
    PatchDiscriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
        const auto layers = patch_layers(cfg.patch);
        std::int64_t ch = cfg.in_channels;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const bool last = i + 1 == layers.size();
            const std::int64_t out = last ? 1 : static_cast<std::int64_t>(cfg.base) << std::min<std::size_t>(i, 2);
            const auto [k, s] = layers[i];
            convs_.emplace_back(rng, ch, out, k, s, 1);
            ch = out;
        }
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    std::int64_t receptive_field() const { return ngp::receptive_field(patch_layers(cfg_.patch)); }

    Tensor<T> operator()(const Tensor<T>& x) const {
        if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels) {
            throw ShapeError("discriminator: expected [B," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                             to_string(x.shape()));
        }
        auto h = x;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            h = convs_[i](h);
            if (i + 1 == convs_.size()) break;
            if (i > 0) h = instance_norm(h, T(1e-5));
            h = leaky_relu(h, T(0.2));
        }
        return h;
    }

    NamedParams<T> parameters() const {
        NamedParams<T> p;
        for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect("conv" + std::to_string(i), p);
        return p;
    }

private:
    DiscriminatorConfig cfg_;
    std::vector<Conv<T>> convs_;
};

} // namespace ngp

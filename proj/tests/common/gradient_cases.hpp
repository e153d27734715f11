#pragma once

// Random-instance gradient checks shared by the unit and acceptance suites.
// Each case draws a fresh instance from the supplied Rng and returns the worst
// grad_check error over every differentiable input of that instance.

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "ngp/losses.hpp"
#include "ngp/shading.hpp"
#include "ngp/tensor.hpp"
#include "test_util.hpp"

namespace ngp::testing {

struct GradCase {
    std::string name;
    std::function<double(Rng&)> run;
};

constexpr double kGradEps = 1e-5;

/// grad_check of `f` with respect to input `which` of `inputs`, others fixed.
inline double check_input(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
                          std::vector<Tensor<double>> inputs, std::size_t which) {
    return grad_check(
        [&](const Tensor<double>& x) {
            auto in = inputs;
            in[which] = x;
            return f(in);
        },
        inputs[which], kGradEps);
}

inline double check_all(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
                        const std::vector<Tensor<double>>& inputs) {
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) worst = std::max(worst, check_input(f, inputs, i));
    return worst;
}

inline std::vector<GradCase> primitive_grad_cases() {
    using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
    auto unary = [](std::string name, std::function<Tensor<double>(const Tensor<double>&)> op,
                    std::function<Tensor<double>(Rng&)> gen) {
        return GradCase{name, [op, gen](Rng& rng) {
                            auto x = gen(rng);
                            Fn f = [op](const std::vector<Tensor<double>>& in) { return weighted_sum(op(in[0]), 7); };
                            return check_all(f, {x});
                        }};
    };
    auto binary = [](std::string name, std::function<Tensor<double>(const Tensor<double>&, const Tensor<double>&)> op,
                     std::function<Tensor<double>(Rng&)> ga, std::function<Tensor<double>(Rng&)> gb) {
        return GradCase{name, [op, ga, gb](Rng& rng) {
                            auto a = ga(rng);
                            auto b = gb(rng);
                            Fn f = [op](const std::vector<Tensor<double>>& in) {
                                return weighted_sum(op(in[0], in[1]), 11);
                            };
                            return check_all(f, {a, b});
                        }};
    };
    auto uniform = [](Shape s, double lo = -1.0, double hi = 1.0) {
        return [s, lo, hi](Rng& rng) { return random_tensor<double>(rng, s, lo, hi); };
    };
    auto away = [](Shape s, double kink, double gap) {
        return [s, kink, gap](Rng& rng) { return random_away_from<double>(rng, s, kink, gap); };
    };

    std::vector<GradCase> cases;
    cases.push_back(binary("add", [](auto& a, auto& b) { return add(a, b); }, uniform({2, 3, 4}), uniform({3, 1})));
    cases.push_back(binary("sub", [](auto& a, auto& b) { return sub(a, b); }, uniform({2, 3, 4}), uniform({4})));
    cases.push_back(binary("mul", [](auto& a, auto& b) { return mul(a, b); }, uniform({2, 3, 4}), uniform({2, 1, 4})));
    cases.push_back(binary("div", [](auto& a, auto& b) { return div(a, b); }, uniform({2, 3, 4}),
                           uniform({3, 4}, 0.5, 2.0)));
    cases.push_back(binary("matmul", [](auto& a, auto& b) { return matmul(a, b); }, uniform({3, 4}), uniform({4, 5})));
    cases.push_back(GradCase{"conv2d", [](Rng& rng) {
                                 auto x = random_tensor<double>(rng, {2, 3, 6, 6});
                                 auto w = random_tensor<double>(rng, {4, 3, 3, 3});
                                 auto b = random_tensor<double>(rng, {4});
                                 Fn f = [](const std::vector<Tensor<double>>& in) {
                                     return weighted_sum(conv2d(in[0], in[1], in[2], 2, 1), 3);
                                 };
                                 return check_all(f, {x, w, b});
                             }});
    cases.push_back(GradCase{"transpose_conv2d", [](Rng& rng) {
                                 auto x = random_tensor<double>(rng, {2, 3, 3, 3});
                                 auto w = random_tensor<double>(rng, {3, 2, 4, 4});
                                 auto b = random_tensor<double>(rng, {2});
                                 Fn f = [](const std::vector<Tensor<double>>& in) {
                                     return weighted_sum(transpose_conv2d(in[0], in[1], in[2], 2, 1), 5);
                                 };
                                 return check_all(f, {x, w, b});
                             }});
    cases.push_back(unary("leaky_relu", [](auto& x) { return leaky_relu(x, 0.2); }, away({3, 4}, 0.0, 1e-2)));
    cases.push_back(unary("relu", [](auto& x) { return relu(x); }, away({3, 4}, 0.0, 1e-2)));
    cases.push_back(unary("tanh", [](auto& x) { return tanh(x); }, uniform({3, 4}, -2.0, 2.0)));
    cases.push_back(unary("sigmoid", [](auto& x) { return sigmoid(x); }, uniform({3, 4}, -4.0, 4.0)));
    cases.push_back(unary("exp", [](auto& x) { return exp(x); }, uniform({3, 4})));
    cases.push_back(unary("log", [](auto& x) { return log(x); }, uniform({3, 4}, 0.2, 3.0)));
    cases.push_back(binary("pow", [](auto& a, auto& b) { return pow(a, b); }, uniform({3, 4}, 0.2, 2.0),
                           uniform({3, 4}, -2.0, 4.0)));
    cases.push_back(unary("softplus", [](auto& x) { return softplus(x); }, uniform({3, 4}, -5.0, 5.0)));
    cases.push_back(unary("abs", [](auto& x) { return abs(x); }, away({3, 4}, 0.0, 1e-2)));
    cases.push_back(unary("sum", [](auto& x) { return sum(x, {1}, true); }, uniform({2, 3, 4})));
    cases.push_back(unary("mean", [](auto& x) { return mean(x, {0, 2}); }, uniform({2, 3, 4})));
    cases.push_back(binary("concat", [](auto& a, auto& b) { return concat<double>({a, b}, 1); }, uniform({2, 3, 4}),
                           uniform({2, 2, 4})));
    cases.push_back(unary("slice", [](auto& x) { return slice(x, 1, 1, 3); }, uniform({2, 4, 3})));
    cases.push_back(unary("broadcast", [](auto& x) { return broadcast(x, {2, 3, 4}); }, uniform({3, 1})));
    cases.push_back(unary("reshape", [](auto& x) { return reshape(x, {4, -1}); }, uniform({2, 3, 4})));
    cases.push_back(unary("normalize_l2_channel", [](auto& x) { return normalize_l2_channel(x); },
                          uniform({2, 3, 4, 4}, 0.1, 1.0)));
    cases.push_back(unary("instance_norm", [](auto& x) { return instance_norm(x, 1e-5); }, uniform({2, 3, 4, 4})));
    cases.push_back(unary("clamp", [](auto& x) { return clamp(x, -0.5, 0.5); },
                          [](Rng& rng) {
                              // Values kept at least 1e-2 away from both clamp bounds.
                              auto t = random_away_from<double>(rng, {3, 4}, 0.5, 1e-2, 0.4);
                              auto v = t.vec();
                              for (std::size_t i = 0; i < v.size(); i += 2) v[i] -= 1.0;
                              return Tensor<double>::from_data(t.shape(), v);
                          }));
    cases.push_back(unary("pixel_resample", [](auto& x) { return pixel_resample(x, 3, 7); }, uniform({1, 2, 5, 5})));
    return cases;
}

/// Rig of dim lights so the clamped image stays below 1.
inline LightRig dim_test_rig(Rng& rng) {
    LightRig rig;
    for (int i = 0; i < 2; ++i) {
        rig.lights.push_back({direction_from_angles(rng.uniform(-60, 60), rng.uniform(30, 80)), 0.3, {1, 0.8, 0.6}});
    }
    return rig;
}

/// Random unit normals whose cosines with every light and half vector stay at least `gap` from 0.
inline Tensor<double> kink_free_normals(Rng& rng, const Shape& shape, const LightRig& rig, const Vec3& view,
                                        double gap = 0.05) {
    const std::int64_t B = shape[0], H = shape[2], W = shape[3];
    const std::int64_t plane = H * W;
    std::vector<double> v(static_cast<std::size_t>(B * 3 * plane));
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t k = 0; k < plane; ++k) {
            Vec3 n;
            bool ok = false;
            while (!ok) {
                n = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
                if (n.norm() < 0.1) continue;
                n.normalize();
                ok = true;
                for (const auto& l : rig.lights) {
                    const Vec3 h = (l.direction + view).normalized();
                    ok = ok && std::abs(n.dot(l.direction)) > gap && std::abs(n.dot(h)) > gap;
                }
            }
            for (int c = 0; c < 3; ++c) v[static_cast<std::size_t>((b * 3 + c) * plane + k)] = n[c];
        }
    }
    return Tensor<double>::from_data(shape, std::move(v));
}

inline std::vector<GradCase> shading_grad_cases() {
    using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
    std::vector<GradCase> cases;
    cases.push_back(GradCase{"render_blinn_phong", [](Rng& rng) {
                                 const Vec3 view(0, 0, 1);
                                 auto rig = dim_test_rig(rng);
                                 auto N = kink_free_normals(rng, {2, 3, 4, 4}, rig, view);
                                 auto da = random_tensor<double>(rng, {2, 3, 4, 4}, 0.0, 1.0);
                                 auto sa = random_tensor<double>(rng, {2, 3, 4, 4}, 0.0, 1.0);
                                 auto alpha = random_tensor<double>(rng, {2, 1, 4, 4}, 1.0, 8.0);
                                 Fn f = [rig, view](const std::vector<Tensor<double>>& in) {
                                     ReflectanceMaps<double> m{in[0], in[1], in[2], in[3], {}};
                                     return weighted_sum(render_blinn_phong(m, rig, view, 0.6, 0.4), 21);
                                 };
                                 return check_all(f, {N, da, sa, alpha});
                             }});
    cases.push_back(GradCase{"render_diffuse", [](Rng& rng) {
                                 const Vec3 view(0, 0, 1);
                                 auto rig = dim_test_rig(rng);
                                 auto N = kink_free_normals(rng, {2, 3, 4, 4}, rig, view);
                                 auto da = random_tensor<double>(rng, {2, 3, 4, 4}, 0.0, 1.0);
                                 Fn f = [rig](const std::vector<Tensor<double>>& in) {
                                     return weighted_sum(render_diffuse(in[0], in[1], rig, 0.8), 22);
                                 };
                                 return check_all(f, {N, da});
                             }});
    cases.push_back(GradCase{"blend", [](Rng& rng) {
                                 // Sums kept away from the clamp bounds 0 and 1.
                                 auto a = random_tensor<double>(rng, {2, 3, 4, 4}, 0.0, 1.0);
                                 auto b = random_tensor<double>(rng, {2, 3, 4, 4}, 0.0, 1.0);
                                 auto av = a.vec(), bv = b.vec();
                                 for (std::size_t i = 0; i < av.size(); ++i) {
                                     while (std::abs(av[i] + bv[i] - 1.0) < 1e-2 || av[i] + bv[i] < 1e-2) {
                                         av[i] = rng.uniform();
                                         bv[i] = rng.uniform();
                                     }
                                 }
                                 Fn f = [](const std::vector<Tensor<double>>& in) {
                                     return weighted_sum(blend(in[0], in[1]), 23);
                                 };
                                 return check_all(f, {Tensor<double>::from_data(a.shape(), av),
                                                      Tensor<double>::from_data(b.shape(), bv)});
                             }});
    return cases;
}

inline std::vector<GradCase> loss_grad_cases() {
    using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
    auto scores = [](Rng& rng) { return random_tensor<double>(rng, {2, 1, 3, 3}, -2.0, 2.0); };
    std::vector<GradCase> cases;
    cases.push_back(GradCase{"lsgan_g_loss", [scores](Rng& rng) {
                                 Fn f = [](const std::vector<Tensor<double>>& in) { return lsgan_g_loss(in[0]); };
                                 return check_all(f, {scores(rng)});
                             }});
    cases.push_back(GradCase{"lsgan_d_loss", [scores](Rng& rng) {
                                 Fn f = [](const std::vector<Tensor<double>>& in) { return lsgan_d_loss(in[0], in[1]); };
                                 return check_all(f, {scores(rng), scores(rng)});
                             }});
    cases.push_back(GradCase{"log_g_loss", [scores](Rng& rng) {
                                 Fn f = [](const std::vector<Tensor<double>>& in) { return log_g_loss(in[0]); };
                                 return check_all(f, {scores(rng)});
                             }});
    cases.push_back(GradCase{"log_d_loss", [scores](Rng& rng) {
                                 Fn f = [](const std::vector<Tensor<double>>& in) { return log_d_loss(in[0], in[1]); };
                                 return check_all(f, {scores(rng), scores(rng)});
                             }});
    cases.push_back(GradCase{"cycle_l1", [](Rng& rng) {
                                 // b = a + offset with |offset| >= 1e-2 keeps |a - b| off its kink.
                                 auto a = random_tensor<double>(rng, {2, 3, 4, 4});
                                 auto off = random_away_from<double>(rng, a.shape(), 0.0, 1e-2);
                                 Fn f = [](const std::vector<Tensor<double>>& in) { return cycle_l1(in[0], in[1]); };
                                 return check_all(f, {a, add(a, off)});
                             }});
    cases.push_back(GradCase{"kl_gaussian", [](Rng& rng) {
                                 auto mu = random_tensor<double>(rng, {3, 8});
                                 auto lv = random_tensor<double>(rng, {3, 8}, -2.0, 1.0);
                                 Fn f = [](const std::vector<Tensor<double>>& in) { return kl_gaussian(in[0], in[1]); };
                                 return check_all(f, {mu, lv});
                             }});
    cases.push_back(GradCase{"total_2d_loss", [](Rng& rng) {
                                 // Every term is a distinct loss of the same two inputs.
                                 auto a = random_tensor<double>(rng, {1, 3, 4, 4});
                                 auto off = random_away_from<double>(rng, a.shape(), 0.0, 1e-2);
                                 Fn f = [](const std::vector<Tensor<double>>& in) {
                                     std::map<std::string, Tensor<double>> terms;
                                     int k = 0;
                                     for (const auto& name : reflectance_terms()) {
                                         auto s = mul(in[0], Tensor<double>::scalar(0.1 * ++k));
                                         if (name == "kl") terms[name] = kl_gaussian(in[0], in[1]);
                                         else if (name.rfind("adv_", 0) == 0) terms[name] = lsgan_g_loss(s);
                                         else terms[name] = cycle_l1(in[0], in[1]);
                                     }
                                     return total_2d_loss(terms).total;
                                 };
                                 return check_all(f, {a, add(a, off)});
                             }});
    return cases;
}

} // namespace ngp::testing

#include <gtest/gtest.h>

#include "gradient_cases.hpp"
#include "ngp/geometry.hpp"
#include "ngp/losses.hpp"
#include "ngp/shading.hpp"
#include "paired_sample.hpp"
#include "test_util.hpp"

namespace ngp {
namespace {

using Td = Tensor<double>;
using testing::identity_functions;
using testing::paired_sample;
using testing::random_tensor;

Td vals(std::vector<double> v) {
    const auto n = static_cast<std::int64_t>(v.size());
    return Td::from_data({n}, std::move(v));
}

TEST(Lsgan, TrivialCases) {
    EXPECT_EQ(lsgan_g_loss(Td::ones({2, 1, 3, 3})).item(), 0.0);
    EXPECT_EQ(lsgan_g_loss(Td::zeros({2, 1, 3, 3})).item(), 1.0);
    EXPECT_EQ(lsgan_d_loss(Td::ones({4}), Td::zeros({4})).item(), 0.0);
    // Both scores wrong by 1: 0.5 + 0.5.
    EXPECT_EQ(lsgan_d_loss(Td::zeros({4}), Td::ones({4})).item(), 1.0);
    EXPECT_EQ(gan_g_loss(Td::zeros({3}), GanObjective::LeastSquares).item(), 1.0);
}

TEST(LogGan, MatchesCrossEntropy) {
    EXPECT_NEAR(log_g_loss(Td::zeros({3})).item(), std::log(2.0), 1e-12);
    EXPECT_NEAR(log_d_loss(Td::zeros({3}), Td::zeros({3})).item(), 2 * std::log(2.0), 1e-12);
    const double r = 1.3, f = -0.4;
    const double sig_r = 1 / (1 + std::exp(-r)), sig_f = 1 / (1 + std::exp(-f));
    EXPECT_NEAR(log_d_loss(vals({r}), vals({f})).item(), -std::log(sig_r) - std::log(1 - sig_f), 1e-12);
    EXPECT_EQ(gan_objective_from_string("log"), GanObjective::CrossEntropy);
    EXPECT_THROW(gan_objective_from_string("wgan"), InvalidArgument);
}

TEST(CycleL1, Examples) {
    EXPECT_EQ(cycle_l1(vals({0, 0}), vals({1, 3})).item(), 2.0);
    Rng rng(1);
    auto a = random_tensor<double>(rng, {2, 3, 4});
    auto b = random_tensor<double>(rng, {2, 3, 4});
    EXPECT_EQ(cycle_l1(a, a).item(), 0.0);
    EXPECT_EQ(cycle_l1(a, b).item(), cycle_l1(b, a).item());
    EXPECT_THROW(cycle_l1(a, random_tensor<double>(rng, {2, 3, 5})), ShapeError);
}

TEST(KlGaussian, Examples) {
    EXPECT_EQ(kl_gaussian(Td::zeros({1, 8}), Td::zeros({1, 8})).item(), 0.0);
    EXPECT_EQ(kl_gaussian(vals({1.0}), vals({0.0})).item(), 0.5);
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        EXPECT_GE(kl_gaussian(random_tensor<double>(rng, {2, 4}, -3, 3), random_tensor<double>(rng, {2, 4}, -3, 3)).item(),
                  0.0);
    }
    // Batch rows are averaged: two copies of one row give that row's value.
    auto row = random_tensor<double>(rng, {1, 4}), lv = random_tensor<double>(rng, {1, 4});
    EXPECT_NEAR(kl_gaussian(concat<double>({row, row}, 0), concat<double>({lv, lv}, 0)).item(),
                kl_gaussian(row, lv).item(), 1e-12);
}

TEST(LossWeights, Defaults) {
    const LossWeights w;
    EXPECT_EQ(w.depth_cyc, 10.0);
    EXPECT_EQ(w.noc_cyc, 10.0);
    EXPECT_EQ(w.normal_cyc, 25.0);
    EXPECT_EQ(w.albedo_cyc, 25.0);
    EXPECT_EQ(w.diffuse_cyc, 25.0);
    EXPECT_EQ(w.code_cyc, 1.0);
    EXPECT_EQ(w.kl, 0.001);
    EXPECT_EQ(w.of("adv_noc"), w.adversarial);
    nlohmann::json j = w;
    EXPECT_EQ(j.get<LossWeights>().kl, 0.001);
}

TEST(ReflectanceObjective, IdentityGeneratorsCloseEveryCycle) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto p = paired_sample(seed);
        Rng rng(seed + 100);
        const auto logvar = random_tensor<double>(rng, {1, 8}, -0.5, 0.5);
        const auto fwd = reflectance_forward(identity_functions(p, logvar), p.batch, GanObjective::LeastSquares);
        for (const auto& name : reflectance_terms()) {
            ASSERT_TRUE(fwd.terms.count(name)) << name;
            if (name.rfind("cyc_", 0) == 0) EXPECT_EQ(fwd.terms.at(name).item(), 0.0) << name;
        }
        const LossWeights w;
        const auto total = total_2d_loss(fwd.terms, w);
        double expected = w.kl * kl_gaussian(p.batch.code, logvar).item();
        for (const auto& name : reflectance_terms()) {
            if (name.rfind("adv_", 0) == 0) expected += w.adversarial * fwd.terms.at(name).item();
        }
        EXPECT_NEAR(total.total.item(), expected, 1e-12);
    }
}

TEST(ReflectanceObjective, CriticTermsUseDetachedFakes) {
    const auto p = paired_sample(7);
    auto f = identity_functions(p, Td::zeros({1, 8}));
    const auto fwd = reflectance_forward(f, p.batch, GanObjective::LeastSquares);
    const auto critic = reflectance_critic_terms(f, p.batch, fwd.fakes, GanObjective::LeastSquares);
    EXPECT_EQ(critic.size(), 5u);
    for (const auto& [name, t] : critic) EXPECT_GE(t.item(), 0.0) << name;
}

std::map<std::string, Td> parametric_terms(const Td& a, const Td& b) {
    std::map<std::string, Td> terms;
    int k = 0;
    for (const auto& name : reflectance_terms()) {
        auto s = mul(a, Td::scalar(0.3 * ++k));
        if (name == "kl") terms[name] = kl_gaussian(a, b);
        else if (name.rfind("adv_", 0) == 0) terms[name] = lsgan_g_loss(s);
        else terms[name] = cycle_l1(s, b);
    }
    return terms;
}

TEST(TotalLoss, BreakdownSumsToTotal) {
    Rng rng(3);
    LossWeights w;
    w.adversarial = 0.7;
    for (int i = 0; i < 20; ++i) {
        auto terms = parametric_terms(random_tensor<double>(rng, {2, 5}), random_tensor<double>(rng, {2, 5}));
        const auto out = total_2d_loss(terms, w);
        double sum = 0.0;
        for (const auto& [name, v] : out.weighted) {
            EXPECT_EQ(v, w.of(name) * out.terms.at(name));
            sum += v;
        }
        EXPECT_EQ(out.weighted.size(), reflectance_terms().size());
        EXPECT_NEAR(sum, out.total.item(), 1e-6);
    }
}

TEST(TotalLoss, MissingTermThrows) {
    Rng rng(4);
    auto terms = parametric_terms(random_tensor<double>(rng, {2, 5}), random_tensor<double>(rng, {2, 5}));
    terms.erase("cyc_noc");
    try {
        total_2d_loss(terms);
        FAIL() << "expected MissingTermError";
    } catch (const MissingTermError& e) {
        EXPECT_EQ(e.kind(), "missing_term");
        EXPECT_NE(std::string(e.what()).find("cyc_noc"), std::string::npos);
    }
}

TEST(TotalLoss, ZeroWeightRemovesTermGradientExactly) {
    Rng rng(5);
    for (const auto& dropped : reflectance_terms()) {
        auto a = random_tensor<double>(rng, {2, 5}, -1, 1, true);
        auto b = random_tensor<double>(rng, {2, 5}, -1, 1, true);
        LossWeights w;
        auto weight = [&](const std::string& n) { return n == dropped ? 0.0 : w.of(n); };
        const auto zeroed = weighted_total<double>(parametric_terms(a, b), reflectance_terms(), weight);
        std::vector<std::string> without;
        for (const auto& n : reflectance_terms()) {
            if (n != dropped) without.push_back(n);
        }
        const auto reference = weighted_total<double>(parametric_terms(a, b), without, weight);
        const auto g1 = backward(zeroed.total);
        const auto g2 = backward(reference.total);
        EXPECT_EQ(zeroed.total.item(), reference.total.item()) << dropped;
        EXPECT_EQ(g1.of(a).vec(), g2.of(a).vec()) << dropped;
        EXPECT_EQ(g1.of(b).vec(), g2.of(b).vec()) << dropped;
    }
}

TEST(SpecularLoss, WeightsAndBreakdown) {
    std::map<std::string, Td> terms{{"adv_image", Td::scalar(0.4)}, {"cyc_despec", Td::scalar(0.1)}};
    const auto out = total_specular_loss(terms);
    EXPECT_NEAR(out.total.item(), 0.4 + 25 * 0.1, 1e-12);
    terms.erase("adv_image");
    EXPECT_THROW(total_specular_loss(terms), MissingTermError);
}

TEST(GradCheck, EveryLoss) {
    for (const auto& c : testing::loss_grad_cases()) {
        Rng rng(Rng::derive(77, std::hash<std::string>{}(c.name) & 0xffff));
        for (int trial = 0; trial < 10; ++trial) EXPECT_LT(c.run(rng), 1e-6) << c.name;
    }
}

} // namespace
} // namespace ngp

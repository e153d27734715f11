#include <gtest/gtest.h>

#include <filesystem>

#include "gradient_cases.hpp"
#include "ngp/tensor.hpp"
#include "test_util.hpp"

namespace ngp {
namespace {

using testing::random_tensor;
using Td = Tensor<double>;
using Tf = Tensor<float>;

TEST(Tensor, ShapeMustMatchPayload) {
    EXPECT_THROW(Tf::from_data({2, 3}, std::vector<float>(5)), ShapeError);
    auto t = Tf::zeros({2, 3, 4});
    EXPECT_EQ(t.numel(), 24);
    EXPECT_EQ(t.data().size(), 24u);
}

TEST(Primitives, MatmulIdentity) {
    auto eye = Td::from_data({2, 2}, {1, 0, 0, 1});
    auto m = Td::from_data({2, 2}, {5, 6, 7, 8});
    auto y = apply_primitive<double>("matmul", {eye, m});
    EXPECT_EQ(y.vec(), (std::vector<double>{5, 6, 7, 8}));
}

TEST(Primitives, Conv2dIdentityKernel) {
    Rng rng(3);
    auto img = random_tensor<float>(rng, {1, 1, 5, 7});
    auto w = Tf::ones({1, 1, 1, 1});
    auto y = apply_primitive<float>("conv2d", {img, w}, {{"stride", std::int64_t{1}}});
    EXPECT_EQ(y.shape(), img.shape());
    EXPECT_EQ(y.vec(), img.vec());
}

TEST(Primitives, MeanOfTwoByTwo) {
    auto x = Td::from_data({2, 2}, {1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(apply_primitive<double>("mean", {x}).item(), 2.5);
}

TEST(Primitives, ShapeMismatchNamesPrimitiveAndExtents) {
    auto a = Td::zeros({2, 3});
    auto b = Td::zeros({4, 5});
    try {
        apply_primitive<double>("matmul", {a, b});
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("matmul"), std::string::npos);
        EXPECT_NE(msg.find("[2,3]"), std::string::npos);
        EXPECT_NE(msg.find("[4,5]"), std::string::npos);
    }
    EXPECT_THROW(add(Td::zeros({2, 3}), Td::zeros({2, 4})), ShapeError);
    EXPECT_THROW(conv2d(Td::zeros({1, 2, 4, 4}), Td::zeros({1, 3, 3, 3})), ShapeError);
}

TEST(Primitives, UnknownPrimitive) {
    EXPECT_THROW(apply_primitive<double>("fft", {Td::zeros({2})}), UnknownPrimitiveError);
}

TEST(Primitives, EveryListedNameDispatches) {
    // Dispatch must not report any advertised name as unknown.
    for (const auto& name : primitive_names()) {
        try {
            apply_primitive<double>(name, {});
        } catch (const UnknownPrimitiveError&) {
            ADD_FAILURE() << name;
        } catch (const Error&) {
        }
    }
}

TEST(Primitives, BroadcastTrailingAlignment) {
    auto a = Td::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Td::from_data({3}, {10, 20, 30});
    EXPECT_EQ(add(a, b).vec(), (std::vector<double>{11, 22, 33, 14, 25, 36}));
    auto c = Td::from_data({2, 1}, {100, 200});
    EXPECT_EQ(add(a, c).vec(), (std::vector<double>{101, 102, 103, 204, 205, 206}));
    EXPECT_EQ(broadcast(c, {2, 3}).vec(), (std::vector<double>{100, 100, 100, 200, 200, 200}));
    EXPECT_THROW(broadcast(a, {3, 3}), ShapeError);
}

TEST(Primitives, TransposeConvDoublesExtent) {
    auto x = Tf::ones({1, 2, 4, 4});
    auto w = Tf::ones({2, 3, 4, 4});
    auto y = transpose_conv2d(x, w, 2, 1);
    EXPECT_EQ(y.shape(), (Shape{1, 3, 8, 8}));
}

TEST(Primitives, TransposeConvIsAdjointOfConv) {
    // <conv(x), y> == <x, convT(y)> with the same weights.
    Rng rng(5);
    auto x = random_tensor<double>(rng, {1, 3, 8, 8});
    auto w = random_tensor<double>(rng, {4, 3, 4, 4});
    auto y = random_tensor<double>(rng, {1, 4, 4, 4});
    const double lhs = sum(mul(conv2d(x, w, 2, 1), y)).item();
    const double rhs = sum(mul(x, transpose_conv2d(y, w, 2, 1))).item();
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Primitives, InstanceNormStandardizes) {
    Rng rng(2);
    auto x = random_tensor<double>(rng, {2, 3, 5, 5}, -3, 7);
    auto y = instance_norm(x, 1e-5);
    auto m = mean(y, {2, 3});
    for (double v : m.vec()) EXPECT_NEAR(v, 0.0, 1e-12);
    auto var = mean(mul(y, y), {2, 3});
    for (double v : var.vec()) EXPECT_NEAR(v, 1.0, 1e-3);
}

TEST(Primitives, NormalizeL2ChannelGivesUnitNorm) {
    Rng rng(4);
    auto x = random_tensor<float>(rng, {2, 3, 6, 6});
    auto y = normalize_l2_channel(x);
    auto n = sum(mul(y, y), {1});
    for (float v : n.vec()) EXPECT_NEAR(v, 1.0f, 1e-5f);
}

TEST(Primitives, PixelResampleIdentityAndConstant) {
    Rng rng(8);
    auto x = random_tensor<double>(rng, {1, 2, 6, 5});
    EXPECT_EQ(pixel_resample(x, 6, 5).vec(), x.vec());
    auto c = Td::full({1, 1, 7, 9}, 0.25);
    auto small = pixel_resample(c, 3, 4);
    for (double v : small.vec()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Primitives, ConcatSliceRoundTrip) {
    Rng rng(9);
    auto a = random_tensor<double>(rng, {2, 3, 2});
    auto b = random_tensor<double>(rng, {2, 1, 2});
    auto c = concat<double>({a, b}, 1);
    EXPECT_EQ(slice(c, 1, 0, 3).vec(), a.vec());
    EXPECT_EQ(slice(c, 1, 3, 4).vec(), b.vec());
    EXPECT_THROW(slice(c, 1, 2, 5), ShapeError);
}

TEST(Backward, ProductRule) {
    auto x = Td::scalar(3.0, true);
    auto y = Td::scalar(4.0, true);
    auto g = backward(mul(x, y));
    EXPECT_DOUBLE_EQ(g.of(x).item(), 4.0);
    EXPECT_DOUBLE_EQ(g.of(y).item(), 3.0);
}

TEST(Backward, ReluGate) {
    auto x = Td::from_data({2}, {-1.0, 2.0}, true);
    auto g = backward(sum(relu(x)));
    EXPECT_EQ(g.of(x).vec(), (std::vector<double>{0.0, 1.0}));
}

TEST(Backward, SigmoidAtZero) {
    auto x = Td::scalar(0.0, true);
    auto y = sigmoid(x);
    EXPECT_DOUBLE_EQ(y.item(), 0.5);
    EXPECT_DOUBLE_EQ(backward(y).of(x).item(), 0.25);
}

TEST(Backward, NonScalarLossRejected) {
    auto x = Td::from_data({2}, {1, 2}, true);
    EXPECT_THROW(backward(mul(x, x)), ShapeError);
}

TEST(Backward, UntouchedLeafGetsZero) {
    auto x = Td::from_data({3}, {1, 2, 3}, true);
    auto unused = Td::from_data({2, 2}, {1, 2, 3, 4}, true);
    auto g = backward(sum(x));
    EXPECT_FALSE(g.contains(unused));
    EXPECT_EQ(g.of(unused).vec(), std::vector<double>(4, 0.0));
}

TEST(Backward, SharedSubexpressionAccumulates) {
    auto x = Td::scalar(2.0, true);
    auto y = mul(x, x);
    auto z = add(y, y);  // 2x^2 -> 4x
    EXPECT_DOUBLE_EQ(backward(z).of(x).item(), 8.0);
}

TEST(Backward, NoGradGuardSkipsRecording) {
    auto x = Td::scalar(2.0, true);
    NoGradGuard guard;
    auto y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
}

TEST(Tape, InputsPrecedeConsumers) {
    Rng rng(1);
    auto x = random_tensor<double>(rng, {1, 2, 4, 4}, -1, 1, true);
    auto w = random_tensor<double>(rng, {3, 2, 3, 3}, -1, 1, true);
    auto y = sum(tanh(instance_norm(conv2d(x, w, 1, 1), 1e-5)));
    auto entries = Tape<double>::record(y).entries();
    ASSERT_FALSE(entries.empty());
    std::unordered_map<std::uint64_t, std::size_t> position;
    for (std::size_t i = 0; i < entries.size(); ++i) position[entries[i].output_id] = i;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (auto in : entries[i].input_ids) {
            auto it = position.find(in);
            if (it != position.end()) EXPECT_LT(it->second, i);
        }
    }
    EXPECT_EQ(entries.back().output_id, y.id());
}

TEST(GradCheck, Quadratic) {
    auto x = Td::scalar(3.0);
    const double err = grad_check([](const Td& v) { return mul(v, v); }, x, 1e-5);
    EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, ConstantFunction) {
    auto x = Td::from_data({3}, {1, 2, 3});
    const double err = grad_check([](const Td&) { return Td::scalar(5.0); }, x, 1e-5);
    EXPECT_EQ(err, 0.0);
}

TEST(GradCheck, NonFiniteRejected) {
    auto x = Td::scalar(-1.0);
    EXPECT_THROW(grad_check([](const Td& v) { return log(v); }, x, 1e-5), NonFiniteError);
    EXPECT_THROW(grad_check([](const Td& v) { return v; }, x, 0.0), InvalidArgument);
}

TEST(GradCheck, EveryPrimitiveOnRandomInputs) {
    for (const auto& c : testing::primitive_grad_cases()) {
        Rng rng(Rng::derive(2024, std::hash<std::string>{}(c.name) & 0xffff));
        for (int trial = 0; trial < 10; ++trial) {
            EXPECT_LT(c.run(rng), 1e-6) << c.name << " trial " << trial;
        }
    }
}

TEST(Backward, Linearity) {
    // grad(a f + b g) == a grad f + b grad g
    Rng rng(12);
    auto x = random_tensor<double>(rng, {1, 2, 5, 5}, -1, 1, true);
    auto w = random_tensor<double>(rng, {3, 2, 3, 3});
    auto f = [&](const Td& v) { return sum(tanh(conv2d(v, w, 1, 1))); };
    auto g = [&](const Td& v) { return mean(mul(v, sigmoid(v))); };
    const double a = 1.7, b = -0.3;
    auto gf = backward(f(x)).of(x).vec();
    auto gg = backward(g(x)).of(x).vec();
    auto gc = backward(add(mul(Td::scalar(a), f(x)), mul(Td::scalar(b), g(x)))).of(x).vec();
    for (std::size_t i = 0; i < gc.size(); ++i) EXPECT_NEAR(gc[i], a * gf[i] + b * gg[i], 1e-6);
}

TEST(Backward, Deterministic) {
    auto run = [] {
        Rng rng(77);
        auto x = random_tensor<float>(rng, {1, 3, 8, 8}, -1, 1, true);
        auto w = random_tensor<float>(rng, {4, 3, 3, 3}, -1, 1, true);
        auto y = mean(leaky_relu(instance_norm(conv2d(x, w, 2, 1), 1e-5f), 0.2f));
        auto g = backward(y);
        auto out = g.of(w).vec();
        out.push_back(y.item());
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Serialize, RoundTripIsBitExact) {
    Rng rng(6);
    auto t = random_tensor<float>(rng, {2, 3, 4});
    auto dir = std::filesystem::temp_directory_path() / "ngp_tensor_test";
    save_tensor(dir / "t", t);
    auto back = load_tensor<float>(dir / "t");
    EXPECT_EQ(back.shape(), t.shape());
    EXPECT_EQ(back.vec(), t.vec());
    auto d = random_tensor<double>(rng, {5});
    save_tensor(dir / "d", d, DType::Float64);
    EXPECT_EQ(load_tensor<double>(dir / "d").vec(), d.vec());
    EXPECT_THROW(load_tensor<float>(dir / "missing"), IoError);
    std::filesystem::remove_all(dir);
}

} // namespace
} // namespace ngp

#include <doctest.h>

#include <cmath>

#include "avth/tensor.hpp"
#include "avth/training.hpp"
#include "avth/util.hpp"

using namespace avth;
using nn::Tensor;
using nn::Var;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.v) v = rng.normal(0.0, scale);
    return t;
}

// Finite-difference check of a scalar graph against backprop for every
// coordinate of every listed leaf.
double full_grad_check(const std::function<Var()>& fn, const std::vector<Var>& leaves,
                       double h = 1e-6) {
    Var root = fn();
    for (const Var& l : leaves) zero_grad(l);
    nn::backward(root);
    double worst = 0;
    for (const Var& l : leaves) {
        for (size_t i = 0; i < l->val.size(); ++i) {
            double saved = l->val[i];
            l->val[i] = saved + h;
            double fp = fn()->val[0];
            l->val[i] = saved - h;
            double fm = fn()->val[0];
            l->val[i] = saved;
            double fd = (fp - fm) / (2 * h);
            double an = l->grad.v.empty() ? 0.0 : l->grad[i];
            worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0}));
        }
        zero_grad(l);
    }
    return worst;
}

}  // namespace

TEST_CASE("elementwise and reduction gradients match finite differences") {
    Rng rng(1);
    Var a = nn::leaf(random_tensor({3, 4}, rng));
    Var b = nn::leaf(random_tensor({3, 4}, rng));
    auto fn = [&] {
        Var t = nn::tanh_(nn::mul(nn::add(a, b), nn::sub(a, b)));
        Var s = nn::sigmoid_(nn::scale(t, 0.7));
        return nn::mean(nn::mul(s, nn::add_scalar(a, 0.3)));
    };
    CHECK(full_grad_check(fn, {a, b}) < 1e-7);
}

TEST_CASE("matmul family gradients match finite differences") {
    Rng rng(2);
    Var a = nn::leaf(random_tensor({3, 5}, rng));
    Var b = nn::leaf(random_tensor({5, 2}, rng));
    Var c = nn::leaf(random_tensor({4, 5}, rng));
    Var bias = nn::leaf(random_tensor({2}, rng));
    auto fn = [&] {
        Var m = nn::add_rowvec(nn::matmul(a, b), bias);       // [3,2]
        Var n = nn::matmul_nt(a, c);                          // [3,4]
        return nn::add(nn::sum(nn::mul(m, m)), nn::mean(nn::tanh_(n)));
    };
    CHECK(full_grad_check(fn, {a, b, c, bias}) < 1e-7);
}

TEST_CASE("softmax rows sum to one and its gradient is correct") {
    Rng rng(3);
    Var a = nn::leaf(random_tensor({4, 6}, rng, 2.0));
    Var w = nn::constant(random_tensor({4, 6}, rng));
    Var s = nn::softmax_rows(a);
    for (int r = 0; r < 4; ++r) {
        double sum = 0;
        for (int c = 0; c < 6; ++c) sum += s->val[r * 6 + c];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto fn = [&] { return nn::sum(nn::mul(nn::softmax_rows(a), w)); };
    CHECK(full_grad_check(fn, {a}) < 1e-7);
}

TEST_CASE("l2_normalize emits unit vectors with correct gradients") {
    Rng rng(4);
    Var a = nn::leaf(random_tensor({7}, rng));
    Var w = nn::constant(random_tensor({7}, rng));
    Var n = nn::l2_normalize(a);
    double norm = 0;
    for (double v : n->val.v) norm += v * v;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
    auto fn = [&] { return nn::dot(nn::l2_normalize(a), w); };
    CHECK(full_grad_check(fn, {a}) < 1e-7);
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(5);
    Var x = nn::leaf(random_tensor({2, 6, 6}, rng));
    Var w = nn::leaf(random_tensor({3, 2, 3, 3}, rng, 0.5));
    Var b = nn::leaf(random_tensor({3}, rng, 0.1));
    for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{2, 0}}) {
        auto fn = [&, stride = stride, pad = pad] {
            return nn::mean(nn::tanh_(nn::conv2d(x, w, b, stride, pad)));
        };
        CHECK(full_grad_check(fn, {x, w, b}) < 1e-7);
    }
}

TEST_CASE("conv_transpose2d gradients match finite differences") {
    Rng rng(6);
    Var x = nn::leaf(random_tensor({2, 4, 4}, rng));
    Var w = nn::leaf(random_tensor({2, 3, 4, 4}, rng, 0.5));
    Var b = nn::leaf(random_tensor({3}, rng, 0.1));
    auto fn = [&] { return nn::mean(nn::tanh_(nn::conv_transpose2d(x, w, b, 2, 1))); };
    CHECK(full_grad_check(fn, {x, w, b}) < 1e-7);
    Var out = nn::conv_transpose2d(x, w, b, 2, 1);
    CHECK(out->val.shape == std::vector<int>{3, 8, 8});
}

TEST_CASE("structure ops keep gradients intact") {
    Rng rng(7);
    Var a = nn::leaf(random_tensor({2, 4, 4}, rng));
    Var b = nn::leaf(random_tensor({3, 4, 4}, rng));
    Var t = nn::leaf(random_tensor({6, 4}, rng));
    auto fn = [&] {
        Var c = nn::concat_ch(a, b);                 // [5,4,4]
        Var crop = nn::crop_hw(c, 1, 1, 2, 3);       // [5,2,3]
        Var pooled = nn::adaptive_avgpool(crop, 2, 2);
        Var rows = nn::avgpool_rows2(nn::sub_colmean(t));
        Var tr = nn::transpose2d(rows);
        return nn::add(nn::mean(pooled), nn::sum(nn::mul(tr, tr)));
    };
    CHECK(full_grad_check(fn, {a, b, t}) < 1e-7);
}

TEST_CASE("clamp passes gradient only inside the range") {
    Var x = nn::leaf(Tensor::from({3}, {-2.0, 0.25, 3.0}));
    Var y = nn::sum(nn::clamp_(x, 0.0, 1.0));
    nn::backward(y);
    CHECK(x->grad[0] == 0.0);
    CHECK(x->grad[1] == 1.0);
    CHECK(x->grad[2] == 0.0);
}

TEST_CASE("backward demands a scalar root and reshape checks counts") {
    Var x = nn::leaf(Tensor({2, 2}));
    CHECK_THROWS_AS(nn::backward(x), ShapeError);
    CHECK_THROWS_AS(nn::reshape(x, {3, 2}), ShapeError);
    Var y = nn::leaf(Tensor({2, 3}));
    CHECK_THROWS_AS(nn::add(x, y), ShapeError);
    CHECK_THROWS_AS(nn::matmul(y, x), ShapeError);
}

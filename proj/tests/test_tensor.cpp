#include <doctest.h>

#include <stdexcept>

#include "msfum/ops.hpp"
#include "msfum/tensor.hpp"

using namespace msfum;

TEST_CASE("tensor shape and data agree") {
    TensorF t = TensorF::zeros({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.shape() == std::vector<int64_t>{2, 3, 4});
    CHECK_THROWS_AS(TensorF::from_data({2, 2}, {1.0f, 2.0f, 3.0f}), std::invalid_argument);
}

TEST_CASE("grad buffer exists iff requires_grad") {
    TensorF t = TensorF::zeros({4});
    CHECK_THROWS_AS(t.grad(), std::invalid_argument);
    t.set_requires_grad(true);
    CHECK(t.grad().size() == 4);
    t.set_requires_grad(false);
    CHECK_THROWS_AS(t.grad(), std::invalid_argument);
}

TEST_CASE("backward of sum gives all-ones") {
    TensorF x = TensorF::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    backward(sum(x));
    for (float g : x.grad()) CHECK(g == 1.0f);
}

TEST_CASE("backward of sum of squares") {
    TensorF x = TensorF::from_data({2}, {1.0f, 2.0f}, true);
    backward(sum(mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    TensorF x = TensorF::from_data({2}, {1.0f, 2.0f}, true);
    TensorF y = mul(x, x);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("backward called twice doubles every grad exactly") {
    Rng rng(3);
    TensorF x = TensorF::uniform({3, 4}, rng, -1, 1, true);
    TensorF w = TensorF::uniform({5, 4}, rng, -1, 1, true);
    TensorF b = TensorF::uniform({5}, rng, -1, 1, true);
    TensorF loss = sum(silu(linear(x, w, b)));
    backward(loss);
    const auto gx1 = x.grad();
    const auto gw1 = w.grad();
    backward(loss);
    for (size_t i = 0; i < gx1.size(); ++i) CHECK(x.grad()[i] == 2.0f * gx1[i]);
    for (size_t i = 0; i < gw1.size(); ++i) CHECK(w.grad()[i] == 2.0f * gw1[i]);
}

TEST_CASE("grad does not flow into constants") {
    TensorF x = TensorF::from_data({2}, {1.0f, 2.0f}, true);
    TensorF c = TensorF::from_data({2}, {3.0f, 4.0f});
    TensorF loss = sum(mul(x, c));
    backward(loss);
    CHECK(x.grad()[0] == 3.0f);
    CHECK(x.grad()[1] == 4.0f);
    CHECK_FALSE(c.requires_grad());
}

TEST_CASE("no tape is recorded under NoGradGuard") {
    TensorF x = TensorF::from_data({2}, {1.0f, 2.0f}, true);
    NoGradGuard ng;
    TensorF y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("zero_grad clears accumulation") {
    TensorF x = TensorF::from_data({2}, {1.0f, 2.0f}, true);
    backward(sum(mul(x, x)));
    x.zero_grad();
    for (float g : x.grad()) CHECK(g == 0.0f);
}

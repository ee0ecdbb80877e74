#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mtc/ops.hpp"
#include "mtc/rng.hpp"
#include "mtc/tensor.hpp"

using namespace mtc;

TEST_CASE("tensor basics: shape, fill, element access") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.rank() == 2);
    CHECK(t.numel() == 6);
    CHECK(t.extent(1) == 3);
    CHECK(t.at(5) == 1.5);
    CHECK_THROWS_AS(t.at(6), ShapeError);
    CHECK_THROWS_AS(t.extent(2), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS((void)Tensor().numel(), ValueError);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(t.item(), ShapeError);
    CHECK(Tensor::scalar(4.25).item() == 4.25);
}

TEST_CASE("copies alias storage; clone does not") {
    Tensor a({4}, 0.0);
    Tensor b = a;
    b.at(2) = 9.0;
    CHECK(a.at(2) == 9.0);
    CHECK(a.same_storage(b));
    Tensor c = a.clone();
    c.at(2) = -1.0;
    CHECK(a.at(2) == 9.0);
    CHECK_FALSE(a.same_storage(c));
}

TEST_CASE("grad buffers allocate lazily and zero on demand") {
    Tensor t({3}, 2.0);
    CHECK_FALSE(t.has_grad());
    t.grad()[1] = 5.0;
    CHECK(t.has_grad());
    CHECK(t.grad_values() == std::vector<double>{0.0, 5.0, 0.0});
    t.zero_grad();
    CHECK(t.grad_values() == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("tape backward accumulates through a small graph") {
    Tensor x = Tensor::from_data({3}, {1.0, -2.0, 3.0}).set_requires_grad(true);
    Tensor w = Tensor::from_data({3}, {0.5, 0.25, -1.0}).set_requires_grad(true);
    Tape tape;
    Tensor loss;
    {
        Tape::Scope scope(tape);
        loss = ops::sum(ops::mul(x, w));
    }
    tape.backward(loss);
    CHECK(loss.item() == doctest::Approx(0.5 - 0.5 - 3.0));
    CHECK(x.grad()[0] == 0.5);
    CHECK(x.grad()[1] == 0.25);
    CHECK(x.grad()[2] == -1.0);
    CHECK(w.grad()[0] == 1.0);
    CHECK(w.grad()[1] == -2.0);
    CHECK(w.grad()[2] == 3.0);
}

TEST_CASE("a tensor used m times linearly gets grad m") {
    Tensor x({4}, 1.0);
    x.set_requires_grad(true);
    Tape tape;
    Tensor loss;
    {
        Tape::Scope scope(tape);
        Tensor three = ops::add(ops::add(x, x), x);
        loss = ops::sum(three);
    }
    tape.backward(loss);
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == 3.0);
}

TEST_CASE("backward twice on one tape is an error") {
    Tensor x({2}, 1.0);
    x.set_requires_grad(true);
    Tape tape;
    Tensor loss;
    {
        Tape::Scope scope(tape);
        loss = ops::sum(x);
    }
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ValueError);
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x({2}, 1.0);
    x.set_requires_grad(true);
    Tape tape;
    Tensor y;
    {
        Tape::Scope scope(tape);
        y = ops::add(x, x);
    }
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("no recording happens without an active tape") {
    Tensor x({2}, 1.0);
    x.set_requires_grad(true);
    Tensor y = ops::add(x, x);
    CHECK(y.at(0) == 2.0);
    Tape tape;
    CHECK(tape.size() == 0);
}

TEST_CASE("ops on non-grad tensors record nothing") {
    Tensor x({2}, 1.0);
    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor y = ops::mul(x, x);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(tape.size() == 0);
}

TEST_CASE("identical seeds give bit-identical graph runs") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor x({1, 2, 6, 6});
        for (auto& v : x.values()) v = rng.normal();
        Tensor w({3, 2, 3, 3});
        for (auto& v : w.values()) v = rng.normal(0.0, 0.01);
        Tensor b({3}, 0.0);
        x.set_requires_grad(true);
        w.set_requires_grad(true);
        b.set_requires_grad(true);
        Tape tape;
        Tensor loss;
        {
            Tape::Scope scope(tape);
            loss = ops::sum(ops::relu(ops::conv2d(x, w, b, 2)));
        }
        tape.backward(loss);
        std::vector<double> out = {loss.item()};
        out.insert(out.end(), w.grad_values().begin(), w.grad_values().end());
        out.insert(out.end(), x.grad_values().begin(), x.grad_values().end());
        return out;
    };
    CHECK(run(42) == run(42));
}

TEST_CASE("rng streams are reproducible and shaped sanely") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    Rng c(8);
    double mean = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) mean += c.normal();
    mean /= n;
    CHECK(std::fabs(mean) < 0.05);
    double lo = 1.0, hi = 0.0;
    Rng d(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = d.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(lo < 0.05);
    CHECK(hi > 0.95);
}

#include <doctest.h>

#include "datarater/tensor.hpp"

using namespace dr;

TEST_CASE("matmul against identity returns the operand") {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor y = kern::matmul(eye, x);
    CHECK(kern::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("matmul small case") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = kern::matmul(a, b);
    CHECK(c.at(0, 0) == 58);
    CHECK(c.at(0, 1) == 64);
    CHECK(c.at(1, 0) == 139);
    CHECK(c.at(1, 1) == 154);
}

TEST_CASE("matmul shape mismatch throws") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(kern::matmul(a, b), Error);
}

TEST_CASE("softmax of constant vector is uniform for any constant") {
    for (double c : {-7.5, 0.0, 3.25}) {
        Tensor x = Tensor::full({3}, c);
        Tensor s = kern::softmax(x, 0);
        for (int i = 0; i < 3; ++i) CHECK(s.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    }
}

TEST_CASE("log(exp(x)) inverse pair") {
    Tensor x = Tensor::scalar(0.7);
    Tensor y = kern::log(kern::exp(x));
    CHECK(std::abs(y.item() - 0.7) <= 1e-12);
}

TEST_CASE("broadcast and reduce are inverse in shape") {
    Tensor x = Tensor::from({2, 1}, {3, 4});
    Tensor big = kern::broadcast_to(x, {2, 3});
    CHECK(big.at(0, 2) == 3);
    CHECK(big.at(1, 0) == 4);
    Tensor back = kern::reduce_to(big, {2, 1});
    CHECK(back.at(0) == 9);
    CHECK(back.at(1) == 12);
}

TEST_CASE("cumsum and rev_cumsum") {
    Tensor x = Tensor::from({1, 4, 1}, {1, 2, 3, 4});
    Tensor c = kern::cumsum(x, 1);
    CHECK(c.vec() == std::vector<double>{1, 3, 6, 10});
    Tensor r = kern::rev_cumsum(x, 1);
    CHECK(r.vec() == std::vector<double>{10, 9, 7, 4});
}

TEST_CASE("logsumexp is stable for large inputs") {
    Tensor x = Tensor::from({1, 2}, {1000.0, 1000.0});
    Tensor l = kern::logsumexp(x, 1);
    CHECK(l.item() == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("gather and scatter rows") {
    Tensor t = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor g = kern::gather_rows(t, {2, 0, 2});
    CHECK(g.at(0, 0) == 5);
    CHECK(g.at(2, 1) == 6);
    Tensor s = kern::scatter_rows(g, {2, 0, 2}, 3);
    CHECK(s.at(2, 0) == 10); // two contributions accumulate
    CHECK(s.at(1, 0) == 0);
}

TEST_CASE("pick and scatter_pick") {
    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor p = kern::pick(x, {2, 0});
    CHECK(p.vec() == std::vector<double>{3, 4});
    Tensor s = kern::scatter_pick(p, {2, 0}, {2, 3});
    CHECK(s.at(0, 2) == 3);
    CHECK(s.at(1, 0) == 4);
    CHECK(s.at(0, 0) == 0);
}

TEST_CASE("rng determinism and fork independence") {
    Rng a(42), b(42);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(42);
    Rng f1 = c.fork(1);
    Rng f2 = c.fork(2);
    CHECK(f1.next_u64() != f2.next_u64());
}

TEST_CASE("rng uniform range and normal moments") {
    Rng r(7);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

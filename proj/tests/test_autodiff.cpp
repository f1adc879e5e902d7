#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "mvs/autodiff.hpp"
#include "mvs/rng.hpp"

using namespace mvs;

namespace {

ad::Tensor random_tensor(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    ad::Tensor t(r, c);
    for (double& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

// central finite differences of a scalar function of one leaf tensor
ad::Tensor fd_grad(const std::function<double(const ad::Tensor&)>& f, ad::Tensor x,
                   double h = 1e-6) {
    ad::Tensor g(x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        double orig = x.v[i];
        x.v[i] = orig + h;
        double up = f(x);
        x.v[i] = orig - h;
        double dn = f(x);
        x.v[i] = orig;
        g.v[i] = (up - dn) / (2.0 * h);
    }
    return g;
}

void check_close(const ad::Tensor& a, const ad::Tensor& b, double tol = 1e-5) {
    REQUIRE(a.rows == b.rows);
    REQUIRE(a.cols == b.cols);
    for (std::size_t i = 0; i < a.v.size(); ++i)
        CHECK(a.v[i] == doctest::Approx(b.v[i]).epsilon(tol).scale(1.0));
}

// builds a scalar graph from a single input leaf and checks backward vs FD
void check_grad(const std::function<int(ad::Tape&, int)>& build, const ad::Tensor& x0,
                double tol = 1e-5) {
    ad::Tape tape;
    int x = tape.leaf(x0, true);
    int loss = build(tape, x);
    tape.backward(loss);
    REQUIRE(tape.has_grad(x));
    auto fd = fd_grad(
        [&](const ad::Tensor& xv) {
            ad::Tape t2;
            int x2 = t2.leaf(xv, false);
            return t2.value(build(t2, x2)).v[0];
        },
        x0);
    check_close(tape.grad(x), fd, tol);
}

}  // namespace

TEST_CASE("forward values of basic ops") {
    ad::Tape tape;
    ad::Tensor a(2, 2);
    a.v = {1, 2, 3, 4};
    ad::Tensor b(2, 2);
    b.v = {5, 6, 7, 8};
    int ia = tape.constant(a), ib = tape.constant(b);
    CHECK(tape.value(tape.add(ia, ib)).v == std::vector<double>{6, 8, 10, 12});
    CHECK(tape.value(tape.sub(ib, ia)).v == std::vector<double>{4, 4, 4, 4});
    CHECK(tape.value(tape.mul(ia, ib)).v == std::vector<double>{5, 12, 21, 32});
    CHECK(tape.value(tape.scale(ia, 2.0)).v == std::vector<double>{2, 4, 6, 8});
    CHECK(tape.value(tape.add_const(ia, 1.0)).v == std::vector<double>{2, 3, 4, 5});
    CHECK(tape.value(tape.matmul(ia, ib)).v == std::vector<double>{19, 22, 43, 50});
    CHECK(tape.value(tape.reduce_sum(ia)).v[0] == 10.0);
}

TEST_CASE("row broadcast add") {
    ad::Tape tape;
    ad::Tensor a(2, 3);
    a.v = {1, 2, 3, 4, 5, 6};
    ad::Tensor r(1, 3);
    r.v = {10, 20, 30};
    int s = tape.add(tape.constant(a), tape.constant(r));
    CHECK(tape.value(s).v == std::vector<double>{11, 22, 33, 14, 25, 36});
}

TEST_CASE("shape mismatches throw") {
    ad::Tape tape;
    int a = tape.constant(ad::Tensor(2, 3));
    int b = tape.constant(ad::Tensor(3, 2));
    CHECK_THROWS_AS(tape.add(a, b), ad::ShapeMismatch);
    CHECK_THROWS_AS(tape.sub(a, b), ad::ShapeMismatch);
    CHECK_THROWS_AS(tape.mul(a, b), ad::ShapeMismatch);
    CHECK_THROWS_AS(tape.matmul(a, a), ad::ShapeMismatch);
    CHECK_THROWS_AS(tape.reshape(a, 4, 2), ad::ShapeMismatch);
    CHECK_THROWS_AS(tape.backward(a), ad::NotScalar);
}

TEST_CASE("gradients match finite differences per op") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        ad::Tensor x = random_tensor(3, 4, rng);
        ad::Tensor w = random_tensor(4, 2, rng);
        ad::Tensor y = random_tensor(3, 4, rng);
        ad::Tensor row = random_tensor(1, 4, rng);

        check_grad([&](ad::Tape& t, int xn) { return t.reduce_sum(t.scale(xn, 3.5)); }, x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.mul(xn, t.constant(y)));
            },
            x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.matmul(xn, t.constant(w)));
            },
            x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.matmul(t.constant(x), xn));
            },
            w);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.tanh_(t.add(xn, t.constant(row))));
            },
            x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.relu(t.sub(xn, t.constant(y))));
            },
            x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                // keep sqrt inputs away from the zero guard
                return t.reduce_sum(t.sqrt_(t.add_const(t.mul(xn, xn), 0.5)));
            },
            x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.concat(xn, t.constant(y), 0));
            },
            x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.concat(xn, t.constant(x), 1));
            },
            x);
        check_grad(
            [&](ad::Tape& t, int xn) { return t.reduce_sum(t.reshape(xn, 4, 3)); }, x);
        check_grad(
            [&](ad::Tape& t, int xn) {
                return t.reduce_sum(t.gather_rows(xn, {2, 0, 0, 1}));
            },
            x);
    }
}

TEST_CASE("reduce min/max and sqdist gradients") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        ad::Tensor a = random_tensor(5, 3, rng);
        ad::Tensor b = random_tensor(4, 3, rng);
        check_grad(
            [&](ad::Tape& t, int an) {
                return t.reduce_sum(
                    t.reduce_min_with_index(t.sqdist_matrix(an, t.constant(b)), 1));
            },
            a, 1e-4);
        check_grad(
            [&](ad::Tape& t, int an) {
                return t.reduce_sum(
                    t.reduce_max_with_index(t.sqdist_matrix(t.constant(b), an), 0));
            },
            a, 1e-4);
        check_grad(
            [&](ad::Tape& t, int bn) {
                return t.reduce_sum(t.sqdist_matrix(t.constant(a), bn));
            },
            b, 1e-4);
    }
}

TEST_CASE("sqdist forward equals pairwise squared distances") {
    Rng rng(3);
    ad::Tensor a = random_tensor(4, 3, rng), b = random_tensor(6, 3, rng);
    ad::Tape tape;
    int d = tape.sqdist_matrix(tape.constant(a), tape.constant(b));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) {
                double diff = a.at(i, k) - b.at(j, k);
                s += diff * diff;
            }
            CHECK(tape.value(d).at(i, j) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("argmin indices freeze selection") {
    ad::Tape tape;
    ad::Tensor m(2, 3);
    m.v = {3, 1, 2, 0, 5, 4};
    std::vector<int> idx;
    int mn = tape.reduce_min_with_index(tape.constant(m), 1, &idx);
    CHECK(idx == std::vector<int>{1, 0});
    CHECK(tape.value(mn).v == std::vector<double>{1, 0});
    std::vector<int> idx0;
    tape.reduce_max_with_index(tape.constant(m), 0, &idx0);
    CHECK(idx0 == std::vector<int>{0, 1, 1});
}

TEST_CASE("relu subgradient is zero at zero") {
    ad::Tape tape;
    ad::Tensor x(1, 3);
    x.v = {-1.0, 0.0, 2.0};
    int xn = tape.leaf(x, true);
    tape.backward(tape.reduce_sum(tape.relu(xn)));
    CHECK(tape.grad(xn).v == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("sqrt derivative guarded near zero") {
    ad::Tape tape;
    ad::Tensor x(1, 2);
    x.v = {0.0, 4.0};
    int xn = tape.leaf(x, true);
    tape.backward(tape.reduce_sum(tape.sqrt_(xn)));
    CHECK(tape.grad(xn).v[0] == 0.0);
    CHECK(tape.grad(xn).v[1] == doctest::Approx(0.25));
}

TEST_CASE("gradient accumulation over shared subexpression") {
    ad::Tape tape;
    ad::Tensor x(1, 1);
    x.v = {3.0};
    int xn = tape.leaf(x, true);
    int y = tape.mul(xn, xn);           // x^2
    int loss = tape.add(y, y);          // 2 x^2, dloss/dx = 4x = 12
    tape.backward(loss);
    CHECK(tape.grad(xn).v[0] == doctest::Approx(12.0));
}

TEST_CASE("constants carry no gradient") {
    ad::Tape tape;
    int c = tape.constant(ad::Tensor::scalar(2.0));
    int x = tape.leaf(ad::Tensor::scalar(3.0), true);
    tape.backward(tape.mul(c, x));
    CHECK(tape.has_grad(x));
    CHECK_FALSE(tape.has_grad(c));
}

TEST_CASE("checksum distinguishes tensors") {
    ad::Tensor a(2, 2), b(2, 2);
    a.v = {1, 2, 3, 4};
    b.v = {1, 2, 3, 5};
    CHECK(ad::checksum(a) == ad::checksum(a));
    CHECK(ad::checksum(a) != ad::checksum(b));
    ad::Tensor c(1, 4);
    c.v = {1, 2, 3, 4};  // same data, different shape
    CHECK(ad::checksum(a) != ad::checksum(c));
}

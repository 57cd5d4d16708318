#include <doctest.h>

#include "augforget/model.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace augforget;

namespace {

Matrix random_batch(Rng& rng, std::size_t rows, std::size_t cols) { return gauss(rng, rows, cols, 0.0, 1.0); }

std::vector<std::size_t> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
    std::vector<std::size_t> l(n);
    for (auto& v : l) v = rng.uniform_index(classes);
    return l;
}

} // namespace

TEST_CASE("parameter count of the default classifier") {
    // 784*256+256 + 256*128+128 + 128*10+10
    const std::vector<std::size_t> sizes{784, 256, 128, 10};
    CHECK(parameter_count(sizes) == 235146);
    Rng rng(1);
    const Mlp m = Mlp::init(sizes, rng);
    CHECK(m.parameter_count() == 235146);
    CHECK(m.flat_params().size() == 235146);
}

TEST_CASE("init: deterministic, zero biases, He scale, bad sizes") {
    Rng a(3), b(3);
    const Mlp x = Mlp::init({50, 40, 30}, a);
    const Mlp y = Mlp::init({50, 40, 30}, b);
    CHECK(x.flat_params() == y.flat_params());
    for (std::size_t l = 0; l < x.layer_count(); ++l)
        for (const double v : x.bias(l)) CHECK(v == 0.0);
    double ss = 0.0;
    for (const double v : x.weight(0).data) ss += v * v;
    CHECK(ss / 2000.0 == doctest::Approx(2.0 / 50.0).epsilon(0.1));

    Rng r(1);
    CHECK_THROWS_AS((void)Mlp::init({5}, r), Error);
    CHECK_THROWS_AS((void)Mlp::init({5, 0, 3}, r), Error);
}

TEST_CASE("flat params round-trip and canonical order") {
    Rng rng(4);
    Mlp m = Mlp::init({3, 2, 2}, rng);
    const auto p = m.flat_params();
    Mlp copy({3, 2, 2});
    copy.set_flat_params(p);
    CHECK(copy == m);
    CHECK(m.flat_params() == p);
    CHECK_THROWS_AS(copy.set_flat_params(std::vector<double>(p.size() - 1)), Error);

    // Layer 0: W (3x2 row-major) at [0,6), bias at [6,8); layer 1: W at [8,12), bias at [12,14).
    CHECK(m.weight_offset(0) == 0);
    CHECK(m.bias_offset(0) == 6);
    CHECK(m.weight_offset(1) == 8);
    CHECK(m.bias_offset(1) == 12);
    CHECK(m.weight(0)(1, 0) == p[2]);
    CHECK(m.weight(1)(0, 1) == p[9]);
}

TEST_CASE("forward: zero model, row independence, ReLU trace, shape errors") {
    Rng rng(5);
    const Matrix batch = random_batch(rng, 32, 6);
    const Mlp zero({6, 5, 4, 3});
    CHECK(forward(zero, batch).logits == Matrix(32, 3));

    const Mlp m = Mlp::init({6, 5, 4, 3}, rng);
    const auto full = forward(m, batch);
    CHECK(full.trace.layers.size() == 3);
    CHECK(full.trace.layers.back() == full.logits);
    for (std::size_t l = 0; l + 1 < full.trace.layers.size(); ++l) {
        CHECK(full.trace.layers[l].rows() == 32);
        for (const double v : full.trace.layers[l].data()) CHECK(v >= 0.0);
    }
    for (std::size_t r = 0; r < 32; r += 7) {
        Matrix one(1, 6);
        std::copy(batch.row(r).begin(), batch.row(r).end(), one.data().begin());
        const auto single = forward(m, one).logits;
        for (std::size_t c = 0; c < 3; ++c) CHECK(single(0, c) == full.logits(r, c));
    }
    CHECK(forward(m, batch).logits == full.logits);
    CHECK(predict_logits(m, batch.view()) == full.logits);
    CHECK_THROWS_AS((void)forward(m, Matrix(2, 5)), Error);
}

TEST_CASE("loss: uniform logits give ln C, duplicated rows keep the loss") {
    Rng rng(6);
    const Mlp zero({6, 5, 4});
    const Matrix batch = random_batch(rng, 10, 6);
    const auto labels = random_labels(rng, 10, 4);
    CHECK(loss_and_grad(zero, batch, labels).loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));

    const Mlp m = Mlp::init({6, 5, 4}, rng);
    Matrix twice(20, 6);
    std::vector<std::size_t> labels2;
    for (std::size_t r = 0; r < 20; ++r) {
        std::copy(batch.row(r % 10).begin(), batch.row(r % 10).end(), twice.row(r).begin());
        labels2.push_back(labels[r % 10]);
    }
    CHECK(mean_loss(m, twice, labels2) == doctest::Approx(mean_loss(m, batch, labels)).epsilon(1e-14));
    CHECK(loss_and_grad(m, batch, labels).loss == doctest::Approx(mean_loss(m, batch, labels)).epsilon(1e-14));
    CHECK_THROWS_AS((void)loss_and_grad(m, batch, std::vector<std::size_t>(10, 4)), Error);
}

TEST_CASE("backprop matches central differences on a tiny model") {
    Rng rng(7);
    for (int t = 0; t < 5; ++t) {
        const Mlp m = Mlp::init({6, 5, 4, 3}, rng);
        const Matrix batch = random_batch(rng, 8, 6);
        const auto labels = random_labels(rng, 8, 3);
        const auto g = loss_and_grad(m, batch, labels).grad.values;
        CHECK(oracle::max_relative_error(g, oracle::fd_gradient(m, batch, labels), 1e-6) < 1e-6);
    }
}

TEST_CASE("sgd_step") {
    Rng rng(8);
    Mlp m = Mlp::init({4, 3, 2}, rng);
    const auto before = m.flat_params();
    GradientVector g{std::vector<double>(m.parameter_count(), 1.0), ""};
    sgd_step(m, g, 0.0);
    CHECK(m.flat_params() == before);
    sgd_step(m, GradientVector{std::vector<double>(m.parameter_count(), 0.0), ""}, 0.1);
    CHECK(m.flat_params() == before);
    sgd_step(m, g, 0.5);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(m.params()[i] == before[i] - 0.5);
    CHECK_THROWS_AS(sgd_step(m, GradientVector{std::vector<double>(3, 0.0), ""}, 0.1), Error);
    CHECK_THROWS_AS(sgd_step(m, g, -0.1), Error);

    const Matrix batch = random_batch(rng, 16, 4);
    const auto labels = random_labels(rng, 16, 2);
    const auto lg = loss_and_grad(m, batch, labels);
    sgd_step(m, lg.grad, 1e-3);
    CHECK(mean_loss(m, batch, labels) < lg.loss);
}

TEST_CASE("accuracy: tie rule, memorisation, empty input") {
    Dataset ds;
    ds.class_count = 10;
    for (std::size_t i = 0; i < 100; ++i) {
        ds.images.emplace_back(2, 2, 0.5);
        ds.labels.push_back(i % 10);
    }
    const Mlp constant({4, 10});
    CHECK(accuracy(constant, ds) == 0.1);
    CHECK_THROWS_AS((void)accuracy(constant, Dataset{}), Error);

    Rng rng(9);
    Mlp m = Mlp::init({6, 32, 3}, rng);
    const Matrix batch = random_batch(rng, 50, 6);
    const auto labels = random_labels(rng, 50, 3);
    for (int step = 0; step < 3000; ++step) sgd_step(m, loss_and_grad(m, batch, labels).grad, 0.2);
    CHECK(accuracy(m, batch.view(), labels) == 1.0);
}

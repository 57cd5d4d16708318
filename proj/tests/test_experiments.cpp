#include <doctest.h>

#include "augforget/experiments.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace augforget;

namespace {

DataBundle small_bundle() { return load_data({true, {}}, 400, 200, 3); }

EvilTwinConfig small_evil_twin() {
    EvilTwinConfig c;
    c.seed = 3;
    c.pool_size = 300;
    c.eval_size = 150;
    c.shape.hidden = {32};
    c.angles = {45, 0, -45};
    c.first = {2, 32, 0.05};
    c.second = {1, 32, 0.05};
    c.sd_batches = 3;
    return c;
}

MethodComparisonConfig small_comparison() {
    MethodComparisonConfig c;
    c.seed = 3;
    c.pool_size = 200;
    c.eval_size = 100;
    c.shape.hidden = {16};
    c.train = {2, 32, 0.05};
    c.methods = {MethodSpec::vanilla(), MethodSpec::replay(0.5), MethodSpec::merge(80, 5)};
    c.probe_size = 64;
    return c;
}

} // namespace

TEST_CASE("spearman matches a brute-force rank oracle exactly") {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 2 + rng.uniform_index(12);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.uniform_index(6)); // ties on purpose
            y[i] = rng.uniform() < 0.5 ? static_cast<double>(rng.uniform_index(4)) : rng.normal();
        }
        CHECK(spearman_rho(x, y) == oracle::spearman(x, y));
    }
    CHECK(spearman_rho(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) == 1.0);
    CHECK(spearman_rho(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == -1.0);
    CHECK(spearman_rho(std::vector<double>{1, 1, 1}, std::vector<double>{3, 2, 1}) == 0.0);
    CHECK(average_ranks(std::vector<double>{5, 1, 5, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
    CHECK_THROWS_AS((void)spearman_rho(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("load_data") {
    const auto a = small_bundle();
    const auto b = small_bundle();
    CHECK(a.synthetic);
    CHECK(a.train.size() == 400);
    CHECK(a.test.size() == 200);
    CHECK(a.train.labels == b.train.labels);
    CHECK(a.train.images[17] == b.train.images[17]);
    CHECK(a.train.images[0] != a.test.images[0]);
    CHECK_THROWS_AS((void)load_data({false, {}}, 10, 10, 1), Error);
    CHECK_THROWS_AS((void)load_data({false, "/nonexistent/augforget"}, 10, 10, 1), Error);
}

TEST_CASE("evil twin report structure and reproducibility") {
    const auto data = small_bundle();
    const auto cfg = small_evil_twin();
    const auto r1 = run_evil_twin(cfg, data);
    const auto r2 = run_evil_twin(cfg, data);
    REQUIRE(r1.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& row = r1.rows[i];
        CHECK(row.angle == cfg.angles[i]);
        CHECK(row.forgetting == row.acc_before - row.acc_after);
        CHECK(row.acc_before == r1.rows[0].acc_before);
        CHECK(row.aggregated_sd >= 0.0);
        CHECK(row.aggregated_sd <= 1.0);
        CHECK(row.acc_after == r2.rows[i].acc_after);
        CHECK(row.aggregated_sd == r2.rows[i].aggregated_sd);
    }
    CHECK(r1.spearman_rho == r2.spearman_rho);

    auto bad = cfg;
    bad.angles.clear();
    CHECK_THROWS_AS((void)run_evil_twin(bad, data), Error);
    bad = cfg;
    bad.pool_size = 10000;
    CHECK_THROWS_AS((void)run_evil_twin(bad, data), Error);

    auto replay = cfg;
    replay.method = MethodSpec::replay(0.5);
    const auto rr = run_evil_twin(replay, data);
    CHECK(rr.rows[0].acc_before == r1.rows[0].acc_before);
}

TEST_CASE("inversions count adjacent decreases by angular gap") {
    EvilTwinReport r;
    r.rows = {{45, 0, 0, 0.0, 0}, {30, 0, 0, 0.1, 0}, {15, 0, 0, 0.05, 0}, {0, 0, 0, 0.3, 0}};
    CHECK(r.inversions(45) == 1);
    CHECK(r.mean_forgetting() == doctest::Approx(0.1125));
}

TEST_CASE("taylor oracle") {
    TaylorConfig cfg;
    cfg.samples = 20000;
    const auto curve = run_taylor_oracle(cfg);
    REQUIRE(curve.size() == 6);
    CHECK(curve[0].mean_cos == 1.0);
    CHECK(curve[0].stderr_cos == 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].mean_cos < curve[i - 1].mean_cos);
        CHECK(curve[i - 1].mean_cos - curve[i].mean_cos >
              3.0 * std::hypot(curve[i].stderr_cos, curve[i - 1].stderr_cos));
    }
    CHECK(run_taylor_oracle(cfg)[3].mean_cos == curve[3].mean_cos);

    // Doubling A's scale at a large σ: the cosine distribution stays centred below 1.
    TaylorConfig doubled = cfg;
    doubled.a_scale = 2.0;
    doubled.sigmas = {5.0};
    const auto d = run_taylor_oracle(doubled);
    CHECK(d[0].mean_cos < 1.0 - 3.0 * d[0].stderr_cos);

    TaylorConfig custom = cfg;
    custom.dim = 2;
    custom.a = Matrix::from_rows({{2, 1}, {0, 1}});
    custom.sigmas = {0.0, 1.0};
    const auto c = run_taylor_oracle(custom);
    CHECK(c[0].mean_cos == 1.0);
    CHECK(c[1].mean_cos < 1.0);

    TaylorConfig empty = cfg;
    empty.sigmas.clear();
    CHECK_THROWS_AS((void)run_taylor_oracle(empty), Error);
    custom.a = Matrix(3, 3);
    CHECK_THROWS_AS((void)run_taylor_oracle(custom), Error);
}

TEST_CASE("cka compare") {
    const auto data = small_bundle();
    CkaCompareConfig cfg;
    cfg.seed = 3;
    cfg.pool_size = 200;
    cfg.probe_size = 64;
    cfg.shape.hidden = {16, 8};
    cfg.first = {1, 32, 0.05};
    cfg.second = {1, 32, 0.05};
    cfg.methods = {MethodSpec::vanilla(), MethodSpec::merge(80, 3)};
    const auto out = run_cka_compare(cfg, data);
    REQUIRE(out.size() == 3);
    CHECK(out[0].method == "control");
    CHECK(out[1].method == "vanilla");
    CHECK(out[2].method == "merge");
    for (const auto& c : out) {
        CHECK(c.cka.values.rows() == 3);
        for (const double v : c.cka.values.data()) {
            CHECK(v >= -1e-9);
            CHECK(v <= 1.0 + 1e-9);
        }
    }
    CHECK(run_cka_compare(cfg, data)[1].cka.values == out[1].cka.values);

    auto overlap = cfg;
    overlap.second_set = TransformSet::parse("rotate:45,rotate:-15");
    CHECK_THROWS_AS((void)run_cka_compare(overlap, data), Error);
}

TEST_CASE("method comparison shares initial weights and is reproducible") {
    const auto data = small_bundle();
    const auto cfg = small_comparison();
    const auto a = run_method_comparison(cfg, data);
    REQUIRE(a.results.size() == 3);
    CHECK(a.view_labels.size() == 9);
    for (const auto& r : a.results) {
        CHECK(r.initial_params == a.results[0].initial_params);
        CHECK(r.view_accuracy.size() == 9);
        CHECK(r.cka_diagonal_mean >= 0.0);
        CHECK(r.cka_diagonal_mean <= 1.0 + 1e-9);
    }
    CHECK(a.results[2].snapshot.has_value());
    CHECK_FALSE(a.results[0].snapshot.has_value());
    const auto b = run_method_comparison(cfg, data);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.results[i].final_model == b.results[i].final_model);

    auto targeted = cfg;
    targeted.policy.targeted = true;
    targeted.policy.refresh = 2;
    targeted.methods = {MethodSpec::vanilla()};
    const auto t = run_method_comparison(targeted, data);
    CHECK(t.results[0].final_model != a.results[0].final_model);
}

TEST_CASE("merge ablation: p=100 equals full averaging bit for bit") {
    const auto data = small_bundle();
    AblationConfig cfg;
    cfg.base = small_comparison();
    cfg.p_grid = {50, 100};
    cfg.merge_k = 5;
    const auto rows = run_merge_ablation(cfg, data);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].p == 50);
    CHECK(rows[1].p == 100);

    auto avg = cfg.base;
    avg.methods = {MethodSpec::full_average(5)};
    auto top = cfg.base;
    top.methods = {MethodSpec::merge(100, 5)};
    const auto ra = run_method_comparison(avg, data);
    const auto rt = run_method_comparison(top, data);
    CHECK(ra.results[0].final_model == rt.results[0].final_model);
    CHECK(rows[1].accuracy == ra.results[0].mean_view_accuracy);
    CHECK_THROWS_AS((void)run_merge_ablation(AblationConfig{cfg.base, {}, 5}, data), Error);
}

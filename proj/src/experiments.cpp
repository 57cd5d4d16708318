#include "augforget/experiments.hpp"

#include "augforget/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace augforget {

namespace {

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
    for (const auto* suffix : {"", ".gz"}) {
        const auto p = dir / (stem + suffix);
        if (std::filesystem::exists(p)) return p;
    }
    // Some mirrors ship "train-images.idx3-ubyte" instead of "train-images-idx3-ubyte".
    std::string dotted = stem;
    if (const auto pos = dotted.find("-idx"); pos != std::string::npos) dotted[pos] = '.';
    for (const auto* suffix : {"", ".gz"}) {
        const auto p = dir / (dotted + suffix);
        if (std::filesystem::exists(p)) return p;
    }
    throw Error(ErrorKind::io, "no " + stem + "[.gz] under " + dir.string());
}

Dataset load_split(const std::filesystem::path& dir, const std::string& prefix, std::size_t count) {
    Dataset ds = load_idx(find_idx(dir, prefix + "-images-idx3-ubyte"), find_idx(dir, prefix + "-labels-idx1-ubyte"), count);
    if (ds.size() < count) {
        throw Error(ErrorKind::count_mismatch, prefix + " split holds " + std::to_string(ds.size()) + " records, " +
                                                   std::to_string(count) + " requested");
    }
    return ds;
}

Mlp initial_model(std::uint64_t seed, const ModelShape& shape, const Dataset& pool) {
    Rng rng = Rng::derive(seed, "model:init");
    return Mlp::init(shape.layer_sizes(pool.feature_count(), pool.class_count), rng);
}

std::size_t replay_capacity(const MethodSpec& m, std::size_t pool_size) {
    const auto c = static_cast<std::size_t>(std::llround(m.replay_fraction * static_cast<double>(pool_size)));
    return std::max<std::size_t>(c, 1);
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = m.row(rows[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

std::vector<std::size_t> select_labels(std::span<const std::size_t> labels, std::span<const std::size_t> rows) {
    std::vector<std::size_t> out;
    out.reserve(rows.size());
    for (const auto r : rows) out.push_back(labels[r]);
    return out;
}

void require_pool(const Dataset& train, std::size_t pool_size) {
    if (pool_size == 0) throw Error(ErrorKind::invalid_argument, "pool size must be >= 1");
    if (train.size() < pool_size) {
        throw Error(ErrorKind::count_mismatch, "training split holds " + std::to_string(train.size()) +
                                                   " records, pool needs " + std::to_string(pool_size));
    }
}

void require_heldout(const Dataset& test, std::size_t count, const char* what) {
    if (count == 0) throw Error(ErrorKind::invalid_argument, std::string(what) + " size must be >= 1");
    if (test.size() < count) {
        throw Error(ErrorKind::count_mismatch, "test split holds " + std::to_string(test.size()) + " records, " +
                                                   what + " needs " + std::to_string(count));
    }
}

} // namespace

DataBundle load_data(const DataSource& source, std::size_t train_count, std::size_t test_count, std::uint64_t seed) {
    DataBundle b;
    b.synthetic = source.synthetic;
    if (source.synthetic) {
        Rng train_rng = Rng::derive(seed, "synthetic:train");
        Rng test_rng = Rng::derive(seed, "synthetic:test");
        b.train = make_synthetic_digits(train_rng, train_count);
        b.test = make_synthetic_digits(test_rng, test_count);
        return b;
    }
    if (source.dir.empty()) throw Error(ErrorKind::invalid_argument, "no dataset directory given");
    b.train = load_split(source.dir, "train", train_count);
    b.test = load_split(source.dir, "t10k", test_count);
    b.train.class_count = b.test.class_count = std::max(b.train.class_count, b.test.class_count);
    return b;
}

Matrix transformed_view(const Dataset& ds, const Transform& t, Rng& rng) {
    Matrix out(ds.size(), ds.feature_count());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Matrix img = apply(t, ds.images[i], rng);
        std::copy(img.data().begin(), img.data().end(), out.row(i).begin());
    }
    return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorKind::shape_mismatch, "spearman_rho of " + std::to_string(x.size()) + " and " +
                                                   std::to_string(y.size()) + " values");
    }
    for (const auto v : x)
        if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "spearman_rho given a non-finite value");
    for (const auto v : y)
        if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "spearman_rho given a non-finite value");
    if (x.size() < 2) return 0.0;
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double mean = (static_cast<double>(x.size()) + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<std::size_t> ModelShape::layer_sizes(std::size_t inputs, std::size_t classes) const {
    std::vector<std::size_t> sizes{inputs};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(classes);
    return sizes;
}

// ---------------------------------------------------------------------------

double EvilTwinReport::mean_forgetting() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.forgetting;
    return s / static_cast<double>(rows.size());
}

std::size_t EvilTwinReport::inversions(double first_angle) const {
    std::vector<const EvilTwinRow*> sorted;
    for (const auto& r : rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [&](const EvilTwinRow* a, const EvilTwinRow* b) {
        return std::fabs(a->angle - first_angle) < std::fabs(b->angle - first_angle);
    });
    std::size_t count = 0;
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i]->forgetting < sorted[i - 1]->forgetting) ++count;
    return count;
}

EvilTwinReport run_evil_twin(const EvilTwinConfig& cfg) {
    return run_evil_twin(cfg, load_data(cfg.data, cfg.pool_size, cfg.eval_size, cfg.seed));
}

EvilTwinReport run_evil_twin(const EvilTwinConfig& cfg, const DataBundle& data) {
    require_pool(data.train, cfg.pool_size);
    require_heldout(data.test, cfg.eval_size, "evaluation");
    if (cfg.angles.empty()) throw Error(ErrorKind::invalid_argument, "evil twin needs at least one angle");
    if (cfg.sd_batches == 0) throw Error(ErrorKind::invalid_argument, "sd batch count must be >= 1");
    cfg.method.validate();

    const Dataset pool = take_prefix(data.train, cfg.pool_size);
    const Dataset heldout = take_prefix(data.test, cfg.eval_size);
    // Rotations draw nothing; the stream only satisfies apply().
    Rng unused = Rng::derive(cfg.seed, "views");
    const Transform first = Transform::rotation(cfg.first_angle);
    const Matrix first_view = transformed_view(pool, first, unused);
    const Matrix heldout_first = transformed_view(heldout, first, unused);

    Mlp model = initial_model(cfg.seed, cfg.shape, pool);
    Trainer trainer(MethodSpec::vanilla(), cfg.first, cfg.seed);
    if (cfg.method.kind == MethodKind::replay) trainer.enable_replay_buffer(replay_capacity(cfg.method, pool.size()));
    trainer.train(model, fixed_view_source(first_view, pool.labels), pool.size());
    const double acc_before = accuracy(model, heldout_first.view(), heldout.labels);

    // k batches of B pool samples, shared by the reference and every candidate angle.
    const std::size_t batch = std::min(cfg.second.batch_size, pool.size());
    const std::size_t k = std::max<std::size_t>(1, std::min(cfg.sd_batches, pool.size() / batch));
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng sd_rng = Rng::derive(cfg.seed, "sd");
    shuffle(sd_rng, std::span<std::size_t>(order));
    order.resize(k * batch);
    const GradientVector g1 =
        loss_and_grad(model, select_rows(first_view, order), select_labels(pool.labels, order)).grad;

    EvilTwinReport report;
    for (const double angle : cfg.angles) {
        const Matrix view = angle == cfg.first_angle ? first_view : transformed_view(pool, Transform::rotation(angle), unused);

        std::vector<GradientVector> per_batch;
        for (std::size_t b = 0; b < k; ++b) {
            const std::span<const std::size_t> rows(order.data() + b * batch, batch);
            per_batch.push_back(loss_and_grad(model, select_rows(view, rows), select_labels(pool.labels, rows)).grad);
        }
        const SdReport sd = aggregated_sign_discrepancy(g1, per_batch);

        Mlp m = model;
        Trainer t = trainer;
        t.begin_phase(cfg.method, cfg.second);
        t.train(m, fixed_view_source(view, pool.labels), pool.size());
        const double acc_after = accuracy(m, heldout_first.view(), heldout.labels);
        report.rows.push_back({angle, acc_before, acc_after, acc_before - acc_after, sd.aggregated});
    }

    std::vector<double> sds, forgetting;
    for (const auto& r : report.rows) {
        sds.push_back(r.aggregated_sd);
        forgetting.push_back(r.forgetting);
    }
    report.spearman_rho = spearman_rho(sds, forgetting);
    return report;
}

// ---------------------------------------------------------------------------

std::vector<TaylorPoint> run_taylor_oracle(const TaylorConfig& cfg) {
    if (cfg.sigmas.empty()) throw Error(ErrorKind::invalid_argument, "taylor oracle needs at least one sigma");
    if (cfg.samples < 2) throw Error(ErrorKind::invalid_argument, "taylor oracle needs at least two samples");
    if (cfg.dim == 0) throw Error(ErrorKind::invalid_argument, "taylor dimension must be >= 1");
    for (const double s : cfg.sigmas)
        if (!(s >= 0.0 && std::isfinite(s))) throw Error(ErrorKind::invalid_argument, "sigma must be finite and >= 0");

    const std::size_t d = cfg.dim;
    Matrix a = cfg.a ? *cfg.a : Matrix::identity(d);
    if (a.rows() != d || a.cols() != d) {
        throw Error(ErrorKind::shape_mismatch, "taylor matrix A is " + a.shape() + ", expected " + shape_string(d, d));
    }
    if (!cfg.a)
        for (auto& v : a.data()) v *= cfg.a_scale;

    Rng setup = Rng::derive(cfg.seed, "taylor:setup");
    const Matrix theta = gauss(setup, d, 1, 0.0, 1.0);
    const Matrix x = gauss(setup, d, 1, 0.0, 1.0);
    const Matrix a_theta = matmul(a, theta);
    const Matrix at = a.transposed();

    // g(x') = Aᵀ(Aθ − x'); the residual is formed first so δ = 0 reproduces g_x exactly.
    auto gradient_at = [&](std::span<const double> delta) {
        Matrix r(d, 1);
        for (std::size_t i = 0; i < d; ++i) r.data()[i] = a_theta.data()[i] - x.data()[i] - delta[i];
        return matmul(at, r);
    };
    const std::vector<double> zero(d, 0.0);
    const Matrix gx = gradient_at(zero);

    std::vector<TaylorPoint> out;
    std::vector<double> delta(d);
    for (const double sigma : cfg.sigmas) {
        Rng noise = Rng::derive(cfg.seed, "taylor:noise");
        double mean = 0.0, m2 = 0.0;
        for (std::size_t s = 0; s < cfg.samples; ++s) {
            for (auto& v : delta) v = sigma * noise.normal();
            const Matrix g = gradient_at(delta);
            const double c = cosine_alignment(gx.data(), g.data());
            const double step = c - mean;
            mean += step / static_cast<double>(s + 1);
            m2 += step * (c - mean);
        }
        const double n = static_cast<double>(cfg.samples);
        out.push_back({sigma, mean, std::sqrt(m2 / (n - 1.0) / n)});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<CkaComparison> run_cka_compare(const CkaCompareConfig& cfg) {
    return run_cka_compare(cfg, load_data(cfg.data, cfg.pool_size, cfg.probe_size, cfg.seed));
}

std::vector<CkaComparison> run_cka_compare(const CkaCompareConfig& cfg, const DataBundle& data) {
    require_pool(data.train, cfg.pool_size);
    require_heldout(data.test, cfg.probe_size, "probe");
    if (cfg.probe_size < 2) throw Error(ErrorKind::invalid_argument, "CKA probe needs at least two samples");
    if (cfg.first_set.overlaps(cfg.second_set)) {
        throw Error(ErrorKind::invalid_argument, "transform sets " + cfg.first_set.label() + " and " +
                                                     cfg.second_set.label() + " overlap");
    }
    for (const auto& m : cfg.methods) m.validate();

    const Dataset pool = take_prefix(data.train, cfg.pool_size);
    const Dataset probe_ds = take_prefix(data.test, cfg.probe_size);
    Matrix probe(probe_ds.size(), probe_ds.feature_count());
    Rng probe_rng = Rng::derive(cfg.seed, "probe");
    for (std::size_t i = 0; i < probe_ds.size(); ++i) {
        const Matrix img = apply(cfg.first_set[i % cfg.first_set.size()], probe_ds.images[i], probe_rng);
        std::copy(img.data().begin(), img.data().end(), probe.row(i).begin());
    }

    Mlp original = initial_model(cfg.seed, cfg.shape, pool);
    Trainer trainer(MethodSpec::vanilla(), cfg.first, cfg.seed);
    const auto replay = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                                     [](const MethodSpec& m) { return m.kind == MethodKind::replay; });
    if (replay != cfg.methods.end()) trainer.enable_replay_buffer(replay_capacity(*replay, pool.size()));
    const PolicySpec uniform;
    trainer.train(original, policy_source(pool, cfg.first_set, uniform, Rng::derive(cfg.seed, "aug:first")),
                  pool.size());

    auto continue_on = [&](const MethodSpec& method, const TransformSet& set) {
        Mlp m = original;
        Trainer t = trainer;
        t.begin_phase(method, cfg.second);
        t.train(m, policy_source(pool, set, uniform, Rng::derive(cfg.seed, "aug:second")), pool.size());
        return cka_matrix(original, m, probe);
    };

    std::vector<CkaComparison> out;
    out.push_back({"control", continue_on(MethodSpec::vanilla(), cfg.first_set)});
    for (const auto& method : cfg.methods) out.push_back({method.name(), continue_on(method, cfg.second_set)});
    return out;
}

// ---------------------------------------------------------------------------

MethodComparison run_method_comparison(const MethodComparisonConfig& cfg) {
    return run_method_comparison(cfg, load_data(cfg.data, cfg.pool_size, cfg.eval_size, cfg.seed));
}

MethodComparison run_method_comparison(const MethodComparisonConfig& cfg, const DataBundle& data) {
    require_pool(data.train, cfg.pool_size);
    require_heldout(data.test, cfg.eval_size, "evaluation");
    if (cfg.methods.empty()) throw Error(ErrorKind::invalid_argument, "method comparison needs at least one method");
    if (cfg.probe_size < 2) throw Error(ErrorKind::invalid_argument, "CKA probe needs at least two samples");
    for (const auto& m : cfg.methods) m.validate();

    const Dataset pool = take_prefix(data.train, cfg.pool_size);
    const Dataset heldout = take_prefix(data.test, cfg.eval_size);

    MethodComparison report;
    std::vector<Matrix> views;
    Rng eval_rng = Rng::derive(cfg.seed, "eval:views");
    for (const auto& t : cfg.transforms.transforms()) {
        report.view_labels.push_back(t.label());
        views.push_back(transformed_view(heldout, t, eval_rng));
    }
    const Matrix clean = flatten_all(heldout);
    const std::size_t probe_rows = std::min(cfg.probe_size, clean.rows());
    std::vector<std::size_t> probe_index(probe_rows);
    std::iota(probe_index.begin(), probe_index.end(), std::size_t{0});
    const Matrix probe = select_rows(clean, probe_index);

    for (const auto& method : cfg.methods) {
        MethodResult r;
        r.method = method.name();
        Mlp model = initial_model(cfg.seed, cfg.shape, pool);
        r.initial_params = model.flat_params();

        Trainer trainer(method, cfg.train, cfg.seed);
        if (method.kind == MethodKind::replay) trainer.enable_replay_buffer(replay_capacity(method, pool.size()));
        std::optional<Mlp> after_first;
        trainer.train(model, policy_source(pool, cfg.transforms, cfg.policy, Rng::derive(cfg.seed, "aug")), pool.size(),
                      [&](std::size_t epoch, const Mlp& m) {
                          if (epoch == 0) after_first = m;
                      });

        double total = 0.0;
        for (const auto& v : views) {
            r.view_accuracy.push_back(accuracy(model, v.view(), heldout.labels));
            total += r.view_accuracy.back();
        }
        r.mean_view_accuracy = total / static_cast<double>(views.size());
        r.clean_accuracy = accuracy(model, clean.view(), heldout.labels);
        r.cka_diagonal_mean = cka_matrix(after_first ? *after_first : model, model, probe).diagonal_mean();
        if (trainer.snapshots().has_snapshot()) r.snapshot = trainer.snapshots().snapshot().params;
        r.final_model = std::move(model);
        report.results.push_back(std::move(r));
    }
    return report;
}

std::vector<AblationRow> run_merge_ablation(const AblationConfig& cfg) {
    return run_merge_ablation(cfg, load_data(cfg.base.data, cfg.base.pool_size, cfg.base.eval_size, cfg.base.seed));
}

std::vector<AblationRow> run_merge_ablation(const AblationConfig& cfg, const DataBundle& data) {
    if (cfg.p_grid.empty()) throw Error(ErrorKind::invalid_argument, "ablation needs at least one p value");
    std::vector<AblationRow> rows;
    for (const double p : cfg.p_grid) {
        MethodComparisonConfig c = cfg.base;
        c.methods = {MethodSpec::merge(p, cfg.merge_k)};
        const auto result = run_method_comparison(c, data);
        rows.push_back({p, result.results.front().mean_view_accuracy});
    }
    return rows;
}

} // namespace augforget

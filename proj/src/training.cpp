#include "augforget/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace augforget {

std::string MethodSpec::name() const {
    switch (kind) {
    case MethodKind::vanilla: return "vanilla";
    case MethodKind::replay: return "replay";
    case MethodKind::merge: return "merge";
    case MethodKind::average: return "average";
    }
    return "?";
}

void MethodSpec::validate() const {
    if (kind == MethodKind::replay) {
        if (!(replay_fraction > 0.0 && replay_fraction <= 1.0)) {
            throw Error(ErrorKind::invalid_argument, "replay fraction must lie in (0, 1]");
        }
        if (!(replay_mix >= 0.0 && replay_mix < 1.0)) {
            throw Error(ErrorKind::invalid_argument, "replay mix must lie in [0, 1)");
        }
    }
    if (kind == MethodKind::merge || kind == MethodKind::average) {
        if (!(merge_p > 0.0 && merge_p <= 100.0)) throw Error(ErrorKind::invalid_argument, "merge p must lie in (0, 100]");
        if (merge_k == 0) throw Error(ErrorKind::invalid_argument, "merge k must be >= 1");
    }
}

MethodKind parse_method_kind(std::string_view name) {
    if (name == "vanilla") return MethodKind::vanilla;
    if (name == "replay") return MethodKind::replay;
    if (name == "merge") return MethodKind::merge;
    if (name == "average") return MethodKind::average;
    throw Error(ErrorKind::invalid_argument, "unknown method '" + std::string(name) + "'");
}

BatchSource fixed_view_source(const Matrix& view, std::span<const std::size_t> labels, std::size_t augmentation) {
    if (labels.size() != view.rows()) {
        throw Error(ErrorKind::shape_mismatch, "view has " + std::to_string(view.rows()) + " rows but " +
                                                   std::to_string(labels.size()) + " labels");
    }
    const Matrix* rows = &view;
    return [rows, labels, augmentation](const Mlp&, std::span<const std::size_t> indices, std::size_t) {
        Batch b{Matrix(indices.size(), rows->cols()), {}, augmentation};
        b.labels.reserve(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            const auto src = rows->row(indices[r]);
            std::copy(src.begin(), src.end(), b.inputs.row(r).begin());
            b.labels.push_back(labels[indices[r]]);
        }
        return b;
    };
}

namespace {

Batch transformed_batch(const Dataset& pool, std::span<const std::size_t> indices, const Transform& t, Rng& rng) {
    Batch b{Matrix(indices.size(), pool.feature_count()), {}, 0};
    b.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Matrix img = apply(t, pool.images.at(indices[r]), rng);
        std::copy(img.data().begin(), img.data().end(), b.inputs.row(r).begin());
        b.labels.push_back(pool.labels[indices[r]]);
    }
    return b;
}

struct PolicyState {
    const Dataset* pool;
    TransformSet set;
    PolicySpec spec;
    Rng rng;
    PolicyDistribution current;
};

} // namespace

BatchSource policy_source(const Dataset& pool, TransformSet set, PolicySpec policy, Rng aug_rng) {
    if (policy.targeted && policy.refresh == 0) throw Error(ErrorKind::invalid_argument, "policy refresh must be >= 1");
    auto state = std::make_shared<PolicyState>(
        PolicyState{&pool, set, policy, aug_rng, policy_uniform(set.size())});
    return [state](const Mlp& model, std::span<const std::size_t> indices, std::size_t iteration) {
        auto& s = *state;
        if (s.spec.targeted && iteration % s.spec.refresh == 0) {
            std::vector<double> losses;
            losses.reserve(s.set.size());
            for (const auto& t : s.set.transforms()) {
                const Batch probe = transformed_batch(*s.pool, indices, t, s.rng);
                losses.push_back(mean_loss(model, probe.inputs, probe.labels));
            }
            s.current = policy_targeted(losses, s.spec.beta);
        }
        const auto [index, transform] = sample_transform(s.rng, s.set, s.current);
        Batch b = transformed_batch(*s.pool, indices, transform, s.rng);
        b.augmentation = index;
        return b;
    };
}

Trainer::Trainer(MethodSpec method, TrainSettings settings, std::uint64_t seed)
    : method_(method), settings_(settings), order_rng_(Rng::derive(seed, "trainer:order")),
      replay_rng_(Rng::derive(seed, "trainer:replay")) {
    method_.validate();
    if (settings_.batch_size == 0) throw Error(ErrorKind::invalid_argument, "batch size must be >= 1");
}

void Trainer::enable_replay_buffer(std::size_t capacity) { buffer_.emplace(capacity); }

void Trainer::begin_phase(MethodSpec method, TrainSettings settings) {
    method.validate();
    if (settings.batch_size == 0) throw Error(ErrorKind::invalid_argument, "batch size must be >= 1");
    method_ = method;
    settings_ = settings;
    iteration_ = 0;
    snapshots_ = SnapshotStore{};
}

void Trainer::step(Mlp& model, const Batch& batch) {
    const std::size_t fresh = batch.inputs.rows();
    const std::size_t width = batch.inputs.cols();

    std::vector<const ReplayRecord*> replayed;
    if (method_.kind == MethodKind::replay && buffer_ && buffer_->size() > 0) {
        const double ratio = method_.replay_mix / (1.0 - method_.replay_mix);
        const auto wanted = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(fresh)));
        replayed = buffer_->sample(replay_rng_, std::min(wanted, buffer_->size()));
    }

    if (replayed.empty()) {
        sgd_step(model, loss_and_grad(model, batch.inputs, batch.labels).grad, settings_.lr);
    } else {
        Matrix inputs(fresh + replayed.size(), width);
        std::vector<std::size_t> labels = batch.labels;
        std::copy(batch.inputs.data().begin(), batch.inputs.data().end(), inputs.data().begin());
        for (std::size_t r = 0; r < replayed.size(); ++r) {
            const auto src = replayed[r]->image.data();
            std::copy(src.begin(), src.end(), inputs.row(fresh + r).begin());
            labels.push_back(replayed[r]->label);
        }
        sgd_step(model, loss_and_grad(model, inputs, labels).grad, settings_.lr);
    }

    if (!buffer_) return;
    for (std::size_t r = 0; r < fresh; ++r) {
        Matrix img(1, width);
        std::copy(batch.inputs.row(r).begin(), batch.inputs.row(r).end(), img.data().begin());
        buffer_->push({std::move(img), batch.labels[r], batch.augmentation}, replay_rng_);
    }
}

void Trainer::train(Mlp& model, const BatchSource& source, std::size_t pool_size, const EpochHook& on_epoch_end) {
    if (pool_size == 0) throw Error(ErrorKind::invalid_argument, "cannot train on an empty pool");
    const bool merging = method_.kind == MethodKind::merge || method_.kind == MethodKind::average;
    const MergeRule rule = method_.kind == MethodKind::average ? MergeRule::full_average : MergeRule::top_p;
    if (merging && iteration_ == 0) merge_step(model, snapshots_, method_.merge_k, method_.merge_p, 0, rule);

    std::vector<std::size_t> order(pool_size);
    for (std::size_t epoch = 0; epoch < settings_.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order_rng_, std::span<std::size_t>(order));
        for (std::size_t start = 0; start < pool_size; start += settings_.batch_size) {
            const std::size_t n = std::min(settings_.batch_size, pool_size - start);
            const std::span<const std::size_t> indices(order.data() + start, n);
            step(model, source(model, indices, iteration_));
            ++iteration_;
            if (merging && merge_step(model, snapshots_, method_.merge_k, method_.merge_p, iteration_, rule)) ++merges_;
        }
        if (on_epoch_end) on_epoch_end(epoch, model);
    }
}

} // namespace augforget

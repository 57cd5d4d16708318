#pragma once

#include "augforget/data_aug.hpp"
#include "augforget/mitigation.hpp"
#include "augforget/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace augforget {

struct TrainSettings {
    std::size_t epochs = 5;
    std::size_t batch_size = 64;
    double lr = 0.05;
};

enum class MethodKind { vanilla, replay, merge, average };

struct MethodSpec {
    MethodKind kind = MethodKind::vanilla;
    /// Replay buffer capacity as a fraction of the training pool.
    double replay_fraction = 0.5;
    /// Share of every optimisation batch drawn from the buffer.
    double replay_mix = 0.5;
    double merge_p = 80.0;
    std::size_t merge_k = 100;

    static MethodSpec vanilla() { return {}; }
    static MethodSpec replay(double fraction) { return {MethodKind::replay, fraction}; }
    static MethodSpec merge(double p, std::size_t k) {
        MethodSpec m;
        m.kind = MethodKind::merge;
        m.merge_p = p;
        m.merge_k = k;
        return m;
    }
    static MethodSpec full_average(std::size_t k) {
        MethodSpec m = merge(100.0, k);
        m.kind = MethodKind::average;
        return m;
    }

    [[nodiscard]] std::string name() const;
    void validate() const;
};

MethodKind parse_method_kind(std::string_view name);

struct PolicySpec {
    bool targeted = false;
    double beta = 1.0;
    /// Steps between re-evaluations of the per-transform losses.
    std::size_t refresh = 50;
};

struct Batch {
    Matrix inputs;
    std::vector<std::size_t> labels;
    std::size_t augmentation = 0;
};

/// Builds the optimisation batch for the given pool indices at a step.
using BatchSource = std::function<Batch(const Mlp& model, std::span<const std::size_t> indices, std::size_t iteration)>;

/// Rows of a pre-transformed, flattened view of the pool.
BatchSource fixed_view_source(const Matrix& view, std::span<const std::size_t> labels, std::size_t augmentation = 0);

/// One transform per batch, drawn from `policy` over `set`. The targeted policy
/// re-scores every transform on the current batch each `refresh` steps.
BatchSource policy_source(const Dataset& pool, TransformSet set, PolicySpec policy, Rng aug_rng);

/// Carries method state (snapshot store, replay buffer, step counter) across phases.
class Trainer {
public:
    Trainer(MethodSpec method, TrainSettings settings, std::uint64_t seed);

    /// Starts recording every fresh sample into a reservoir of this capacity.
    void enable_replay_buffer(std::size_t capacity);
    [[nodiscard]] const ReplayBuffer* replay_buffer() const noexcept { return buffer_ ? &*buffer_ : nullptr; }

    /// Switches method for the next phase and restarts the phase-local step counter.
    void begin_phase(MethodSpec method, TrainSettings settings);

    using EpochHook = std::function<void(std::size_t epoch, const Mlp& model)>;

    /// Runs settings.epochs passes over pool indices [0, pool_size), reshuffled every epoch.
    void train(Mlp& model, const BatchSource& source, std::size_t pool_size, const EpochHook& on_epoch_end = {});

    [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }
    [[nodiscard]] std::size_t merges() const noexcept { return merges_; }
    [[nodiscard]] const MethodSpec& method() const noexcept { return method_; }
    [[nodiscard]] const SnapshotStore& snapshots() const noexcept { return snapshots_; }

private:
    void step(Mlp& model, const Batch& batch);

    MethodSpec method_;
    TrainSettings settings_;
    Rng order_rng_;
    Rng replay_rng_;
    std::optional<ReplayBuffer> buffer_;
    SnapshotStore snapshots_;
    std::size_t iteration_ = 0;
    std::size_t merges_ = 0;
};

} // namespace augforget

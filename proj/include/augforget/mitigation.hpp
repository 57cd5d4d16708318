#pragma once

#include "augforget/model.hpp"
#include "augforget/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace augforget {

// ---------------------------------------------------------------------------
// Drift-ranked selective merging

/// |θ_i − θ_s,i| for every coordinate.
std::vector<double> drift(std::span<const double> theta, std::span<const double> snapshot);

struct MergeMask {
    std::vector<std::uint8_t> bits;
    double p = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return bits.size(); }
    [[nodiscard]] std::size_t selected() const noexcept;
};

/// round(p·n/100) with halves rounded away from zero, at least 1.
std::size_t mask_count(std::size_t n, double p);

/// Marks the mask_count(d.size(), p) largest drifts; ties go to the lower index.
/// p must lie in (0, 100].
MergeMask top_p_mask(std::span<const double> d, double p);

/// Masked coordinates become (θ + θ_s) / 2, the rest are copied bit-for-bit.
std::vector<double> selective_merge(std::span<const double> theta, std::span<const double> snapshot,
                                    const MergeMask& mask);
void selective_merge_in_place(std::span<double> theta, std::span<const double> snapshot, const MergeMask& mask);

/// (θ + θ_s) / 2 on every coordinate, without ranking.
void full_average_in_place(std::span<double> theta, std::span<const double> snapshot);

struct Snapshot {
    std::vector<double> params;
    std::size_t iteration = 0;
};

class SnapshotStore {
public:
    void capture(const Mlp& model, std::size_t iteration);
    [[nodiscard]] bool has_snapshot() const noexcept { return snapshot_.has_value(); }
    [[nodiscard]] const Snapshot& snapshot() const;

private:
    std::optional<Snapshot> snapshot_;
};

enum class MergeRule {
    top_p,        ///< drift-ranked selective averaging
    full_average, ///< plain weight averaging, used as the p = 100 reference
};

/// Called with the number of completed optimisation steps. Iteration 0 (or an
/// empty store) only captures a snapshot. At positive multiples of k the live
/// weights are merged with the stored snapshot, which is then replaced by the
/// merged weights. Returns true when a merge happened.
bool merge_step(Mlp& model, SnapshotStore& store, std::size_t k, double p, std::size_t iteration,
                MergeRule rule = MergeRule::top_p);

// ---------------------------------------------------------------------------
// Exemplar replay

struct ReplayRecord {
    Matrix image;
    std::size_t label = 0;
    std::size_t augmentation = 0;
};

/// Fixed-capacity reservoir (Vitter's Algorithm R): after t pushes each pushed
/// record is held with probability capacity / t.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(ReplayRecord record, Rng& rng);

    /// m distinct stored records, uniformly without replacement.
    [[nodiscard]] std::vector<const ReplayRecord*> sample(Rng& rng, std::size_t m) const;

    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::size_t seen() const noexcept { return seen_; }
    [[nodiscard]] const std::vector<ReplayRecord>& records() const noexcept { return records_; }

private:
    std::size_t capacity_;
    std::size_t seen_ = 0;
    std::vector<ReplayRecord> records_;
};

} // namespace augforget

#include "augforget/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace augforget {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw Error(ErrorKind::shape_mismatch,
                    std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b));
    }
}

} // namespace

std::vector<double> drift(std::span<const double> theta, std::span<const double> snapshot) {
    require_same_length(theta.size(), snapshot.size(), "drift");
    std::vector<double> d(theta.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::fabs(theta[i] - snapshot[i]);
    return d;
}

std::size_t MergeMask::selected() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::size_t mask_count(std::size_t n, double p) {
    if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorKind::invalid_argument, "merge percentage must lie in (0, 100]");
    const auto c = static_cast<std::size_t>(std::llround(p * static_cast<double>(n) / 100.0));
    return std::clamp<std::size_t>(c, 1, std::max<std::size_t>(n, 1));
}

MergeMask top_p_mask(std::span<const double> d, double p) {
    if (d.empty()) throw Error(ErrorKind::invalid_argument, "top_p_mask needs at least one drift value");
    for (const double v : d) {
        if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "top_p_mask given a non-finite drift");
    }
    const std::size_t count = mask_count(d.size(), p);
    MergeMask mask{std::vector<std::uint8_t>(d.size(), 0), p};
    if (count == d.size()) {
        std::fill(mask.bits.begin(), mask.bits.end(), std::uint8_t{1});
        return mask;
    }
    const auto order = argsort_desc(d);
    for (std::size_t i = 0; i < count; ++i) mask.bits[order[i]] = 1;
    return mask;
}

void selective_merge_in_place(std::span<double> theta, std::span<const double> snapshot, const MergeMask& mask) {
    require_same_length(theta.size(), snapshot.size(), "selective_merge");
    require_same_length(theta.size(), mask.size(), "selective_merge mask");
    for (std::size_t i = 0; i < theta.size(); ++i)
        if (mask.bits[i]) theta[i] = (theta[i] + snapshot[i]) / 2.0;
}

std::vector<double> selective_merge(std::span<const double> theta, std::span<const double> snapshot,
                                    const MergeMask& mask) {
    std::vector<double> out(theta.begin(), theta.end());
    selective_merge_in_place(out, snapshot, mask);
    return out;
}

void full_average_in_place(std::span<double> theta, std::span<const double> snapshot) {
    require_same_length(theta.size(), snapshot.size(), "full_average");
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = (theta[i] + snapshot[i]) / 2.0;
}

void SnapshotStore::capture(const Mlp& model, std::size_t iteration) {
    snapshot_ = Snapshot{model.flat_params(), iteration};
}

const Snapshot& SnapshotStore::snapshot() const {
    if (!snapshot_) throw Error(ErrorKind::invalid_argument, "no snapshot has been captured");
    return *snapshot_;
}

bool merge_step(Mlp& model, SnapshotStore& store, std::size_t k, double p, std::size_t iteration, MergeRule rule) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "merge interval k must be >= 1");
    if (iteration == 0 || !store.has_snapshot()) {
        store.capture(model, iteration);
        return false;
    }
    if (iteration % k != 0) return false;

    const auto& snap = store.snapshot().params;
    auto theta = model.params();
    if (rule == MergeRule::full_average) {
        full_average_in_place(theta, snap);
    } else {
        const auto mask = top_p_mask(drift(theta, snap), p);
        selective_merge_in_place(theta, snap, mask);
    }
    store.capture(model, iteration);
    return true;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorKind::invalid_argument, "replay buffer capacity must be >= 1");
    records_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(ReplayRecord record, Rng& rng) {
    ++seen_;
    if (records_.size() < capacity_) {
        records_.push_back(std::move(record));
        return;
    }
    const auto j = static_cast<std::size_t>(rng.uniform_index(seen_));
    if (j < capacity_) records_[j] = std::move(record);
}

std::vector<const ReplayRecord*> ReplayBuffer::sample(Rng& rng, std::size_t m) const {
    if (records_.empty()) throw Error(ErrorKind::invalid_argument, "cannot sample from an empty replay buffer");
    if (m > records_.size()) {
        throw Error(ErrorKind::invalid_argument, "requested " + std::to_string(m) + " replay records, buffer holds " +
                                                     std::to_string(records_.size()));
    }
    std::vector<std::size_t> idx(records_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<const ReplayRecord*> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.push_back(&records_[idx[i]]);
    }
    return out;
}

} // namespace augforget

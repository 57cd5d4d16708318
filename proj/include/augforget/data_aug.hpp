#pragma once

#include "augforget/numerics.hpp"

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace augforget {

/// Labeled grayscale images with pixels in [0, 1].
struct Dataset {
    std::vector<Matrix> images;
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;

    [[nodiscard]] std::size_t size() const noexcept { return images.size(); }
    [[nodiscard]] bool empty() const noexcept { return images.empty(); }
    /// Pixels per image; 0 for an empty dataset.
    [[nodiscard]] std::size_t feature_count() const noexcept { return images.empty() ? 0 : images.front().size(); }

    /// Throws invalid_argument when any invariant (matching lengths, label range, pixel range) fails.
    void validate() const;
};

/// Reads an IDX image file and its label file. Gzip payloads (1F 8B prefix) are inflated
/// transparently. `limit` keeps only the first records; header counts are still checked in full.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t limit = std::numeric_limits<std::size_t>::max());

Dataset take_prefix(const Dataset& ds, std::size_t count);

/// Rows are the flattened images at `indices`, in that order.
Matrix flatten_batch(const Dataset& ds, std::span<const std::size_t> indices);
Matrix flatten_all(const Dataset& ds);

/// Rotates clockwise (as displayed, rows growing downwards) about ((W-1)/2, (H-1)/2).
/// Inverse mapping with bilinear interpolation; samples outside the source grid read as 0.
/// Multiples of 90 degrees use exact trigonometric values.
Matrix rotate(const Matrix& img, double angle_deg);
Matrix hflip(const Matrix& img);

enum class TransformKind { identity, rotate, hflip, gauss_noise, brightness };

struct Transform {
    TransformKind kind = TransformKind::identity;
    /// angle in degrees for rotate, stddev for gauss_noise, additive delta for brightness.
    double param = 0.0;

    static Transform identity() { return {}; }
    static Transform rotation(double angle_deg);
    static Transform flip() { return {TransformKind::hflip, 0.0}; }
    static Transform noise(double stddev);
    static Transform brightness(double delta);

    /// Parses "identity", "hflip", "rotate:<deg>", "noise:<std>", "brightness:<delta>".
    static Transform parse(std::string_view text);

    /// Inverse of parse(); also used as the column/row label in reports.
    [[nodiscard]] std::string label() const;

    friend bool operator==(const Transform&, const Transform&) = default;
};

/// Applies `t` and clamps to [0, 1]. Only gauss_noise consumes `rng`.
Matrix apply(const Transform& t, const Matrix& img, Rng& rng);

/// Ordered, non-empty list of transforms; index i is the identity used by policies.
class TransformSet {
public:
    explicit TransformSet(std::vector<Transform> transforms);

    /// Comma-separated list of Transform::parse tokens.
    static TransformSet parse(std::string_view text);

    [[nodiscard]] std::size_t size() const noexcept { return transforms_.size(); }
    [[nodiscard]] const Transform& operator[](std::size_t i) const { return transforms_.at(i); }
    [[nodiscard]] const std::vector<Transform>& transforms() const noexcept { return transforms_; }
    [[nodiscard]] std::string label() const;
    [[nodiscard]] bool overlaps(const TransformSet& other) const;

private:
    std::vector<Transform> transforms_;
};

/// identity, rotate ±15, rotate ±45, hflip, noise 0.1, brightness ±0.2 (n = 9).
TransformSet default_transform_set();

struct PolicyDistribution {
    std::vector<double> probs;
    double beta = 0.0;
};

PolicyDistribution policy_uniform(std::size_t n);
/// Softmax of -beta * loss over the transforms, evaluated with max-subtraction.
PolicyDistribution policy_targeted(std::span<const double> losses, double beta);
/// Natural-log entropy; zero-probability terms contribute 0.
double entropy(const PolicyDistribution& p);

/// One uniform draw, inverse CDF over p.probs.
std::pair<std::size_t, Transform> sample_transform(Rng& rng, const TransformSet& set, const PolicyDistribution& p);

/// Seven-segment style digit glyphs with random stroke width, scale, slant and offset.
Dataset make_synthetic_digits(Rng& rng, std::size_t count, std::size_t side = 28);

} // namespace augforget

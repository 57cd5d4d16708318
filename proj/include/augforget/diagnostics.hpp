#pragma once

#include "augforget/model.hpp"
#include "augforget/numerics.hpp"

#include <span>
#include <string>
#include <vector>

namespace augforget {

/// Cosine of the angle between two gradients. A zero-norm input has no
/// direction, so it is rejected with invalid_argument.
double cosine_alignment(std::span<const double> a, std::span<const double> b);
double cosine_alignment(const GradientVector& a, const GradientVector& b);

/// Fraction of coordinates whose signs differ. sign() takes values in {-1, 0, +1};
/// a zero facing a non-zero counts as a difference.
double sign_discrepancy(std::span<const double> a, std::span<const double> b);
double sign_discrepancy(const GradientVector& a, const GradientVector& b);

struct SdReport {
    std::vector<double> per_batch;
    double aggregated = 0.0;

    [[nodiscard]] std::size_t k() const noexcept { return per_batch.size(); }
};

/// Mean of sign_discrepancy(reference, g_b) over the k batches.
SdReport aggregated_sign_discrepancy(const GradientVector& reference, std::span<const GradientVector> batches);

/// Linear CKA between two feature matrices sharing the same n >= 2 rows
/// (samples); columns are features. Columns are centred first; the score is
/// ‖YᵀX‖²_F / (‖XᵀX‖_F ‖YᵀY‖_F), and 0 when either centred matrix vanishes.
double linear_cka(const Matrix& x, const Matrix& y);

struct CkaMatrix {
    Matrix values; ///< rows: layers of model A, cols: layers of model B
    std::vector<std::string> labels_a;
    std::vector<std::string> labels_b;

    [[nodiscard]] double diagonal_mean() const;
    /// Header row "layer,<labels_b...>", then one row per layer of model A.
    [[nodiscard]] std::vector<std::string> csv_header() const;
    [[nodiscard]] std::vector<std::vector<std::string>> csv_rows() const;
};

/// Layer labels used in CKA reports: fc1, fc2, ..., the last layer is "logits".
std::vector<std::string> layer_labels(const Mlp& model);

/// entry (i, j) = linear_cka(trace_a[i], trace_b[j]) on a shared probe batch.
CkaMatrix cka_matrix(const Mlp& a, const Mlp& b, const Matrix& probe);
CkaMatrix cka_matrix(const Mlp& a, const Mlp& b, const Dataset& probe);

/// First-order estimate g + M·δ of the gradient under an input shift δ.
/// m has one row per parameter and one column per input dimension.
GradientVector taylor_gradient(const GradientVector& g, const Matrix& m, std::span<const double> delta);

} // namespace augforget

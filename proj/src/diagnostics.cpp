#include "augforget/diagnostics.hpp"

#include "augforget/csv.hpp"

#include <cmath>

namespace augforget {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw Error(ErrorKind::shape_mismatch,
                    std::string(what) + " of vectors with lengths " + std::to_string(a) + " and " + std::to_string(b));
    }
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

Matrix centre_columns(const Matrix& m) {
    Matrix c = m;
    const double inv_n = 1.0 / static_cast<double>(m.rows());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
        mean *= inv_n;
        for (std::size_t i = 0; i < m.rows(); ++i) c(i, j) -= mean;
    }
    return c;
}

double frobenius_squared(const Matrix& m) {
    double s = 0.0;
    for (const double v : m.data()) s += v * v;
    return s;
}

// ‖AᵀB‖²_F for two n-row matrices.
double cross_norm_squared(const Matrix& a, const Matrix& b) {
    Matrix prod(a.cols(), b.cols());
    gemm_tn_accumulate(a.view(), b.view(), prod.data());
    return frobenius_squared(prod);
}

} // namespace

double cosine_alignment(std::span<const double> a, std::span<const double> b) {
    require_same_length(a.size(), b.size(), "cosine alignment");
    const double na2 = dot(a, a);
    const double nb2 = dot(b, b);
    if (na2 == 0.0 || nb2 == 0.0) {
        throw Error(ErrorKind::invalid_argument, "cosine alignment is undefined for a zero-norm gradient");
    }
    // sqrt(fl(s*s)) == s, so (g, g) and (g, -g) come out as exactly +1 and -1.
    const double c = dot(a, b) / std::sqrt(na2 * nb2);
    return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

double cosine_alignment(const GradientVector& a, const GradientVector& b) { return cosine_alignment(a.values, b.values); }

double sign_discrepancy(std::span<const double> a, std::span<const double> b) {
    require_same_length(a.size(), b.size(), "sign discrepancy");
    if (a.empty()) throw Error(ErrorKind::invalid_argument, "sign discrepancy of empty vectors");
    std::size_t differing = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (sign_of(a[i]) != sign_of(b[i])) ++differing;
    return static_cast<double>(differing) / static_cast<double>(a.size());
}

double sign_discrepancy(const GradientVector& a, const GradientVector& b) { return sign_discrepancy(a.values, b.values); }

SdReport aggregated_sign_discrepancy(const GradientVector& reference, std::span<const GradientVector> batches) {
    if (batches.empty()) throw Error(ErrorKind::invalid_argument, "aggregated sign discrepancy needs at least one batch");
    SdReport report;
    double total = 0.0;
    for (const auto& g : batches) {
        report.per_batch.push_back(sign_discrepancy(reference, g));
        total += report.per_batch.back();
    }
    report.aggregated = total / static_cast<double>(batches.size());
    return report;
}

double linear_cka(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows()) {
        throw Error(ErrorKind::shape_mismatch, "linear CKA of " + x.shape() + " and " + y.shape() + " (row counts differ)");
    }
    if (x.rows() < 2) throw Error(ErrorKind::invalid_argument, "linear CKA needs at least two samples");
    const Matrix xc = centre_columns(x);
    const Matrix yc = centre_columns(y);
    if (frobenius_squared(xc) == 0.0 || frobenius_squared(yc) == 0.0) return 0.0;
    const double cross = cross_norm_squared(yc, xc);
    const double self_x = std::sqrt(cross_norm_squared(xc, xc));
    const double self_y = std::sqrt(cross_norm_squared(yc, yc));
    return cross / (self_x * self_y);
}

double CkaMatrix::diagonal_mean() const {
    const std::size_t n = std::min(values.rows(), values.cols());
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values(i, i);
    return s / static_cast<double>(n);
}

std::vector<std::string> CkaMatrix::csv_header() const {
    std::vector<std::string> header{"layer"};
    header.insert(header.end(), labels_b.begin(), labels_b.end());
    return header;
}

std::vector<std::vector<std::string>> CkaMatrix::csv_rows() const {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < values.rows(); ++i) {
        std::vector<std::string> row{labels_a.at(i)};
        for (std::size_t j = 0; j < values.cols(); ++j) row.push_back(format_real(values(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::string> layer_labels(const Mlp& model) {
    std::vector<std::string> labels;
    for (std::size_t l = 0; l < model.layer_count(); ++l)
        labels.push_back(l + 1 == model.layer_count() ? "logits" : "fc" + std::to_string(l + 1));
    return labels;
}

CkaMatrix cka_matrix(const Mlp& a, const Mlp& b, const Matrix& probe) {
    if (a.layer_count() != b.layer_count()) {
        throw Error(ErrorKind::shape_mismatch, "CKA matrix needs models with the same number of layers");
    }
    if (probe.rows() < 2) throw Error(ErrorKind::invalid_argument, "CKA probe needs at least two samples");
    const auto ta = forward(a, probe).trace;
    const auto tb = forward(b, probe).trace;
    CkaMatrix out{Matrix(ta.layers.size(), tb.layers.size()), layer_labels(a), layer_labels(b)};
    for (std::size_t i = 0; i < ta.layers.size(); ++i)
        for (std::size_t j = 0; j < tb.layers.size(); ++j) out.values(i, j) = linear_cka(ta.layers[i], tb.layers[j]);
    return out;
}

CkaMatrix cka_matrix(const Mlp& a, const Mlp& b, const Dataset& probe) {
    if (probe.size() < 2) throw Error(ErrorKind::invalid_argument, "CKA probe needs at least two samples");
    return cka_matrix(a, b, flatten_all(probe));
}

GradientVector taylor_gradient(const GradientVector& g, const Matrix& m, std::span<const double> delta) {
    if (m.rows() != g.size() || m.cols() != delta.size()) {
        throw Error(ErrorKind::shape_mismatch, "taylor_gradient: M is " + m.shape() + ", gradient has " +
                                                   std::to_string(g.size()) + " entries, delta has " +
                                                   std::to_string(delta.size()));
    }
    GradientVector out{g.values, g.tag};
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * delta[j];
        out.values[i] += s;
    }
    return out;
}

} // namespace augforget

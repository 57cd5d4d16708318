#include "augforget/model.hpp"

#include <algorithm>
#include <cmath>

namespace augforget {

std::size_t parameter_count(std::span<const std::size_t> layer_sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    return n;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw Error(ErrorKind::invalid_argument, "an MLP needs at least two layer sizes");
    for (const auto s : sizes_) {
        if (s == 0) throw Error(ErrorKind::invalid_argument, "layer sizes must be positive");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(offset);
        offset += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
}

Mlp Mlp::init(std::vector<std::size_t> layer_sizes, Rng& rng) {
    Mlp m(std::move(layer_sizes));
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(m.sizes_[l]));
        const std::size_t count = m.sizes_[l] * m.sizes_[l + 1];
        for (std::size_t i = 0; i < count; ++i) m.params_[m.offsets_[l] + i] = stddev * rng.normal();
    }
    return m;
}

void Mlp::set_flat_params(std::span<const double> values) {
    if (values.size() != params_.size()) {
        throw Error(ErrorKind::shape_mismatch, "set_flat_params given " + std::to_string(values.size()) +
                                                   " values for " + std::to_string(params_.size()) + " parameters");
    }
    std::copy(values.begin(), values.end(), params_.begin());
}

MatrixView Mlp::weight(std::size_t layer) const {
    const std::size_t in = sizes_.at(layer);
    const std::size_t out = sizes_.at(layer + 1);
    return {in, out, std::span<const double>(params_).subspan(offsets_[layer], in * out)};
}

std::span<const double> Mlp::bias(std::size_t layer) const {
    return std::span<const double>(params_).subspan(bias_offset(layer), sizes_.at(layer + 1));
}

namespace {

void check_input(const Mlp& model, std::size_t cols) {
    if (cols != model.input_size()) {
        throw Error(ErrorKind::shape_mismatch, "batch width " + std::to_string(cols) + " does not match input size " +
                                                   std::to_string(model.input_size()));
    }
}

// z = h·W + b, optionally followed by ReLU.
Matrix dense(const Mlp& model, std::size_t layer, MatrixView h, bool relu) {
    const auto w = model.weight(layer);
    const auto b = model.bias(layer);
    Matrix z(h.rows, w.cols);
    for (std::size_t r = 0; r < h.rows; ++r) std::copy(b.begin(), b.end(), z.row(r).begin());
    gemm_accumulate(h, w, z.data());
    if (relu) {
        for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
    }
    return z;
}

std::size_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

void check_labels(const Mlp& model, std::size_t rows, std::span<const std::size_t> labels) {
    if (labels.size() != rows) {
        throw Error(ErrorKind::shape_mismatch,
                    std::to_string(labels.size()) + " labels for a batch of " + std::to_string(rows));
    }
    for (const auto y : labels) {
        if (y >= model.output_size()) {
            throw Error(ErrorKind::invalid_argument, "label " + std::to_string(y) + " outside model output width");
        }
    }
}

} // namespace

ForwardResult forward(const Mlp& model, const Matrix& batch) {
    check_input(model, batch.cols());
    ForwardResult result;
    MatrixView h = batch.view();
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const bool hidden = l + 1 < model.layer_count();
        result.trace.layers.push_back(dense(model, l, h, hidden));
        h = result.trace.layers.back().view();
    }
    result.logits = result.trace.layers.back();
    return result;
}

Matrix predict_logits(const Mlp& model, MatrixView batch) {
    check_input(model, batch.cols);
    Matrix current;
    MatrixView h = batch;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        current = dense(model, l, h, l + 1 < model.layer_count());
        h = current.view();
    }
    return current;
}

LossAndGrad loss_and_grad(const Mlp& model, const Matrix& batch, std::span<const std::size_t> labels) {
    const std::size_t rows = batch.rows();
    if (rows == 0) throw Error(ErrorKind::invalid_argument, "loss_and_grad on an empty batch");
    check_labels(model, rows, labels);
    const auto fwd = forward(model, batch);
    const auto& acts = fwd.trace.layers;
    const std::size_t classes = model.output_size();
    const double inv_rows = 1.0 / static_cast<double>(rows);

    LossAndGrad out;
    out.grad.values.assign(model.parameter_count(), 0.0);

    // delta = (softmax - onehot) / rows
    Matrix delta(rows, classes);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto z = fwd.logits.row(r);
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (const double v : z) sum += std::exp(v - m);
        const double lse = m + std::log(sum);
        total += lse - z[labels[r]];
        auto d = delta.row(r);
        for (std::size_t c = 0; c < classes; ++c) d[c] = std::exp(z[c] - lse) * inv_rows;
        d[labels[r]] -= inv_rows;
    }
    out.loss = total * inv_rows;

    auto grad = std::span<double>(out.grad.values);
    for (std::size_t l = model.layer_count(); l-- > 0;) {
        const MatrixView input = l == 0 ? batch.view() : acts[l - 1].view();
        const std::size_t in = model.layer_sizes()[l];
        const std::size_t width = model.layer_sizes()[l + 1];
        gemm_tn_accumulate(input, delta.view(), grad.subspan(model.weight_offset(l), in * width));
        auto gb = grad.subspan(model.bias_offset(l), width);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto d = delta.row(r);
            for (std::size_t c = 0; c < width; ++c) gb[c] += d[c];
        }
        if (l == 0) break;

        // Back through W (in x width) and the ReLU of the previous layer.
        const Matrix wt = transpose(model.weight(l));
        Matrix upstream(rows, in);
        gemm_accumulate(delta.view(), wt.view(), upstream.data());
        const auto prev = acts[l - 1].data();
        auto u = upstream.data();
        for (std::size_t i = 0; i < u.size(); ++i)
            if (!(prev[i] > 0.0)) u[i] = 0.0;
        delta = std::move(upstream);
    }
    return out;
}

double mean_loss(const Mlp& model, const Matrix& batch, std::span<const std::size_t> labels) {
    if (batch.rows() == 0) throw Error(ErrorKind::invalid_argument, "mean_loss on an empty batch");
    check_labels(model, batch.rows(), labels);
    const Matrix logits = predict_logits(model, batch.view());
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto z = logits.row(r);
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (const double v : z) sum += std::exp(v - m);
        total += m + std::log(sum) - z[labels[r]];
    }
    return total / static_cast<double>(logits.rows());
}

void sgd_step(Mlp& model, const GradientVector& grad, double lr) {
    if (grad.size() != model.parameter_count()) {
        throw Error(ErrorKind::shape_mismatch, "gradient of length " + std::to_string(grad.size()) + " for " +
                                                   std::to_string(model.parameter_count()) + " parameters");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::invalid_argument, "learning rate must be finite and >= 0");
    auto p = model.params();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad.values[i];
}

double accuracy(const Mlp& model, MatrixView inputs, std::span<const std::size_t> labels) {
    if (inputs.rows == 0) throw Error(ErrorKind::invalid_argument, "accuracy of an empty dataset is undefined");
    if (labels.size() != inputs.rows) {
        throw Error(ErrorKind::shape_mismatch, "accuracy given mismatched inputs and labels");
    }
    constexpr std::size_t chunk = 512;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < inputs.rows; start += chunk) {
        const std::size_t n = std::min(chunk, inputs.rows - start);
        const MatrixView part{n, inputs.cols, inputs.data.subspan(start * inputs.cols, n * inputs.cols)};
        const Matrix logits = predict_logits(model, part);
        for (std::size_t r = 0; r < n; ++r)
            if (argmax_row(logits.row(r)) == labels[start + r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(inputs.rows);
}

double accuracy(const Mlp& model, const Dataset& ds) {
    if (ds.empty()) throw Error(ErrorKind::invalid_argument, "accuracy of an empty dataset is undefined");
    if (ds.class_count > model.output_size()) {
        throw Error(ErrorKind::invalid_argument, "dataset has more classes than the model outputs");
    }
    const Matrix inputs = flatten_all(ds);
    return accuracy(model, inputs.view(), ds.labels);
}

} // namespace augforget

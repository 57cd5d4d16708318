#pragma once

#include "augforget/data_aug.hpp"
#include "augforget/numerics.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace augforget {

/// N = sum over layers of in*out + out.
std::size_t parameter_count(std::span<const std::size_t> layer_sizes);

/// Fully-connected classifier: ReLU on hidden layers, identity on the output.
///
/// All parameters live in one contiguous buffer in canonical order: for each
/// layer l, the weight matrix (in_l x out_l, row-major) followed by its bias
/// (out_l values). flat_params()/set_flat_params() and the checkpoint format
/// use exactly this order.
class Mlp {
public:
    /// All-zero parameters. Throws invalid_argument for < 2 sizes or a zero size.
    explicit Mlp(std::vector<std::size_t> layer_sizes);

    /// He initialisation: weights ~ N(0, 2 / fan_in), biases 0.
    static Mlp init(std::vector<std::size_t> layer_sizes, Rng& rng);

    [[nodiscard]] const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    [[nodiscard]] std::size_t layer_count() const noexcept { return sizes_.size() - 1; }
    [[nodiscard]] std::size_t input_size() const noexcept { return sizes_.front(); }
    [[nodiscard]] std::size_t output_size() const noexcept { return sizes_.back(); }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }

    [[nodiscard]] std::span<const double> params() const noexcept { return params_; }
    [[nodiscard]] std::span<double> params() noexcept { return params_; }

    [[nodiscard]] std::vector<double> flat_params() const { return params_; }
    void set_flat_params(std::span<const double> values);

    [[nodiscard]] MatrixView weight(std::size_t layer) const;
    [[nodiscard]] std::span<const double> bias(std::size_t layer) const;
    [[nodiscard]] std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
    [[nodiscard]] std::size_t bias_offset(std::size_t layer) const {
        return offsets_.at(layer) + sizes_[layer] * sizes_[layer + 1];
    }

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

struct GradientVector {
    std::vector<double> values;
    std::string tag;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
};

/// Post-activation outputs per layer (batch x width); the last entry is the logits.
struct ActivationTrace {
    std::vector<Matrix> layers;
};

struct ForwardResult {
    Matrix logits;
    ActivationTrace trace;
};

ForwardResult forward(const Mlp& model, const Matrix& batch);
/// Same numbers as forward(), without keeping the trace.
Matrix predict_logits(const Mlp& model, MatrixView batch);

struct LossAndGrad {
    double loss = 0.0;
    GradientVector grad;
};

/// Mean softmax cross-entropy and its exact gradient in canonical parameter order.
LossAndGrad loss_and_grad(const Mlp& model, const Matrix& batch, std::span<const std::size_t> labels);
double mean_loss(const Mlp& model, const Matrix& batch, std::span<const std::size_t> labels);

/// θ ← θ − lr·grad. lr must be finite and >= 0.
void sgd_step(Mlp& model, const GradientVector& grad, double lr);

/// Argmax accuracy; ties resolve to the lowest class index. Empty input → invalid_argument.
double accuracy(const Mlp& model, const Dataset& ds);
double accuracy(const Mlp& model, MatrixView inputs, std::span<const std::size_t> labels);

} // namespace augforget

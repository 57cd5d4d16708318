#pragma once

#include "augforget/data_aug.hpp"
#include "augforget/diagnostics.hpp"
#include "augforget/model.hpp"
#include "augforget/training.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace augforget {

// ---------------------------------------------------------------------------
// Data

struct DataSource {
    bool synthetic = false;
    /// Directory holding {train,t10k}-{images-idx3,labels-idx1}-ubyte, optionally gzipped.
    std::filesystem::path dir;
};

struct DataBundle {
    Dataset train;
    Dataset test;
    bool synthetic = false;
};

/// First `train_count` training and `test_count` test records. The synthetic
/// bundle is generated from `seed`; the MNIST bundle ignores it.
DataBundle load_data(const DataSource& source, std::size_t train_count, std::size_t test_count, std::uint64_t seed);

/// Applies one transform to every image (noise drawn from `rng`), flattened to rows.
Matrix transformed_view(const Dataset& ds, const Transform& t, Rng& rng);

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman_rho(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> values);

struct ModelShape {
    std::vector<std::size_t> hidden{256, 128};

    [[nodiscard]] std::vector<std::size_t> layer_sizes(std::size_t inputs, std::size_t classes) const;
};

// ---------------------------------------------------------------------------
// Evil twin: train on one rotation, retrain on another, measure forgetting.

struct EvilTwinConfig {
    std::uint64_t seed = 1;
    DataSource data;
    std::size_t pool_size = 10000;
    std::size_t eval_size = 2000;
    ModelShape shape;
    double first_angle = 45.0;
    std::vector<double> angles{45, 30, 15, 0, -15, -30, -45};
    TrainSettings first{5, 64, 0.05};
    TrainSettings second{3, 64, 0.05};
    std::size_t sd_batches = 10;
    MethodSpec method;
};

struct EvilTwinRow {
    double angle = 0.0;
    double acc_before = 0.0;
    double acc_after = 0.0;
    double forgetting = 0.0;
    double aggregated_sd = 0.0;
};

struct EvilTwinReport {
    std::vector<EvilTwinRow> rows;
    double spearman_rho = 0.0;

    [[nodiscard]] double mean_forgetting() const;
    /// Adjacent decreases of forgetting when rows are ordered by |angle - first_angle|.
    [[nodiscard]] std::size_t inversions(double first_angle) const;
};

EvilTwinReport run_evil_twin(const EvilTwinConfig& cfg);
EvilTwinReport run_evil_twin(const EvilTwinConfig& cfg, const DataBundle& data);

// ---------------------------------------------------------------------------
// Monte-Carlo gradient alignment under input noise, toy loss ½‖Aθ − x‖².

struct TaylorConfig {
    std::uint64_t seed = 1;
    std::vector<double> sigmas{0, 0.1, 0.5, 1, 2, 5};
    std::size_t samples = 100000;
    std::size_t dim = 16;
    /// A = scale · I unless `a` is given (dim x dim).
    double a_scale = 1.0;
    std::optional<Matrix> a;
};

struct TaylorPoint {
    double sigma = 0.0;
    double mean_cos = 0.0;
    double stderr_cos = 0.0;
};

std::vector<TaylorPoint> run_taylor_oracle(const TaylorConfig& cfg);

// ---------------------------------------------------------------------------
// Layer-wise CKA between a model trained on T1 and its continuation on T2.

struct CkaCompareConfig {
    std::uint64_t seed = 1;
    DataSource data;
    std::size_t pool_size = 10000;
    std::size_t probe_size = 512;
    ModelShape shape;
    TransformSet first_set = TransformSet::parse("rotate:15,rotate:45");
    TransformSet second_set = TransformSet::parse("rotate:-15,rotate:-45");
    TrainSettings first{5, 64, 0.05};
    TrainSettings second{3, 64, 0.05};
    std::vector<MethodSpec> methods{MethodSpec::vanilla(), MethodSpec::replay(0.5), MethodSpec::merge(80, 100)};
};

struct CkaComparison {
    std::string method; ///< "control" retrains on T1 with plain SGD
    CkaMatrix cka;
};

std::vector<CkaComparison> run_cka_compare(const CkaCompareConfig& cfg);
std::vector<CkaComparison> run_cka_compare(const CkaCompareConfig& cfg, const DataBundle& data);

// ---------------------------------------------------------------------------
// Random augmentation with and without forgetting countermeasures.

struct MethodComparisonConfig {
    std::uint64_t seed = 1;
    DataSource data;
    std::size_t pool_size = 10000;
    std::size_t eval_size = 2000;
    ModelShape shape;
    TransformSet transforms = default_transform_set();
    PolicySpec policy;
    TrainSettings train{5, 64, 0.05};
    std::vector<MethodSpec> methods{MethodSpec::vanilla(), MethodSpec::replay(0.5), MethodSpec::merge(80, 100)};
    std::size_t probe_size = 512;
};

struct MethodResult {
    std::string method;
    std::vector<double> view_accuracy; ///< one per transform, held-out images
    double clean_accuracy = 0.0;
    double mean_view_accuracy = 0.0;
    /// CKA diagonal mean between the model after epoch 1 and the final model.
    double cka_diagonal_mean = 0.0;
    std::vector<double> initial_params;
    Mlp final_model{std::vector<std::size_t>{1, 1}};
    /// Merge reference weights at the end of training (merge methods only).
    std::optional<std::vector<double>> snapshot;
};

struct MethodComparison {
    std::vector<std::string> view_labels;
    std::vector<MethodResult> results;
};

MethodComparison run_method_comparison(const MethodComparisonConfig& cfg);
MethodComparison run_method_comparison(const MethodComparisonConfig& cfg, const DataBundle& data);

struct AblationConfig {
    MethodComparisonConfig base;
    std::vector<double> p_grid{20, 40, 60, 80, 100};
    std::size_t merge_k = 100;
};

struct AblationRow {
    double p = 0.0;
    double accuracy = 0.0; ///< mean held-out view accuracy
};

/// One merge run per p, all sharing the base seed.
std::vector<AblationRow> run_merge_ablation(const AblationConfig& cfg);
std::vector<AblationRow> run_merge_ablation(const AblationConfig& cfg, const DataBundle& data);

} // namespace augforget

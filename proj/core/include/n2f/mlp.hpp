#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "n2f/filters.hpp"

namespace n2f {

/// One hidden layer of sigmoids feeding a sigmoid output:
/// out = s(sum_k a_k s(sum_i H_ki z_i - b_k) - b0).
struct MLPParams {
    std::size_t n_hidden = 0;
    std::size_t n_inputs = 0;
    std::vector<double> hidden_weights;  // H, row-major [n_hidden][n_inputs]
    std::vector<double> hidden_bias;     // b
    std::vector<double> output_weights;  // a
    double output_bias = 0.0;            // b0

    MLPParams() = default;
    MLPParams(std::size_t n_hidden, std::size_t n_inputs);

    [[nodiscard]] double weight(std::size_t k, std::size_t i) const noexcept { return hidden_weights[k * n_inputs + i]; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return n_hidden * n_inputs + 2 * n_hidden + 1; }

    /// [H (row-major), b, a, b0].
    [[nodiscard]] std::vector<double> flatten() const;
    static MLPParams unflatten(std::size_t n_hidden, std::size_t n_inputs, std::span<const double> theta);

    void validate() const;
    friend bool operator==(const MLPParams&, const MLPParams&) = default;
};

/// Affine maps into network space: z~_i = z_i * in_scale[i] + in_offset[i] and
/// t~ = t * out_scale + out_offset.
struct ScalingRecord {
    std::vector<double> in_scale;
    std::vector<double> in_offset;
    double out_scale = 1.0;
    double out_offset = 0.0;

    static ScalingRecord identity(std::size_t n_inputs);
    void validate() const;
    friend bool operator==(const ScalingRecord&, const ScalingRecord&) = default;
};

inline double sigmoid(double t) noexcept { return 1.0 / (1.0 + std::exp(-t)); }

/// Network output for already scaled inputs, in network space.
double mlp_forward_scaled(const MLPParams& p, std::span<const double> z_scaled);
/// d(mlp_forward_scaled)/d(theta) in flatten() order.
std::vector<double> mlp_parameter_gradient(const MLPParams& p, std::span<const double> z_scaled);
/// Scales z, evaluates the network and maps the output back to target units.
double mlp_forward(const MLPParams& p, const ScalingRecord& scale, std::span<const double> z);

/// Rows [0, n_train) train, the remaining rows validate.
struct TrainingSet {
    std::size_t n_features = 0;
    std::size_t n_train = 0;
    std::vector<double> inputs;   // row-major [rows][n_features]
    std::vector<double> targets;

    [[nodiscard]] std::size_t rows() const noexcept { return targets.size(); }
    [[nodiscard]] std::size_t n_validation() const noexcept { return rows() - n_train; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
        return {inputs.data() + r * n_features, n_features};
    }
};

struct LmaOptions {
    double initial_damping = 1e-2;
    double damping_factor = 10.0;
    std::size_t patience = 25;
    std::size_t max_iterations = 200;
};

struct LmaIteration {
    double train_loss = 0.0;       // mean squared error in network space
    double validation_loss = 0.0;
    double damping = 0.0;
};

struct TrainReport {
    std::vector<LmaIteration> iterations;  // one per accepted step
    double initial_train_loss = 0.0;
    double initial_validation_loss = 0.0;
    double best_validation_loss = 0.0;
    std::size_t best_iteration = 0;        // 0 = initial parameters, i = after accepted step i
    std::size_t rejected_steps = 0;
    std::string stop_reason;
};

struct TrainResult {
    MLPParams params;
    ScalingRecord scaling;
    TrainReport report;
};

/// Inputs are standardized per feature and targets mapped onto [0.05, 0.95],
/// both from the training rows. Levenberg-Marquardt on the mean squared error;
/// the parameters with the lowest validation error are returned.
TrainResult train_lma(const TrainingSet& data, std::size_t n_hidden, std::uint64_t seed, const LmaOptions& options = {});

/// The network with its input scaling folded into the filters, ready to be
/// applied to FBP reconstructions with the learned filters.
struct LearnedFilters {
    std::vector<Filter> filters;       // one per hidden unit
    std::vector<double> hidden_bias;   // b_k after folding the input offsets
    std::vector<double> output_weights;
    double output_bias = 0.0;
    double out_scale = 1.0;
    double out_offset = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return filters.size(); }
    /// Output in target units from the N_h filtered reconstructions at one point.
    [[nodiscard]] double combine(std::span<const double> hidden_inputs) const;
};

LearnedFilters extract_filters(const MLPParams& p, const ExpBinBasis& basis, const ScalingRecord& scale);

} // namespace n2f

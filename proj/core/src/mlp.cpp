#include "n2f/mlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "n2f/errors.hpp"

namespace n2f {

namespace {
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    bool all_finite_(std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    }

    // Network-space inputs and targets of one set of rows.
    struct ScaledRows {
        RowMatrix z;
        Eigen::VectorXd t;
    };

    ScaledRows scale_rows_(const TrainingSet& data, const ScalingRecord& s, std::size_t begin, std::size_t end) {
        ScaledRows out;
        const auto n = static_cast<Eigen::Index>(end - begin);
        const auto f = static_cast<Eigen::Index>(data.n_features);
        out.z.resize(n, f);
        out.t.resize(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto row = data.row(begin + static_cast<std::size_t>(r));
            for (Eigen::Index i = 0; i < f; ++i)
                out.z(r, i) = row[static_cast<std::size_t>(i)] * s.in_scale[static_cast<std::size_t>(i)] +
                              s.in_offset[static_cast<std::size_t>(i)];
            out.t(r) = data.targets[begin + static_cast<std::size_t>(r)] * s.out_scale + s.out_offset;
        }
        return out;
    }

    // Residuals (output - target) and, when jac is given, the Jacobian rows.
    Eigen::VectorXd evaluate_(const MLPParams& p, const ScaledRows& rows, RowMatrix* jac) {
        const auto n = rows.z.rows();
        const auto nh = static_cast<Eigen::Index>(p.n_hidden);
        const auto ne = static_cast<Eigen::Index>(p.n_inputs);
        const Eigen::Map<const RowMatrix> h_weights(p.hidden_weights.data(), nh, ne);
        const Eigen::Map<const Eigen::VectorXd> b(p.hidden_bias.data(), nh);
        const Eigen::Map<const Eigen::VectorXd> a(p.output_weights.data(), nh);

        RowMatrix hidden = rows.z * h_weights.transpose();
        hidden.rowwise() -= b.transpose();
        hidden = hidden.unaryExpr([](double x) { return sigmoid(x); });
        Eigen::VectorXd out = (hidden * a).array() - p.output_bias;
        out = out.unaryExpr([](double x) { return sigmoid(x); });

        if (jac) {
            jac->resize(n, static_cast<Eigen::Index>(p.parameter_count()));
            for (Eigen::Index r = 0; r < n; ++r) {
                const double s = out(r) * (1.0 - out(r));
                auto row = jac->row(r);
                for (Eigen::Index k = 0; k < nh; ++k) {
                    const double hk = hidden(r, k);
                    const double dk = s * a(k) * hk * (1.0 - hk);
                    for (Eigen::Index i = 0; i < ne; ++i)
                        row(k * ne + i) = dk * rows.z(r, i);
                    row(nh * ne + k) = -dk;
                    row(nh * ne + nh + k) = s * hk;
                }
                row(nh * ne + 2 * nh) = -s;
            }
        }
        return out - rows.t;
    }

    double mse_(const Eigen::VectorXd& r) {
        return r.size() == 0 ? 0.0 : r.squaredNorm() / static_cast<double>(r.size());
    }
}

MLPParams::MLPParams(std::size_t n_hidden_, std::size_t n_inputs_)
    : n_hidden(n_hidden_), n_inputs(n_inputs_), hidden_weights(n_hidden_ * n_inputs_, 0.0),
      hidden_bias(n_hidden_, 0.0), output_weights(n_hidden_, 0.0) {}

std::vector<double> MLPParams::flatten() const {
    std::vector<double> theta;
    theta.reserve(parameter_count());
    theta.insert(theta.end(), hidden_weights.begin(), hidden_weights.end());
    theta.insert(theta.end(), hidden_bias.begin(), hidden_bias.end());
    theta.insert(theta.end(), output_weights.begin(), output_weights.end());
    theta.push_back(output_bias);
    return theta;
}

MLPParams MLPParams::unflatten(std::size_t n_hidden, std::size_t n_inputs, std::span<const double> theta) {
    MLPParams p(n_hidden, n_inputs);
    if (theta.size() != p.parameter_count())
        throw std::invalid_argument("MLPParams::unflatten: parameter count mismatch");
    auto it = theta.begin();
    std::copy_n(it, p.hidden_weights.size(), p.hidden_weights.begin());
    it += static_cast<long>(p.hidden_weights.size());
    std::copy_n(it, n_hidden, p.hidden_bias.begin());
    it += static_cast<long>(n_hidden);
    std::copy_n(it, n_hidden, p.output_weights.begin());
    it += static_cast<long>(n_hidden);
    p.output_bias = *it;
    return p;
}

void MLPParams::validate() const {
    if (n_hidden == 0 || n_inputs == 0)
        throw std::invalid_argument("MLPParams: empty network");
    if (hidden_weights.size() != n_hidden * n_inputs || hidden_bias.size() != n_hidden ||
        output_weights.size() != n_hidden)
        throw std::invalid_argument("MLPParams: array sizes do not match the layer sizes");
    if (!all_finite_(hidden_weights) || !all_finite_(hidden_bias) || !all_finite_(output_weights) ||
        !std::isfinite(output_bias))
        throw std::invalid_argument("MLPParams: non-finite parameter");
}

ScalingRecord ScalingRecord::identity(std::size_t n_inputs) {
    ScalingRecord s;
    s.in_scale.assign(n_inputs, 1.0);
    s.in_offset.assign(n_inputs, 0.0);
    return s;
}

void ScalingRecord::validate() const {
    if (in_scale.size() != in_offset.size())
        throw std::invalid_argument("ScalingRecord: scale and offset sizes differ");
    for (double s : in_scale)
        if (s == 0.0 || !std::isfinite(s))
            throw std::invalid_argument("ScalingRecord: input scales must be finite and non-zero");
    if (out_scale == 0.0 || !std::isfinite(out_scale) || !std::isfinite(out_offset) || !all_finite_(in_offset))
        throw std::invalid_argument("ScalingRecord: invalid output map");
}

double mlp_forward_scaled(const MLPParams& p, std::span<const double> z) {
    if (z.size() != p.n_inputs)
        throw std::invalid_argument("mlp_forward: input length does not match the network");
    double pre_out = -p.output_bias;
    for (std::size_t k = 0; k < p.n_hidden; ++k) {
        double pre = -p.hidden_bias[k];
        for (std::size_t i = 0; i < p.n_inputs; ++i)
            pre += p.weight(k, i) * z[i];
        pre_out += p.output_weights[k] * sigmoid(pre);
    }
    return sigmoid(pre_out);
}

std::vector<double> mlp_parameter_gradient(const MLPParams& p, std::span<const double> z) {
    if (z.size() != p.n_inputs)
        throw std::invalid_argument("mlp_parameter_gradient: input length does not match the network");
    const std::size_t nh = p.n_hidden;
    const std::size_t ne = p.n_inputs;
    std::vector<double> hidden(nh);
    double pre_out = -p.output_bias;
    for (std::size_t k = 0; k < nh; ++k) {
        double pre = -p.hidden_bias[k];
        for (std::size_t i = 0; i < ne; ++i)
            pre += p.weight(k, i) * z[i];
        hidden[k] = sigmoid(pre);
        pre_out += p.output_weights[k] * hidden[k];
    }
    const double out = sigmoid(pre_out);
    const double s = out * (1.0 - out);
    std::vector<double> grad(p.parameter_count());
    for (std::size_t k = 0; k < nh; ++k) {
        const double dk = s * p.output_weights[k] * hidden[k] * (1.0 - hidden[k]);
        for (std::size_t i = 0; i < ne; ++i)
            grad[k * ne + i] = dk * z[i];
        grad[nh * ne + k] = -dk;
        grad[nh * ne + nh + k] = s * hidden[k];
    }
    grad[nh * ne + 2 * nh] = -s;
    return grad;
}

double mlp_forward(const MLPParams& p, const ScalingRecord& scale, std::span<const double> z) {
    if (z.size() != p.n_inputs || scale.in_scale.size() != p.n_inputs)
        throw std::invalid_argument("mlp_forward: input length does not match the network");
    std::vector<double> scaled(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        scaled[i] = z[i] * scale.in_scale[i] + scale.in_offset[i];
    return (mlp_forward_scaled(p, scaled) - scale.out_offset) / scale.out_scale;
}

TrainResult train_lma(const TrainingSet& data, std::size_t n_hidden, std::uint64_t seed, const LmaOptions& options) {
    if (n_hidden == 0 || data.n_features == 0)
        throw std::invalid_argument("train_lma: network must have at least one input and one hidden unit");
    if (data.inputs.size() != data.rows() * data.n_features || data.n_train > data.rows())
        throw std::invalid_argument("train_lma: malformed training set");
    const std::size_t n_params = n_hidden * data.n_features + 2 * n_hidden + 1;
    if (data.n_train < 10 * n_params)
        throw std::invalid_argument("train_lma: need at least 10 training rows per parameter (" +
                                    std::to_string(10 * n_params) + ")");
    if (!all_finite_(data.inputs) || !all_finite_(data.targets))
        throw std::invalid_argument("train_lma: non-finite training data");

    TrainResult result;
    ScalingRecord& scaling = result.scaling;
    scaling.in_scale.resize(data.n_features);
    scaling.in_offset.resize(data.n_features);
    const double n_train = static_cast<double>(data.n_train);
    for (std::size_t i = 0; i < data.n_features; ++i) {
        double mean = 0.0;
        for (std::size_t r = 0; r < data.n_train; ++r)
            mean += data.row(r)[i];
        mean /= n_train;
        double var = 0.0;
        for (std::size_t r = 0; r < data.n_train; ++r) {
            const double d = data.row(r)[i] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / n_train);
        scaling.in_scale[i] = sd > 0.0 ? 1.0 / sd : 1.0;
        scaling.in_offset[i] = -mean * scaling.in_scale[i];
    }
    const auto [t_lo, t_hi] = std::minmax_element(data.targets.begin(), data.targets.begin() + static_cast<long>(data.n_train));
    if (!(*t_hi > *t_lo))
        throw DegenerateData("train_lma: training targets are constant");
    scaling.out_scale = 0.9 / (*t_hi - *t_lo);
    scaling.out_offset = 0.05 - *t_lo * scaling.out_scale;

    const ScaledRows train = scale_rows_(data, scaling, 0, data.n_train);
    const ScaledRows validation = scale_rows_(data, scaling, data.n_train, data.rows());

    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(data.n_features));
    std::uniform_real_distribution<double> init(-bound, bound);
    std::vector<double> theta(n_params);
    for (double& v : theta)
        v = init(rng);
    MLPParams params = MLPParams::unflatten(n_hidden, data.n_features, theta);

    TrainReport& report = result.report;
    RowMatrix jac;
    Eigen::VectorXd residual = evaluate_(params, train, &jac);
    double loss = mse_(residual);
    double val_loss = validation.t.size() > 0 ? mse_(evaluate_(params, validation, nullptr)) : loss;
    report.initial_train_loss = loss;
    report.initial_validation_loss = val_loss;
    report.best_validation_loss = val_loss;
    MLPParams best = params;

    const auto np = static_cast<Eigen::Index>(n_params);
    double damping = options.initial_damping;
    std::size_t stale = 0;
    report.stop_reason = "max_iterations";
    while (report.iterations.size() < options.max_iterations) {
        Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(np, np);
        normal.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose(), 1.0 / n_train);
        normal = normal.selfadjointView<Eigen::Lower>();
        const Eigen::VectorXd gradient = jac.transpose() * residual / n_train;

        bool accepted = false;
        MLPParams candidate;
        Eigen::VectorXd candidate_residual;
        double candidate_loss = loss;
        while (damping < 1e12) {
            Eigen::MatrixXd system = normal;
            system.diagonal().array() += damping;
            const Eigen::VectorXd step = system.ldlt().solve(-gradient);
            if (!step.allFinite()) {
                damping *= options.damping_factor;
                ++report.rejected_steps;
                continue;
            }
            std::vector<double> next = params.flatten();
            for (Eigen::Index i = 0; i < np; ++i)
                next[static_cast<std::size_t>(i)] += step(i);
            candidate = MLPParams::unflatten(n_hidden, data.n_features, next);
            candidate_residual = evaluate_(candidate, train, nullptr);
            candidate_loss = mse_(candidate_residual);
            if (candidate_loss < loss) {
                accepted = true;
                damping /= options.damping_factor;
                break;
            }
            damping *= options.damping_factor;
            ++report.rejected_steps;
        }
        if (!accepted) {
            report.stop_reason = "converged";
            break;
        }
        params = std::move(candidate);
        residual = evaluate_(params, train, &jac);
        loss = mse_(residual);
        val_loss = validation.t.size() > 0 ? mse_(evaluate_(params, validation, nullptr)) : loss;
        report.iterations.push_back({loss, val_loss, damping});
        if (val_loss < report.best_validation_loss) {
            report.best_validation_loss = val_loss;
            report.best_iteration = report.iterations.size();
            best = params;
            stale = 0;
        } else if (++stale >= options.patience) {
            report.stop_reason = "patience";
            break;
        }
    }
    result.params = std::move(best);
    return result;
}

double LearnedFilters::combine(std::span<const double> x) const {
    if (x.size() != filters.size())
        throw std::invalid_argument("LearnedFilters::combine: one value per filter is required");
    double pre = -output_bias;
    for (std::size_t k = 0; k < x.size(); ++k)
        pre += output_weights[k] * sigmoid(x[k] - hidden_bias[k]);
    return (sigmoid(pre) - out_offset) / out_scale;
}

LearnedFilters extract_filters(const MLPParams& p, const ExpBinBasis& basis, const ScalingRecord& scale) {
    p.validate();
    scale.validate();
    if (p.n_inputs != basis.size() || scale.in_scale.size() != basis.size())
        throw std::invalid_argument("extract_filters: basis size does not match the network");
    LearnedFilters out;
    out.output_weights = p.output_weights;
    out.output_bias = p.output_bias;
    out.out_scale = scale.out_scale;
    out.out_offset = scale.out_offset;
    std::vector<double> coeffs(p.n_inputs);
    for (std::size_t k = 0; k < p.n_hidden; ++k) {
        double bias = p.hidden_bias[k];
        for (std::size_t i = 0; i < p.n_inputs; ++i) {
            coeffs[i] = p.weight(k, i) * scale.in_scale[i];
            bias -= p.weight(k, i) * scale.in_offset[i];
        }
        out.filters.push_back(expand_filter(basis, coeffs));
        out.hidden_bias.push_back(bias);
    }
    return out;
}

} // namespace n2f

#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "n2f/errors.hpp"
#include "n2f/mlp.hpp"

using namespace n2f;

namespace {

MLPParams random_params(std::size_t h, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.7);
    MLPParams p(h, n);
    std::vector<double> theta(p.parameter_count());
    for (double& v : theta)
        v = nd(rng);
    return MLPParams::unflatten(h, n, theta);
}

// Rows z ~ N(0, 1) with targets from a fixed teacher network plus optional noise.
TrainingSet teacher_data(const MLPParams& teacher, std::size_t n_train, std::size_t n_val, double noise,
                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    TrainingSet set;
    set.n_features = teacher.n_inputs;
    set.n_train = n_train;
    for (std::size_t r = 0; r < n_train + n_val; ++r) {
        std::vector<double> z(teacher.n_inputs);
        for (double& v : z)
            v = 3.0 * nd(rng) + 1.0;
        set.inputs.insert(set.inputs.end(), z.begin(), z.end());
        set.targets.push_back(mlp_forward(teacher, ScalingRecord::identity(teacher.n_inputs), z) + noise * nd(rng));
    }
    return set;
}

} // namespace

TEST_CASE("parameter vectors round-trip through flatten", "[mlp]") {
    const MLPParams p = random_params(3, 5, 1);
    CHECK(p.parameter_count() == 3 * 5 + 2 * 3 + 1);
    const std::vector<double> theta = p.flatten();
    CHECK(theta.size() == p.parameter_count());
    CHECK(theta[2 * 5 + 1] == p.weight(2, 1));
    CHECK(theta[15 + 1] == p.hidden_bias[1]);
    CHECK(theta[18 + 2] == p.output_weights[2]);
    CHECK(theta.back() == p.output_bias);
    CHECK(MLPParams::unflatten(3, 5, theta) == p);
    CHECK_THROWS_AS(MLPParams::unflatten(3, 5, std::vector<double>(4)), std::invalid_argument);
}

TEST_CASE("forward pass follows the two-layer sigmoid formula", "[mlp]") {
    const MLPParams p = random_params(2, 3, 4);
    const std::vector<double> z{0.3, -1.2, 2.0};
    double pre = -p.output_bias;
    for (std::size_t k = 0; k < 2; ++k) {
        double h = -p.hidden_bias[k];
        for (std::size_t i = 0; i < 3; ++i)
            h += p.weight(k, i) * z[i];
        pre += p.output_weights[k] * (1.0 / (1.0 + std::exp(-h)));
    }
    CHECK(mlp_forward_scaled(p, z) == Approx(1.0 / (1.0 + std::exp(-pre))));

    ScalingRecord s = ScalingRecord::identity(3);
    s.in_scale = {2.0, 0.5, 1.0};
    s.in_offset = {0.1, 0.0, -1.0};
    s.out_scale = 4.0;
    s.out_offset = 0.2;
    const std::vector<double> zs{0.3 * 2.0 + 0.1, -0.6, 1.0};
    CHECK(mlp_forward(p, s, z) == Approx((mlp_forward_scaled(p, zs) - 0.2) / 4.0));
    CHECK_THROWS_AS(mlp_forward_scaled(p, std::vector<double>(2)), std::invalid_argument);
}

TEST_CASE("analytic parameter gradient matches central differences", "[mlp]") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    for (int probe = 0; probe < 20; ++probe) {
        const MLPParams p = random_params(4, 6, 100 + probe);
        std::vector<double> z(6);
        for (double& v : z)
            v = nd(rng);
        const std::vector<double> grad = mlp_parameter_gradient(p, z);
        std::vector<double> theta = p.flatten();
        const double h = 1e-6;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double keep = theta[j];
            theta[j] = keep + h;
            const double up = mlp_forward_scaled(MLPParams::unflatten(4, 6, theta), z);
            theta[j] = keep - h;
            const double down = mlp_forward_scaled(MLPParams::unflatten(4, 6, theta), z);
            theta[j] = keep;
            const double fd = (up - down) / (2.0 * h);
            CHECK(std::abs(grad[j] - fd) <= 1e-4 * std::max(1e-3, std::abs(fd)));
        }
    }
}

TEST_CASE("training recovers a teacher network", "[mlp]") {
    const MLPParams teacher = random_params(3, 4, 7);
    const TrainingSet data = teacher_data(teacher, 2000, 200, 0.0, 8);
    const TrainResult r = train_lma(data, 3, 1);
    // The student's output mapping differs from the teacher's, so a small residual remains.
    CHECK(r.report.best_validation_loss < 3e-3 * r.report.initial_validation_loss);
    CHECK(r.report.best_validation_loss < 5e-4);
    double worst = 0.0;
    for (std::size_t row = data.n_train; row < data.rows(); ++row)
        worst = std::max(worst, std::abs(mlp_forward(r.params, r.scaling, data.row(row)) - data.targets[row]));
    double range = 0.0;
    for (double t : data.targets)
        range = std::max(range, std::abs(t));
    CHECK(worst < 0.05 * range);
}

TEST_CASE("training fits a linear map", "[mlp]") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    TrainingSet data;
    data.n_features = 3;
    data.n_train = 1000;
    for (std::size_t r = 0; r < 1100; ++r) {
        const double a = nd(rng);
        const double b = nd(rng);
        const double c = nd(rng);
        data.inputs.insert(data.inputs.end(), {a, b, c});
        data.targets.push_back(0.2 * a - 0.1 * b + 0.05 * c + 3.0);
    }
    const TrainResult r = train_lma(data, 2, 5);
    const std::vector<double> probe{0.5, -0.5, 1.0};
    CHECK(mlp_forward(r.params, r.scaling, probe) == Approx(0.2 * 0.5 + 0.05 + 0.05 + 3.0).margin(2e-2));
}

TEST_CASE("training keeps the best validation checkpoint", "[mlp]") {
    const MLPParams teacher = random_params(4, 5, 21);
    // Few noisy rows so that validation error eventually rises.
    const TrainingSet data = teacher_data(teacher, 300, 300, 0.05, 22);
    LmaOptions opts;
    opts.patience = 10;
    const TrainResult r = train_lma(data, 4, 3, opts);
    double best = r.report.initial_validation_loss;
    std::size_t best_it = 0;
    for (std::size_t i = 0; i < r.report.iterations.size(); ++i)
        if (r.report.iterations[i].validation_loss < best) {
            best = r.report.iterations[i].validation_loss;
            best_it = i + 1;
        }
    CHECK(r.report.best_validation_loss == best);
    CHECK(r.report.best_iteration == best_it);
    for (std::size_t i = 1; i < r.report.iterations.size(); ++i)
        CHECK(r.report.iterations[i].train_loss < r.report.iterations[i - 1].train_loss);
    // Re-evaluating the returned parameters reproduces the best validation loss.
    double val = 0.0;
    for (std::size_t row = data.n_train; row < data.rows(); ++row) {
        const double out = mlp_forward(r.params, r.scaling, data.row(row));
        const double d = (out - data.targets[row]) * r.scaling.out_scale;
        val += d * d;
    }
    val /= static_cast<double>(data.n_validation());
    CHECK(val == Approx(best).epsilon(1e-9));
    CHECK(!r.report.stop_reason.empty());
}

TEST_CASE("training is deterministic in the seed", "[mlp]") {
    const MLPParams teacher = random_params(2, 3, 5);
    const TrainingSet data = teacher_data(teacher, 400, 40, 0.01, 6);
    const TrainResult a = train_lma(data, 2, 9);
    const TrainResult b = train_lma(data, 2, 9);
    CHECK(a.params == b.params);
    CHECK(a.scaling == b.scaling);
    CHECK_FALSE(train_lma(data, 2, 10).params == a.params);
}

TEST_CASE("training rejects unusable data", "[mlp]") {
    const MLPParams teacher = random_params(2, 3, 5);
    TrainingSet data = teacher_data(teacher, 400, 40, 0.0, 6);
    CHECK_THROWS_AS(train_lma(data, 40, 1), std::invalid_argument);
    CHECK_THROWS_AS(train_lma(data, 0, 1), std::invalid_argument);
    TrainingSet flat = data;
    std::fill(flat.targets.begin(), flat.targets.end(), 2.0);
    CHECK_THROWS_AS(train_lma(flat, 2, 1), DegenerateData);
    TrainingSet bad = data;
    bad.inputs[5] = std::nan("");
    CHECK_THROWS_AS(train_lma(bad, 2, 1), std::invalid_argument);
}

TEST_CASE("folded filters reproduce the network on basis responses", "[mlp]") {
    const ExpBinBasis basis = make_basis(20);
    const MLPParams p = random_params(3, basis.size(), 31);
    ScalingRecord s = ScalingRecord::identity(basis.size());
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        s.in_scale[i] = u(rng);
        s.in_offset[i] = u(rng) - 1.0;
    }
    s.out_scale = 0.3;
    s.out_offset = 0.1;
    const LearnedFilters lf = extract_filters(p, basis, s);
    REQUIRE(lf.size() == 3);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> z(basis.size());
        for (double& v : z)
            v = nd(rng);
        // Hidden input k is the filter's knot coefficients dotted with the basis responses.
        std::vector<double> hidden(3, 0.0);
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t i = 0; i < basis.size(); ++i)
                hidden[k] += lf.filters[k].at(static_cast<long>(basis.knots[i])) * z[i];
        CHECK(lf.combine(hidden) == Approx(mlp_forward(p, s, z)).epsilon(1e-12));
    }
}

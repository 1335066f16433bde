#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "n2f/errors.hpp"
#include "n2f/phantom.hpp"

using namespace n2f;

TEST_CASE("foam balls never overlap and stay inside the cylinder", "[phantom]") {
    FoamConfig cfg = default_foam_config(64, 17);
    cfg.n_balls = 300;
    const FoamPhantom p = generate_foam(cfg);
    REQUIRE(p.balls.size() == 300);
    const double r_min = cfg.min_radius_fraction * cfg.cylinder_radius;
    const double r_max = cfg.max_radius_fraction * cfg.cylinder_radius;
    for (std::size_t i = 0; i < p.balls.size(); ++i) {
        const Ball& a = p.balls[i];
        CHECK(a.radius >= r_min);
        CHECK(a.radius <= r_max);
        CHECK(std::hypot(a.center.x, a.center.y) + a.radius <= cfg.cylinder_radius + 1e-12);
        CHECK(std::abs(a.center.z) + a.radius <= cfg.cylinder_half_height + 1e-12);
        for (std::size_t j = i + 1; j < p.balls.size(); ++j) {
            const Ball& b = p.balls[j];
            const double d = std::sqrt(std::pow(a.center.x - b.center.x, 2) + std::pow(a.center.y - b.center.y, 2) +
                                       std::pow(a.center.z - b.center.z, 2));
            CHECK(d >= a.radius + b.radius);
        }
    }
}

TEST_CASE("foam generation is deterministic in the seed", "[phantom]") {
    FoamConfig cfg = default_foam_config(32, 5);
    cfg.n_balls = 50;
    CHECK(generate_foam(cfg) == generate_foam(cfg));
    FoamConfig other = cfg;
    other.seed = 6;
    CHECK_FALSE(generate_foam(cfg).balls == generate_foam(other).balls);
}

TEST_CASE("overfull foam reports that it cannot be packed", "[phantom]") {
    FoamConfig cfg = default_foam_config(32, 1);
    cfg.n_balls = 100000;
    cfg.min_radius_fraction = 0.3;
    cfg.max_radius_fraction = 0.35;
    CHECK_THROWS_AS(generate_foam(cfg), CapacityExceeded);
    cfg.max_radius_fraction = 0.2;
    CHECK_THROWS_AS(generate_foam(cfg), std::invalid_argument);
}

TEST_CASE("analytic projections match exact chord lengths", "[phantom]") {
    FoamPhantom p;
    p.cylinder_radius = 10.0;
    p.cylinder_half_height = 8.0;
    p.density = 0.5;
    p.balls = {Ball{{2.0, -1.0, 1.5}, 3.0}};
    Geometry g = make_parallel_geometry(5, 24, 32);
    const Sinogram s = project_foam(p, g, 1);
    for (std::size_t a = 0; a < g.n_angles(); ++a) {
        const double ca = std::cos(g.angles[a]);
        const double sa = std::sin(g.angles[a]);
        for (std::size_t r = 0; r < g.det_rows; ++r) {
            const double z = g.z_of(static_cast<double>(r));
            for (std::size_t c = 0; c < g.det_cols; ++c) {
                const double t = g.t_of(static_cast<double>(c));
                double len = 0.0;
                if (std::abs(z) < p.cylinder_half_height && std::abs(t) < p.cylinder_radius)
                    len += 2.0 * std::sqrt(100.0 - t * t);
                const double dt = t - (2.0 * ca - 1.0 * sa);
                const double d2 = dt * dt + (z - 1.5) * (z - 1.5);
                if (d2 < 9.0)
                    len -= 2.0 * std::sqrt(9.0 - d2);
                CHECK(s.at(a, r, c) == Approx(0.5 * len).margin(1e-5));
            }
        }
    }
}

TEST_CASE("analytic and voxelized projections agree", "[phantom]") {
    const n2f::Scenario& sc = fixtures::small_scenario();
    const Sinogram numeric = forward_project(sc.truth, sc.geometry);
    CHECK(fixtures::rel_l2(numeric.data, sc.clean.data) <= 0.02);
}

TEST_CASE("voxelization preserves the solid volume", "[phantom]") {
    FoamPhantom p;
    p.cylinder_radius = 12.0;
    p.cylinder_half_height = 10.0;
    p.density = 2.0;
    p.balls = {Ball{{0.0, 0.0, 0.0}, 5.0}};
    const Volume v = voxelize_foam(p, {32, 32, 32});
    double total = 0.0;
    for (float x : v.data)
        total += x;
    const double exact = 2.0 * (std::numbers::pi * 144.0 * 20.0 - 4.0 / 3.0 * std::numbers::pi * 125.0);
    CHECK(total == Approx(exact).epsilon(0.01));
    CHECK(v.at(16, 16, 16) == 0.0f);
    CHECK(v.at(16, 16, 5) == 0.0f);
    CHECK(v.at(16, 16, 24) == 2.0f);
}

TEST_CASE("Poisson noise has the expected moments", "[phantom]") {
    const Geometry g = make_parallel_geometry(64, 32, 64);
    Sinogram s = Sinogram::zeros(g);
    std::fill(s.data.begin(), s.data.end(), 0.5f);
    const double i0 = 1000.0;
    const Sinogram noisy = apply_poisson_noise(s, {i0, 3});
    double mean = 0.0;
    double sq = 0.0;
    for (float v : noisy.data) {
        const double c = i0 * std::exp(-static_cast<double>(v));
        mean += c;
        sq += c * c;
    }
    const double n = static_cast<double>(noisy.data.size());
    mean /= n;
    const double var = sq / n - mean * mean;
    const double expected = i0 * std::exp(-0.5);
    CHECK(mean == Approx(expected).epsilon(0.005));
    CHECK(var == Approx(expected).epsilon(0.03));
}

TEST_CASE("Poisson noise is reproducible and validated", "[phantom]") {
    const Geometry g = make_parallel_geometry(8, 4, 8);
    Sinogram s = Sinogram::zeros(g);
    std::fill(s.data.begin(), s.data.end(), 1.0f);
    CHECK(apply_poisson_noise(s, {500, 9}).data == apply_poisson_noise(s, {500, 9}).data);
    CHECK(apply_poisson_noise(s, {500, 9}).data != apply_poisson_noise(s, {500, 10}).data);
    s.data[3] = -1.0f;
    CHECK_THROWS_AS(apply_poisson_noise(s, {500, 9}), std::invalid_argument);
    s.data[3] = 0.0f;
    CHECK_THROWS_AS(apply_poisson_noise(s, {0.0, 9}), std::invalid_argument);
    // A fully absorbing ray clamps to one count.
    s.data[3] = 80.0f;
    CHECK(apply_poisson_noise(s, {500, 1}).data[3] == Approx(std::log(500.0)));
}

TEST_CASE("density calibration hits the target absorption", "[phantom]") {
    FoamConfig cfg = default_foam_config(32, 2);
    cfg.n_balls = 40;
    const FoamPhantom p = generate_foam(cfg);
    const Geometry g = make_parallel_geometry(32, 32, 48);
    for (double target : {0.05, 0.1, 0.4}) {
        const FoamPhantom cal = calibrate_density(p, g, target);
        CHECK(mean_absorption(project_foam(cal, g, 2)) == Approx(target).epsilon(1e-4));
        CHECK(calibrate_density(cal, g, target).density == Approx(cal.density).epsilon(1e-12));
    }
    CHECK(calibrate_density(p, g, 0.0).density == 0.0);
    CHECK_THROWS_AS(calibrate_density(p, g, 1.0), std::invalid_argument);
}

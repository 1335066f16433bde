#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "n2f/metrics.hpp"
#include "n2f/noise2filter.hpp"
#include "n2f/phantom.hpp"

namespace n2f {

/// Desk-scale simulation: n^3 foam in a cylinder, n rows by 1.5 n columns.
struct DeskConfig {
    std::size_t n = 128;
    std::size_t n_angles = 256;
    std::size_t det_cols = 192;
    std::size_t n_balls = 1000;
    double absorption = 0.10;
    std::size_t supersampling = 2;
};

struct Scenario {
    Geometry geometry;  // as recorded, cor_shift 0
    FoamPhantom phantom;
    Volume truth;
    Sinogram clean;     // acquired with the true rotation-axis offset
    double true_cor_shift = 0.0;
};

/// Generates, calibrates, projects and voxelizes one phantom. With a non-zero
/// true_cor_shift the projections are taken with the rotation axis offset by
/// that many columns while the recorded geometry still claims 0.
Scenario make_scenario(const DeskConfig& desk, std::uint64_t phantom_seed, double true_cor_shift = 0.0);

Sinogram noisy_copy(const Scenario& scenario, double photon_count, std::uint64_t seed);

/// Deterministic seed mixing for benchmark streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

/// Ortho-slice reconstructions of a dataset.
std::array<SliceImage, 3> fbp_ortho(const Sinogram& s, const Filter& f, const BackprojectOptions& options = {});
std::array<SliceImage, 3> n2f_ortho(const N2FModel& model, const FilteredStack& cache,
                                    const BackprojectOptions& options = {});

/// One result row. setting names the varied quantity (e.g. "splits=3").
struct BenchRow {
    std::string method;
    std::string setting;
    double photon_count = 0.0;
    std::size_t trial = 0;
    double param = 0.0;  // chosen baseline parameter, when any
    Scores scores;
    double seconds = 0.0;
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const BenchRow& row);

struct AccuracyOptions {
    DeskConfig desk;
    std::vector<double> photon_counts{1000, 2000, 4000, 8000, 16000, 32000};
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    std::uint64_t train_phantom_seed = 100;
    std::uint64_t test_phantom_seed = 200;
    std::vector<double> sigma_grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
    std::vector<double> fsc_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    N2FConfig n2f;
    std::function<void(const BenchRow&)> on_row;
};

/// FBP, FBP with the best Gaussian and frequency-scaled filters, learned filters
/// and supervised NN-FBP for one noisy test dataset (five rows).
std::vector<BenchRow> accuracy_trial(const Scenario& test, const Scenario& train, double photon_count,
                                     std::size_t trial, const AccuracyOptions& options);
std::vector<BenchRow> bench_accuracy(const AccuracyOptions& options);

struct HyperOptions {
    DeskConfig desk;
    double photon_count = 1000;
    std::vector<std::size_t> splits{2, 3, 4, 5, 6};
    std::vector<Strategy> strategies{Strategy::x1, Strategy::one_x};
    std::size_t trials = 5;
    std::uint64_t seed = 0;
    std::uint64_t phantom_seed = 200;
    N2FConfig n2f;
    std::function<void(const BenchRow&)> on_row;
};
std::vector<BenchRow> bench_hyper(const HyperOptions& options);

struct VoxelOptions {
    DeskConfig desk;
    double photon_count = 1000;
    std::vector<std::size_t> n_train_list{1000, 5000, 10000, 50000, 100000};
    std::size_t trials = 5;
    std::uint64_t seed = 0;
    std::uint64_t phantom_seed = 200;
    N2FConfig n2f;
    std::function<void(const BenchRow&)> on_row;
};
std::vector<BenchRow> bench_voxels(const VoxelOptions& options);

struct TimingReport {
    std::size_t n_e = 0;
    std::size_t n_hidden = 0;
    double prepare_seconds = 0.0;
    double train_seconds = 0.0;
    double fbp_slice_ms = 0.0;
    double n2f_slice_ms = 0.0;
    std::size_t slices = 0;

    [[nodiscard]] double ratio() const noexcept { return fbp_slice_ms > 0.0 ? n2f_slice_ms / fbp_slice_ms : 0.0; }
};

/// Mean per-slice wall-clock of FBP (one cached filter) and learned filters over
/// n_slices random orientations through the volume center, caches warm.
TimingReport time_slices(const N2FModel& model, const Sinogram& s, std::size_t n_slices, std::uint64_t seed);
TimingReport bench_timing(const DeskConfig& desk, std::size_t n_slices, std::uint64_t seed);

/// Ortho-slice SSIM of reconstructions at each trial rotation-axis offset.
std::vector<Scores> cor_sweep(const N2FModel& model, const FilteredStack& cache, const Volume& truth,
                              const std::vector<double>& shifts);

/// Random unit-axis slice of the given size through the origin.
SliceOrientation random_orientation(std::size_t size, std::uint64_t seed);

} // namespace n2f

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "n2f/fbp.hpp"
#include "n2f/filters.hpp"
#include "n2f/geometry.hpp"
#include "n2f/mlp.hpp"
#include "n2f/projector.hpp"

namespace n2f {

/// x1: inputs from one subset, target from the mean of the others.
/// one_x: inputs averaged over the other subsets, target from one subset.
enum class Strategy { x1, one_x };

std::string_view to_string(Strategy s);
/// Accepts "x1", "X:1", "1x", "1:X".
Strategy parse_strategy(std::string_view name);

/// Data shape a model was trained for. The rotation-axis offset is not part of
/// it: a model applies unchanged to any cor_shift.
struct GeometryFingerprint {
    std::size_t n_angles = 0;
    std::size_t det_rows = 0;
    std::size_t det_cols = 0;
    std::vector<std::size_t> knots;

    static GeometryFingerprint of(const Geometry& g, const ExpBinBasis& basis);
    [[nodiscard]] bool matches(const Geometry& g) const noexcept;
    friend bool operator==(const GeometryFingerprint&, const GeometryFingerprint&) = default;
};

struct N2FModel {
    std::string method = "n2f";  // "n2f" or "nnfbp"
    MLPParams params;
    ScalingRecord scaling;
    ExpBinBasis basis;
    LearnedFilters learned;
    Strategy strategy = Strategy::one_x;
    std::size_t n_splits = 3;
    std::size_t n_train = 0;
    std::uint64_t seed = 0;
    GeometryFingerprint fingerprint;
    double train_seconds = 0.0;
    double best_validation_loss = 0.0;

    /// Fingerprints of learned.filters, in order.
    [[nodiscard]] std::vector<std::uint64_t> filter_fingerprints() const;
    /// A short stable identifier derived from the filters.
    [[nodiscard]] std::string version() const;
};

/// Cube with the detector row count as side length.
VolumeShape reconstruction_shape(const Geometry& g);

/// Subset FBPs on a set of planes: targets[p][j] = FBP(y_j, h) and
/// inputs[p][j][i] = FBP(y_j, e_i), plus the complement means over l != j.
struct PrepData {
    std::size_t n_splits = 0;
    std::size_t n_features = 0;
    std::vector<SliceOrientation> planes;
    std::vector<std::vector<SliceImage>> targets;
    std::vector<std::vector<std::vector<SliceImage>>> inputs;
    std::vector<std::vector<SliceImage>> complement_targets;
    std::vector<std::vector<std::vector<SliceImage>>> complement_inputs;
    /// Number of subset slice backprojections performed.
    std::size_t backprojections = 0;

    [[nodiscard]] std::size_t pixels_per_subset() const noexcept;
};

PrepData prepare_data(const Sinogram& s, std::size_t n_splits, const ExpBinBasis& basis, const Filter& target_filter,
                      std::span<const SliceOrientation> planes);
/// On the three ortho-slices of reconstruction_shape(s.geometry).
PrepData prepare_data(const Sinogram& s, std::size_t n_splits, const ExpBinBasis& basis, const Filter& target_filter);

/// Location of one sampled training row.
struct SampleSite {
    std::size_t plane = 0;
    std::size_t subset = 0;
    std::size_t pixel = 0;
};

struct VoxelSample {
    TrainingSet set;
    std::vector<SampleSite> sites;  // one per row
};

/// round(0.1 n_train) validation rows beyond the n_train training rows.
std::size_t validation_rows(std::size_t n_train);

/// Draws n_train + validation_rows(n_train) distinct (plane, subset, pixel)
/// sites uniformly and builds rows for the strategy.
VoxelSample sample_voxels(const PrepData& prep, Strategy strategy, std::size_t n_train, std::uint64_t seed);

struct N2FConfig {
    std::size_t n_splits = 3;
    Strategy strategy = Strategy::one_x;
    std::size_t n_train = 50'000;
    std::size_t n_hidden = 4;
    std::uint64_t seed = 0;
    LmaOptions lma;
};

struct TrainingTimes {
    double prepare_seconds = 0.0;
    double train_seconds = 0.0;
};

/// Self-supervised training from one noisy sinogram.
N2FModel train_noise2filter(const Sinogram& s, const N2FConfig& config, TrainingTimes* times = nullptr);

/// Supervised training on a separate dataset with a known volume. Inputs are
/// full-data basis reconstructions on the ortho-slices plus extra axial planes
/// at z = +-n/4; targets are the volume sampled at the same pixels. n_splits and
/// strategy in the config are ignored.
N2FModel train_nnfbp_supervised(const Sinogram& noisy, const Volume& truth, const N2FConfig& config);

/// Caches the model's learned filters applied to s.
FilteredStack build_cache(const N2FModel& model, const Sinogram& s);

/// Backprojects every cached filter onto o and combines them per pixel.
/// Throws std::invalid_argument when the cache was not built for this model.
SliceImage reconstruct_slice_n2f(const N2FModel& model, const FilteredStack& cache, const SliceOrientation& o,
                                 const BackprojectOptions& options = {});

/// Per-pixel network output on basis reconstructions of the same slice; the
/// reference path for reconstruct_slice_n2f.
SliceImage mlp_on_basis_slices(const N2FModel& model, std::span<const SliceImage> basis_slices);

} // namespace n2f

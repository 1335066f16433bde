#include "n2f/noise2filter.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "n2f/errors.hpp"

namespace n2f {

namespace {
    using clock_ = std::chrono::steady_clock;

    double seconds_since_(clock_::time_point start) {
        return std::chrono::duration<double>(clock_::now() - start).count();
    }

    SliceImage mean_of_others_(const std::vector<SliceImage>& per_subset, std::size_t j) {
        SliceImage out = SliceImage::zeros(per_subset[j].orientation);
        const double w = 1.0 / static_cast<double>(per_subset.size() - 1);
        for (std::size_t l = 0; l < per_subset.size(); ++l) {
            if (l == j)
                continue;
            for (std::size_t i = 0; i < out.data.size(); ++i)
                out.data[i] += per_subset[l].data[i];
        }
        for (double& v : out.data)
            v *= w;
        return out;
    }

    // k distinct indices from [0, population), uniformly, in draw order.
    std::vector<std::size_t> draw_distinct_(std::size_t population, std::size_t k, std::uint64_t seed) {
        if (k > population)
            throw std::invalid_argument("sample_voxels: requested " + std::to_string(k) + " rows but only " +
                                        std::to_string(population) + " sites are available");
        std::vector<std::size_t> index(population);
        for (std::size_t i = 0; i < population; ++i)
            index[i] = i;
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, population - 1);
            std::swap(index[i], index[pick(rng)]);
        }
        index.resize(k);
        return index;
    }

    N2FModel finish_model_(const TrainingSet& set, const Geometry& g, const ExpBinBasis& basis,
                           const N2FConfig& config, TrainingTimes* times) {
        const auto start = clock_::now();
        TrainResult trained = train_lma(set, config.n_hidden, config.seed, config.lma);
        N2FModel model;
        model.params = std::move(trained.params);
        model.scaling = std::move(trained.scaling);
        model.basis = basis;
        model.learned = extract_filters(model.params, basis, model.scaling);
        model.strategy = config.strategy;
        model.n_splits = config.n_splits;
        model.n_train = config.n_train;
        model.seed = config.seed;
        model.fingerprint = GeometryFingerprint::of(g, basis);
        model.best_validation_loss = trained.report.best_validation_loss;
        if (times)
            times->train_seconds = seconds_since_(start);
        return model;
    }
}

std::string_view to_string(Strategy s) {
    return s == Strategy::x1 ? "x1" : "1x";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "x1" || name == "X:1" || name == "X1")
        return Strategy::x1;
    if (name == "1x" || name == "1:X" || name == "1X")
        return Strategy::one_x;
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "' (expected x1 or 1x)");
}

GeometryFingerprint GeometryFingerprint::of(const Geometry& g, const ExpBinBasis& basis) {
    return {g.n_angles(), g.det_rows, g.det_cols, basis.knots};
}

bool GeometryFingerprint::matches(const Geometry& g) const noexcept {
    return n_angles == g.n_angles() && det_rows == g.det_rows && det_cols == g.det_cols &&
           !knots.empty() && knots.back() + 1 == g.det_cols;
}

std::vector<std::uint64_t> N2FModel::filter_fingerprints() const {
    std::vector<std::uint64_t> out;
    for (const Filter& f : learned.filters)
        out.push_back(f.fingerprint());
    return out;
}

std::string N2FModel::version() const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t f : filter_fingerprints()) {
        h ^= f;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 12);
}

VolumeShape reconstruction_shape(const Geometry& g) {
    return {g.det_rows, g.det_rows, g.det_rows};
}

std::size_t PrepData::pixels_per_subset() const noexcept {
    std::size_t n = 0;
    for (const SliceOrientation& o : planes)
        n += o.pixel_count();
    return n;
}

PrepData prepare_data(const Sinogram& s, std::size_t n_splits, const ExpBinBasis& basis, const Filter& target_filter,
                      std::span<const SliceOrientation> planes) {
    s.validate();
    if (n_splits < 2)
        throw std::invalid_argument("prepare_data: at least two splits are required");
    if (planes.empty())
        throw std::invalid_argument("prepare_data: no planes given");
    const AngularSplit split = split_angles(s.geometry, n_splits);

    PrepData prep;
    prep.n_splits = n_splits;
    prep.n_features = basis.size();
    prep.planes.assign(planes.begin(), planes.end());
    const std::size_t np = planes.size();
    prep.targets.assign(np, std::vector<SliceImage>(n_splits));
    prep.inputs.assign(np, std::vector<std::vector<SliceImage>>(n_splits, std::vector<SliceImage>(basis.size())));

    // Each filter is applied once to the whole sinogram; subsets only select
    // angles at backprojection time.
    for (std::size_t f = 0; f <= basis.size(); ++f) {
        const Filter filter = f == 0 ? target_filter : basis_element(basis, f - 1);
        const Sinogram filtered = convolve_sinogram(s, filter);
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t j = 0; j < n_splits; ++j) {
                SliceImage img = backproject_subset_slice(filtered, split, j, planes[p], SubsetMode::single);
                ++prep.backprojections;
                if (f == 0)
                    prep.targets[p][j] = std::move(img);
                else
                    prep.inputs[p][j][f - 1] = std::move(img);
            }
    }

    prep.complement_targets.resize(np);
    prep.complement_inputs.assign(np, std::vector<std::vector<SliceImage>>(n_splits));
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t j = 0; j < n_splits; ++j)
            prep.complement_targets[p].push_back(mean_of_others_(prep.targets[p], j));
        for (std::size_t i = 0; i < basis.size(); ++i) {
            std::vector<SliceImage> per_subset;
            for (std::size_t j = 0; j < n_splits; ++j)
                per_subset.push_back(prep.inputs[p][j][i]);
            for (std::size_t j = 0; j < n_splits; ++j)
                prep.complement_inputs[p][j].push_back(mean_of_others_(per_subset, j));
        }
    }
    return prep;
}

PrepData prepare_data(const Sinogram& s, std::size_t n_splits, const ExpBinBasis& basis, const Filter& target_filter) {
    const auto planes = ortho_slices(reconstruction_shape(s.geometry));
    return prepare_data(s, n_splits, basis, target_filter, planes);
}

std::size_t validation_rows(std::size_t n_train) {
    return static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n_train)));
}

VoxelSample sample_voxels(const PrepData& prep, Strategy strategy, std::size_t n_train, std::uint64_t seed) {
    if (prep.n_splits < 2 || prep.planes.empty())
        throw std::invalid_argument("sample_voxels: empty preparation data");
    const std::size_t per_subset = prep.pixels_per_subset();
    const std::size_t total = n_train + validation_rows(n_train);
    const std::vector<std::size_t> draws = draw_distinct_(prep.n_splits * per_subset, total, seed);

    VoxelSample out;
    TrainingSet& set = out.set;
    set.n_features = prep.n_features;
    set.n_train = n_train;
    set.inputs.reserve(total * prep.n_features);
    set.targets.reserve(total);
    out.sites.reserve(total);
    for (std::size_t u : draws) {
        SampleSite site;
        site.subset = u / per_subset;
        std::size_t rest = u % per_subset;
        while (rest >= prep.planes[site.plane].pixel_count()) {
            rest -= prep.planes[site.plane].pixel_count();
            ++site.plane;
        }
        site.pixel = rest;
        const auto& inputs = strategy == Strategy::x1 ? prep.inputs[site.plane][site.subset]
                                                      : prep.complement_inputs[site.plane][site.subset];
        const SliceImage& target = strategy == Strategy::x1 ? prep.complement_targets[site.plane][site.subset]
                                                            : prep.targets[site.plane][site.subset];
        for (const SliceImage& img : inputs)
            set.inputs.push_back(img.data[site.pixel]);
        set.targets.push_back(target.data[site.pixel]);
        out.sites.push_back(site);
    }
    return out;
}

N2FModel train_noise2filter(const Sinogram& s, const N2FConfig& config, TrainingTimes* times) {
    if (config.n_hidden == 0 || config.n_train == 0)
        throw std::invalid_argument("train_noise2filter: n_hidden and n_train must be positive");
    const auto start = clock_::now();
    const std::size_t hw = default_half_width(s.geometry);
    const ExpBinBasis basis = make_basis(hw);
    const PrepData prep = prepare_data(s, config.n_splits, basis, ram_lak(hw, 1.0));
    const VoxelSample sample = sample_voxels(prep, config.strategy, config.n_train, config.seed);
    if (times)
        times->prepare_seconds = seconds_since_(start);
    N2FModel model = finish_model_(sample.set, s.geometry, basis, config, times);
    model.method = "n2f";
    model.train_seconds = seconds_since_(start);
    return model;
}

N2FModel train_nnfbp_supervised(const Sinogram& noisy, const Volume& truth, const N2FConfig& config) {
    noisy.validate();
    truth.validate();
    const auto start = clock_::now();
    const std::size_t hw = default_half_width(noisy.geometry);
    const ExpBinBasis basis = make_basis(hw);

    std::vector<SliceOrientation> planes;
    for (const SliceOrientation& o : ortho_slices(truth.shape, truth.voxel_size))
        planes.push_back(o);
    const double quarter = 0.25 * static_cast<double>(truth.shape.nz) * truth.voxel_size;
    for (double z : {-quarter, quarter}) {
        SliceOrientation o = ortho_slice(truth.shape, OrthoPlane::axial, truth.voxel_size);
        o.origin.z = z;
        planes.push_back(o);
    }

    std::vector<std::vector<SliceImage>> inputs(planes.size());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const Sinogram filtered = convolve_sinogram(noisy, basis_element(basis, i));
        for (std::size_t p = 0; p < planes.size(); ++p)
            inputs[p].push_back(backproject_slice(filtered, planes[p]));
    }
    std::vector<SliceImage> targets;
    std::vector<std::size_t> offsets{0};
    for (const SliceOrientation& o : planes) {
        targets.push_back(sample_volume(truth, o));
        offsets.push_back(offsets.back() + o.pixel_count());
    }

    const std::size_t total = config.n_train + validation_rows(config.n_train);
    const std::vector<std::size_t> draws = draw_distinct_(offsets.back(), total, config.seed);
    TrainingSet set;
    set.n_features = basis.size();
    set.n_train = config.n_train;
    for (std::size_t u : draws) {
        std::size_t p = 0;
        while (u >= offsets[p + 1])
            ++p;
        const std::size_t pixel = u - offsets[p];
        for (const SliceImage& img : inputs[p])
            set.inputs.push_back(img.data[pixel]);
        set.targets.push_back(targets[p].data[pixel]);
    }
    N2FModel model = finish_model_(set, noisy.geometry, basis, config, nullptr);
    model.method = "nnfbp";
    model.n_splits = 1;
    model.train_seconds = seconds_since_(start);
    return model;
}

FilteredStack build_cache(const N2FModel& model, const Sinogram& s) {
    if (!model.fingerprint.matches(s.geometry))
        throw std::invalid_argument("build_cache: model was trained for a different geometry");
    return filter_and_cache(s, model.learned.filters);
}

SliceImage reconstruct_slice_n2f(const N2FModel& model, const FilteredStack& cache, const SliceOrientation& o,
                                 const BackprojectOptions& options) {
    const auto fingerprints = model.filter_fingerprints();
    if (cache.size() != fingerprints.size() ||
        !std::equal(fingerprints.begin(), fingerprints.end(), cache.filter_fingerprints().begin()))
        throw std::invalid_argument("reconstruct_slice_n2f: cache was not built from this model's filters");
    if (!model.fingerprint.matches(cache.geometry()))
        throw std::invalid_argument("reconstruct_slice_n2f: model was trained for a different geometry");

    std::vector<SliceImage> hidden;
    hidden.reserve(cache.size());
    for (std::size_t k = 0; k < cache.size(); ++k)
        hidden.push_back(cache.backproject(k, o, options));
    SliceImage out = SliceImage::zeros(o);
    std::vector<double> x(cache.size());
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        for (std::size_t k = 0; k < x.size(); ++k)
            x[k] = hidden[k].data[i];
        out.data[i] = model.learned.combine(x);
    }
    return out;
}

SliceImage mlp_on_basis_slices(const N2FModel& model, std::span<const SliceImage> basis_slices) {
    if (basis_slices.size() != model.params.n_inputs)
        throw std::invalid_argument("mlp_on_basis_slices: one slice per basis element is required");
    SliceImage out = SliceImage::zeros(basis_slices.front().orientation);
    std::vector<double> z(basis_slices.size());
    for (std::size_t p = 0; p < out.data.size(); ++p) {
        for (std::size_t i = 0; i < z.size(); ++i)
            z[i] = basis_slices[i].data[p];
        out.data[p] = mlp_forward(model.params, model.scaling, z);
    }
    return out;
}

} // namespace n2f

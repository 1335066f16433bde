#include "n2f/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace n2f {

namespace {
    using clock_ = std::chrono::steady_clock;

    double seconds_since_(clock_::time_point start) {
        return std::chrono::duration<double>(clock_::now() - start).count();
    }

    std::array<SliceImage, 3> truth_for_(const Scenario& s) {
        return ground_truth_slices(s.truth);
    }

    void emit_(std::vector<BenchRow>& rows, const std::function<void(const BenchRow&)>& on_row, BenchRow row) {
        if (on_row)
            on_row(row);
        rows.push_back(std::move(row));
    }

    Scores n2f_scores_(const N2FModel& model, const Sinogram& s, const std::array<SliceImage, 3>& truth) {
        const FilteredStack cache = build_cache(model, s);
        const auto recon = n2f_ortho(model, cache);
        return ortho_scores(recon, truth);
    }
}

Scenario make_scenario(const DeskConfig& desk, std::uint64_t phantom_seed, double true_cor_shift) {
    Scenario s;
    s.geometry = make_parallel_geometry(desk.n_angles, desk.n, desk.det_cols);
    s.true_cor_shift = true_cor_shift;
    FoamConfig config = default_foam_config(desk.n, phantom_seed);
    config.n_balls = desk.n_balls;
    s.phantom = calibrate_density(generate_foam(config), s.geometry, desk.absorption);
    const Geometry acquired = s.geometry.with_cor_shift(true_cor_shift);
    s.clean = project_foam(s.phantom, acquired, desk.supersampling);
    s.clean.geometry = s.geometry;
    s.truth = voxelize_foam(s.phantom, {desk.n, desk.n, desk.n});
    return s;
}

Sinogram noisy_copy(const Scenario& scenario, double photon_count, std::uint64_t seed) {
    return apply_poisson_noise(scenario.clean, {photon_count, seed});
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = 0x243f6a8885a308d3ull;
    for (std::uint64_t v : {a, b, c}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xbf58476d1ce4e5b9ull;
        h ^= h >> 31;
    }
    return h;
}

std::array<SliceImage, 3> fbp_ortho(const Sinogram& s, const Filter& f, const BackprojectOptions& options) {
    const Sinogram filtered = convolve_sinogram(s, f);
    const auto planes = ortho_slices(reconstruction_shape(s.geometry));
    return {backproject_slice(filtered, planes[0], options), backproject_slice(filtered, planes[1], options),
            backproject_slice(filtered, planes[2], options)};
}

std::array<SliceImage, 3> n2f_ortho(const N2FModel& model, const FilteredStack& cache,
                                    const BackprojectOptions& options) {
    const auto planes = ortho_slices(reconstruction_shape(cache.geometry()));
    return {reconstruct_slice_n2f(model, cache, planes[0], options),
            reconstruct_slice_n2f(model, cache, planes[1], options),
            reconstruct_slice_n2f(model, cache, planes[2], options)};
}

void write_csv_header(std::ostream& out) {
    out << "method,setting,i0,trial,param,psnr,ssim,seconds\n";
}

void write_csv_row(std::ostream& out, const BenchRow& row) {
    out << row.method << ',' << row.setting << ',' << row.photon_count << ',' << row.trial << ',' << row.param << ','
        << row.scores.psnr << ',' << row.scores.ssim << ',' << row.seconds << '\n';
}

std::vector<BenchRow> accuracy_trial(const Scenario& test, const Scenario& train, double photon_count,
                                     std::size_t trial, const AccuracyOptions& options) {
    std::vector<BenchRow> rows;
    const Sinogram noisy = noisy_copy(test, photon_count, mix_seed(options.seed, trial, 1));
    const auto truth = truth_for_(test);
    const std::size_t hw = default_half_width(noisy.geometry);
    auto make_row = [&](std::string method, double param, Scores scores, double seconds) {
        BenchRow row;
        row.method = std::move(method);
        row.setting = "default";
        row.photon_count = photon_count;
        row.trial = trial;
        row.param = param;
        row.scores = scores;
        row.seconds = seconds;
        return row;
    };

    auto start = clock_::now();
    emit_(rows, options.on_row, make_row("fbp", 0.0, ortho_scores(fbp_ortho(noisy, ram_lak(hw)), truth),
                                         seconds_since_(start)));

    start = clock_::now();
    const GridSearchResult g = grid_search_baseline(noisy, test.truth, BaselineKind::gaussian, options.sigma_grid);
    const auto g_best = static_cast<std::size_t>(std::find(g.params.begin(), g.params.end(), g.best_param) - g.params.begin());
    emit_(rows, options.on_row, make_row("fbp_g", g.best_param, g.scores[g_best], seconds_since_(start)));

    start = clock_::now();
    const GridSearchResult sc = grid_search_baseline(noisy, test.truth, BaselineKind::freqscale, options.fsc_grid);
    const auto sc_best = static_cast<std::size_t>(std::find(sc.params.begin(), sc.params.end(), sc.best_param) - sc.params.begin());
    emit_(rows, options.on_row, make_row("fbp_sc", sc.best_param, sc.scores[sc_best], seconds_since_(start)));

    start = clock_::now();
    N2FConfig cfg = options.n2f;
    cfg.seed = mix_seed(options.seed, trial, 2);
    const N2FModel n2f = train_noise2filter(noisy, cfg);
    emit_(rows, options.on_row, make_row("n2f", 0.0, n2f_scores_(n2f, noisy, truth), seconds_since_(start)));

    start = clock_::now();
    const Sinogram train_noisy = noisy_copy(train, photon_count, mix_seed(options.seed, trial, 3));
    cfg.seed = mix_seed(options.seed, trial, 4);
    const N2FModel nnfbp = train_nnfbp_supervised(train_noisy, train.truth, cfg);
    emit_(rows, options.on_row, make_row("nnfbp", 0.0, n2f_scores_(nnfbp, noisy, truth), seconds_since_(start)));
    return rows;
}

std::vector<BenchRow> bench_accuracy(const AccuracyOptions& options) {
    const Scenario test = make_scenario(options.desk, options.test_phantom_seed);
    const Scenario train = make_scenario(options.desk, options.train_phantom_seed);
    std::vector<BenchRow> rows;
    for (double i0 : options.photon_counts)
        for (std::size_t t = 0; t < options.trials; ++t) {
            AccuracyOptions per = options;
            per.seed = mix_seed(options.seed, static_cast<std::uint64_t>(i0));
            auto trial_rows = accuracy_trial(test, train, i0, t, per);
            rows.insert(rows.end(), trial_rows.begin(), trial_rows.end());
        }
    return rows;
}

std::vector<BenchRow> bench_hyper(const HyperOptions& options) {
    const Scenario scenario = make_scenario(options.desk, options.phantom_seed);
    const auto truth = truth_for_(scenario);
    std::vector<BenchRow> rows;
    for (std::size_t t = 0; t < options.trials; ++t) {
        const Sinogram noisy = noisy_copy(scenario, options.photon_count, mix_seed(options.seed, t, 1));
        for (Strategy strategy : options.strategies)
            for (std::size_t splits : options.splits) {
                const auto start = clock_::now();
                N2FConfig cfg = options.n2f;
                cfg.strategy = strategy;
                cfg.n_splits = splits;
                cfg.seed = mix_seed(options.seed, t, 2);
                const N2FModel model = train_noise2filter(noisy, cfg);
                BenchRow row;
                row.method = "n2f";
                row.setting = std::string("strategy=") + std::string(to_string(strategy)) +
                              ";splits=" + std::to_string(splits);
                row.photon_count = options.photon_count;
                row.trial = t;
                row.param = static_cast<double>(splits);
                row.scores = n2f_scores_(model, noisy, truth);
                row.seconds = seconds_since_(start);
                emit_(rows, options.on_row, std::move(row));
            }
    }
    return rows;
}

std::vector<BenchRow> bench_voxels(const VoxelOptions& options) {
    const Scenario scenario = make_scenario(options.desk, options.phantom_seed);
    const auto truth = truth_for_(scenario);
    std::vector<BenchRow> rows;
    for (std::size_t t = 0; t < options.trials; ++t) {
        const Sinogram noisy = noisy_copy(scenario, options.photon_count, mix_seed(options.seed, t, 1));
        for (std::size_t n_train : options.n_train_list) {
            const auto start = clock_::now();
            N2FConfig cfg = options.n2f;
            cfg.n_train = n_train;
            cfg.seed = mix_seed(options.seed, t, 2);
            const N2FModel model = train_noise2filter(noisy, cfg);
            BenchRow row;
            row.method = "n2f";
            row.setting = "n_train=" + std::to_string(n_train);
            row.photon_count = options.photon_count;
            row.trial = t;
            row.param = static_cast<double>(n_train);
            row.scores = n2f_scores_(model, noisy, truth);
            row.seconds = seconds_since_(start);
            emit_(rows, options.on_row, std::move(row));
        }
    }
    return rows;
}

SliceOrientation random_orientation(std::size_t size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vec3 u{normal(rng), normal(rng), normal(rng)};
    Vec3 v{normal(rng), normal(rng), normal(rng)};
    SliceOrientation o;
    o.u_axis = u;
    o.v_axis = v;
    o.width = size;
    o.height = size;
    return orthonormalized(o);
}

TimingReport time_slices(const N2FModel& model, const Sinogram& s, std::size_t n_slices, std::uint64_t seed) {
    TimingReport report;
    report.n_e = model.basis.size();
    report.n_hidden = model.learned.size();
    report.slices = n_slices;
    const std::size_t size = s.geometry.det_rows;
    const Filter ramp = ram_lak(default_half_width(s.geometry));
    const FilteredStack fbp_cache = filter_and_cache(s, std::span<const Filter>(&ramp, 1));
    const FilteredStack n2f_cache = build_cache(model, s);
    std::vector<SliceOrientation> orientations;
    for (std::size_t i = 0; i < n_slices; ++i)
        orientations.push_back(random_orientation(size, mix_seed(seed, i)));

    // Warm-up so that both paths start with touched caches and pages.
    (void)fbp_cache.backproject(0, orientations.front());
    (void)reconstruct_slice_n2f(model, n2f_cache, orientations.front());

    double checksum = 0.0;
    auto start = clock_::now();
    for (const SliceOrientation& o : orientations)
        checksum += fbp_cache.backproject(0, o).data[0];
    report.fbp_slice_ms = 1e3 * seconds_since_(start) / static_cast<double>(n_slices);
    start = clock_::now();
    for (const SliceOrientation& o : orientations)
        checksum += reconstruct_slice_n2f(model, n2f_cache, o).data[0];
    report.n2f_slice_ms = 1e3 * seconds_since_(start) / static_cast<double>(n_slices);
    if (!std::isfinite(checksum))
        throw std::runtime_error("time_slices: non-finite reconstruction");
    return report;
}

TimingReport bench_timing(const DeskConfig& desk, std::size_t n_slices, std::uint64_t seed) {
    const Scenario scenario = make_scenario(desk, 200);
    const Sinogram noisy = noisy_copy(scenario, 1000.0, mix_seed(seed, 1));
    N2FConfig cfg;
    cfg.seed = seed;
    TrainingTimes times;
    const N2FModel model = train_noise2filter(noisy, cfg, &times);
    TimingReport report = time_slices(model, noisy, n_slices, seed);
    report.prepare_seconds = times.prepare_seconds;
    report.train_seconds = times.train_seconds;
    return report;
}

std::vector<Scores> cor_sweep(const N2FModel& model, const FilteredStack& cache, const Volume& truth,
                              const std::vector<double>& shifts) {
    const auto reference = ground_truth_slices(truth);
    std::vector<Scores> scores;
    for (double shift : shifts) {
        BackprojectOptions options;
        options.cor_shift = shift;
        scores.push_back(ortho_scores(n2f_ortho(model, cache, options), reference));
    }
    return scores;
}

} // namespace n2f

#include <benchmark/benchmark.h>

#include "n2f/experiments.hpp"

using namespace n2f;

namespace {

const Scenario& scenario_() {
    static const Scenario s = [] {
        DeskConfig d;
        return make_scenario(d, 200);
    }();
    return s;
}

const Sinogram& noisy_() {
    static const Sinogram s = noisy_copy(scenario_(), 1000.0, 1);
    return s;
}

const N2FModel& model_() {
    static const N2FModel m = train_noise2filter(noisy_(), N2FConfig{});
    return m;
}

void bm_convolve_ramlak(benchmark::State& state) {
    const Sinogram& s = noisy_();
    const Filter f = ram_lak(default_half_width(s.geometry));
    for (auto _ : state)
        benchmark::DoNotOptimize(convolve_sinogram(s, f).data.data());
}
BENCHMARK(bm_convolve_ramlak)->Unit(benchmark::kMillisecond);

void bm_backproject_axial(benchmark::State& state) {
    const Sinogram& s = noisy_();
    const auto o = ortho_slice(reconstruction_shape(s.geometry), OrthoPlane::axial);
    for (auto _ : state)
        benchmark::DoNotOptimize(backproject_slice(s, o).data.data());
}
BENCHMARK(bm_backproject_axial)->Unit(benchmark::kMillisecond);

void bm_backproject_oblique(benchmark::State& state) {
    const Sinogram& s = noisy_();
    const auto o = random_orientation(s.geometry.det_rows, 7);
    for (auto _ : state)
        benchmark::DoNotOptimize(backproject_slice(s, o).data.data());
}
BENCHMARK(bm_backproject_oblique)->Unit(benchmark::kMillisecond);

void bm_n2f_slice(benchmark::State& state) {
    const N2FModel& m = model_();
    static const FilteredStack cache = build_cache(m, noisy_());
    const auto o = random_orientation(noisy_().geometry.det_rows, 7);
    for (auto _ : state)
        benchmark::DoNotOptimize(reconstruct_slice_n2f(m, cache, o).data.data());
}
BENCHMARK(bm_n2f_slice)->Unit(benchmark::kMillisecond);

void bm_prepare_data(benchmark::State& state) {
    const Sinogram& s = noisy_();
    const std::size_t hw = default_half_width(s.geometry);
    const ExpBinBasis basis = make_basis(hw);
    const Filter ramp = ram_lak(hw);
    for (auto _ : state)
        benchmark::DoNotOptimize(prepare_data(s, 3, basis, ramp).backprojections);
}
BENCHMARK(bm_prepare_data)->Unit(benchmark::kSecond)->Iterations(1);

void bm_train_lma(benchmark::State& state) {
    const Sinogram& s = noisy_();
    const std::size_t hw = default_half_width(s.geometry);
    const ExpBinBasis basis = make_basis(hw);
    const PrepData prep = prepare_data(s, 3, basis, ram_lak(hw));
    const VoxelSample sample = sample_voxels(prep, Strategy::one_x, 50'000, 0);
    for (auto _ : state)
        benchmark::DoNotOptimize(train_lma(sample.set, 4, 0).report.best_validation_loss);
}
BENCHMARK(bm_train_lma)->Unit(benchmark::kSecond)->Iterations(1);

void bm_ssim(benchmark::State& state) {
    const auto truth = ground_truth_slices(scenario_().truth);
    const double range = data_range(truth[0]);
    for (auto _ : state)
        benchmark::DoNotOptimize(ssim(truth[0], truth[1], range));
}
BENCHMARK(bm_ssim)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();

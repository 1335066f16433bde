#include <catch2/catch.hpp>

#include <set>
#include <tuple>

#include "fixtures.hpp"
#include "n2f/noise2filter.hpp"

using namespace n2f;

namespace {

struct SmallCase {
    Sinogram noisy;
    ExpBinBasis basis;
};

const SmallCase& small_case() {
    static const SmallCase c = [] {
        DeskConfig d;
        d.n = 32;
        d.n_angles = 96;
        d.det_cols = 48;
        d.n_balls = 60;
        const Scenario sc = make_scenario(d, 4);
        return SmallCase{noisy_copy(sc, 1000, 1), make_basis(47)};
    }();
    return c;
}

const n2f::N2FModel& small_model() {
    static const N2FModel m = [] {
        const auto& sc = fixtures::small_scenario();
        N2FConfig cfg;
        cfg.n_train = 4000;
        cfg.seed = 3;
        return train_noise2filter(noisy_copy(sc, 1000, 2), cfg);
    }();
    return m;
}

} // namespace

TEST_CASE("strategies parse from both spellings", "[n2f]") {
    CHECK(parse_strategy("x1") == Strategy::x1);
    CHECK(parse_strategy("X:1") == Strategy::x1);
    CHECK(parse_strategy("1x") == Strategy::one_x);
    CHECK(parse_strategy("1:X") == Strategy::one_x);
    CHECK(to_string(Strategy::one_x) == "1x");
    CHECK_THROWS_AS(parse_strategy("2x"), std::invalid_argument);
}

TEST_CASE("preparation computes every subset reconstruction once", "[n2f]") {
    const SmallCase& c = small_case();
    const PrepData prep = prepare_data(c.noisy, 3, c.basis, ram_lak(47));
    const std::size_t ne = c.basis.size();
    CHECK(prep.n_features == ne);
    CHECK(prep.planes.size() == 3);
    CHECK(prep.backprojections == (ne + 1) * 3 * 3);
    CHECK(prep.pixels_per_subset() == 3 * 32 * 32);
    REQUIRE(prep.inputs.size() == 3);
    CHECK(prep.inputs[2].size() == 3);
    CHECK(prep.inputs[2][1].size() == ne);
    CHECK(prep.complement_inputs[0][2].size() == ne);
    CHECK_THROWS_AS(prepare_data(c.noisy, 1, c.basis, ram_lak(47)), std::invalid_argument);
}

TEST_CASE("complement data are the mean of the other subsets", "[n2f]") {
    const SmallCase& c = small_case();
    const Filter h = ram_lak(47);
    const PrepData prep = prepare_data(c.noisy, 4, c.basis, h);
    const AngularSplit sp = split_angles(c.noisy.geometry, 4);
    const Sinogram filtered = convolve_sinogram(c.noisy, h);
    const Sinogram filtered_e3 = convolve_sinogram(c.noisy, basis_element(c.basis, 3));
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t j = 0; j < 4; ++j) {
            const SliceImage comp = backproject_subset_slice(filtered, sp, j, prep.planes[p], SubsetMode::complement);
            CHECK(fixtures::rel_l2(prep.complement_targets[p][j].data, comp.data) <= 1e-12);
            const SliceImage comp3 =
                backproject_subset_slice(filtered_e3, sp, j, prep.planes[p], SubsetMode::complement);
            CHECK(fixtures::rel_l2(prep.complement_inputs[p][j][3].data, comp3.data) <= 1e-12);
        }
}

TEST_CASE("voxel sampling draws distinct sites and builds strategy rows", "[n2f]") {
    const SmallCase& c = small_case();
    const PrepData prep = prepare_data(c.noisy, 3, c.basis, ram_lak(47));
    CHECK(validation_rows(50000) == 5000);
    CHECK(validation_rows(15) == 2);
    const VoxelSample x1 = sample_voxels(prep, Strategy::x1, 1000, 7);
    const VoxelSample one_x = sample_voxels(prep, Strategy::one_x, 1000, 7);
    REQUIRE(x1.set.rows() == 1100);
    CHECK(x1.set.n_train == 1000);
    CHECK(x1.set.n_validation() == 100);
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
    for (const SampleSite& s : x1.sites)
        seen.insert({s.plane, s.subset, s.pixel});
    CHECK(seen.size() == 1100);
    for (std::size_t r = 0; r < 1100; r += 37) {
        const SampleSite& s = x1.sites[r];
        CHECK(x1.set.targets[r] == prep.complement_targets[s.plane][s.subset].data[s.pixel]);
        CHECK(x1.set.row(r)[2] == prep.inputs[s.plane][s.subset][2].data[s.pixel]);
        CHECK(one_x.set.targets[r] == prep.targets[s.plane][s.subset].data[s.pixel]);
        CHECK(one_x.set.row(r)[4] == prep.complement_inputs[s.plane][s.subset][4].data[s.pixel]);
    }
    CHECK(sample_voxels(prep, Strategy::x1, 1000, 7).set.inputs == x1.set.inputs);
    CHECK(sample_voxels(prep, Strategy::x1, 1000, 8).set.inputs != x1.set.inputs);
    CHECK_THROWS_AS(sample_voxels(prep, Strategy::x1, 9000, 1), std::invalid_argument);
}

TEST_CASE("with two splits the strategies mirror each other", "[n2f]") {
    const SmallCase& c = small_case();
    const PrepData prep = prepare_data(c.noisy, 2, c.basis, ram_lak(47));
    const VoxelSample x1 = sample_voxels(prep, Strategy::x1, 500, 1);
    const VoxelSample one_x = sample_voxels(prep, Strategy::one_x, 500, 1);
    for (std::size_t r = 0; r < x1.set.rows(); ++r) {
        const SampleSite& s = x1.sites[r];
        const std::size_t other = 1 - s.subset;
        CHECK(x1.set.targets[r] == Approx(prep.targets[s.plane][other].data[s.pixel]).epsilon(1e-14));
        CHECK(one_x.set.row(r)[0] == Approx(prep.inputs[s.plane][other][0].data[s.pixel]).epsilon(1e-14));
    }
    for (Strategy st : {Strategy::x1, Strategy::one_x}) {
        N2FConfig cfg;
        cfg.n_splits = 2;
        cfg.strategy = st;
        cfg.n_train = 2000;
        const N2FModel m = train_noise2filter(c.noisy, cfg);
        CHECK(m.strategy == st);
        CHECK(m.n_splits == 2);
        CHECK(m.learned.size() == 4);
        CHECK(std::isfinite(m.best_validation_loss));
    }
}

TEST_CASE("cached reconstruction equals the network on basis reconstructions", "[n2f]") {
    const auto& sc = fixtures::small_scenario();
    const N2FModel& m = small_model();
    const Sinogram noisy = noisy_copy(sc, 1000, 2);
    const FilteredStack cache = build_cache(m, noisy);
    for (const SliceOrientation& o : ortho_slices(reconstruction_shape(noisy.geometry))) {
        std::vector<SliceImage> basis_slices;
        for (std::size_t i = 0; i < m.basis.size(); ++i)
            basis_slices.push_back(fbp_slice(noisy, basis_element(m.basis, i), o));
        const SliceImage ref = mlp_on_basis_slices(m, basis_slices);
        const SliceImage got = reconstruct_slice_n2f(m, cache, o);
        CHECK(fixtures::rel_l2(got.data, ref.data) <= 1e-5);
    }
}

TEST_CASE("learned filters denoise better than plain FBP", "[n2f]") {
    const auto& sc = fixtures::small_scenario();
    const N2FModel& m = small_model();
    const Sinogram noisy = noisy_copy(sc, 1000, 2);
    const auto truth = ground_truth_slices(sc.truth);
    const Scores fbp = ortho_scores(fbp_ortho(noisy, ram_lak(default_half_width(noisy.geometry))), truth);
    const Scores n2f = ortho_scores(n2f_ortho(m, build_cache(m, noisy)), truth);
    CHECK(n2f.psnr > fbp.psnr + 3.0);
    CHECK(n2f.ssim > fbp.ssim);
}

TEST_CASE("models refuse data they were not trained for", "[n2f]") {
    const auto& sc = fixtures::small_scenario();
    const N2FModel& m = small_model();
    const Sinogram noisy = noisy_copy(sc, 1000, 2);
    CHECK(m.fingerprint.matches(noisy.geometry));
    CHECK(m.fingerprint.matches(noisy.geometry.with_cor_shift(19.0)));
    Geometry fewer = make_parallel_geometry(96, 64, 96);
    CHECK_FALSE(m.fingerprint.matches(fewer));
    CHECK_THROWS_AS(build_cache(m, Sinogram::zeros(fewer)), std::invalid_argument);

    N2FModel other = m;
    other.learned.filters[0].set(0, other.learned.filters[0].at(0) + 1.0);
    const FilteredStack cache = build_cache(m, noisy);
    CHECK_THROWS_AS(reconstruct_slice_n2f(other, cache, ortho_slice({64, 64, 64}, OrthoPlane::axial)),
                    std::invalid_argument);
    CHECK(other.version() != m.version());
    CHECK(m.version().size() == 12);
    CHECK(m.version() == N2FModel(m).version());
}

TEST_CASE("training is reproducible", "[n2f]") {
    const SmallCase& c = small_case();
    N2FConfig cfg;
    cfg.n_train = 1500;
    cfg.seed = 11;
    const N2FModel a = train_noise2filter(c.noisy, cfg);
    const N2FModel b = train_noise2filter(c.noisy, cfg);
    CHECK(a.params == b.params);
    CHECK(a.filter_fingerprints() == b.filter_fingerprints());
    cfg.n_train = 10;
    CHECK_THROWS_AS(train_noise2filter(c.noisy, cfg), std::invalid_argument);
}

TEST_CASE("supervised training fits the known volume", "[n2f]") {
    const auto& sc = fixtures::small_scenario();
    N2FConfig cfg;
    cfg.n_train = 4000;
    const N2FModel m = train_nnfbp_supervised(noisy_copy(sc, 1000, 5), sc.truth, cfg);
    CHECK(m.method == "nnfbp");
    const Sinogram test = noisy_copy(sc, 1000, 6);
    const auto truth = ground_truth_slices(sc.truth);
    const Scores nn = ortho_scores(n2f_ortho(m, build_cache(m, test)), truth);
    const Scores fbp = ortho_scores(fbp_ortho(test, ram_lak(default_half_width(test.geometry))), truth);
    CHECK(nn.psnr > fbp.psnr + 3.0);
}

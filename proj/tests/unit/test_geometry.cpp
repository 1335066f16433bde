#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "fixtures.hpp"
#include "n2f/geometry.hpp"
#include "n2f/projector.hpp"

using namespace n2f;

TEST_CASE("parallel geometry covers the half rotation evenly", "[geometry]") {
    const Geometry g = make_parallel_geometry(8, 4, 6);
    REQUIRE(g.n_angles() == 8);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(g.angles[i] == Approx(static_cast<double>(i) * std::numbers::pi / 8.0).margin(1e-15));
    CHECK(g.n_pixels() == 8 * 4 * 6);
    CHECK_NOTHROW(g.validate());
}

TEST_CASE("detector coordinates invert each other", "[geometry]") {
    Geometry g = make_parallel_geometry(4, 5, 7, 1.5);
    g.pixel_size = 0.5;
    CHECK(g.column_of(0.0) == Approx(3.0 + 1.5));
    for (double t : {-2.0, -0.3, 0.0, 1.7})
        CHECK(g.t_of(g.column_of(t)) == Approx(t).margin(1e-12));
    CHECK(g.row_of(0.0) == Approx(2.0));
    CHECK(g.z_of(g.row_of(0.75)) == Approx(0.75));
    CHECK(g.with_cor_shift(-2.0).cor_shift == -2.0);
}

TEST_CASE("invalid geometries are rejected", "[geometry]") {
    Geometry g = make_parallel_geometry(4, 4, 4);
    g.angles = {0.0, 1.0, 0.5};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = make_parallel_geometry(4, 4, 4);
    g.pixel_size = 0.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = make_parallel_geometry(4, 4, 4);
    g.det_cols = 0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    CHECK_THROWS(make_parallel_geometry(0, 4, 4));
}

TEST_CASE("voxel centers sit at half-integer offsets around the origin", "[geometry]") {
    const VolumeShape shape{128, 128, 128};
    const Vec3 c0 = voxel_center(shape, 1.0, 0, 0, 0);
    CHECK(c0.x == Approx(-63.5));
    CHECK(c0.z == Approx(-63.5));
    const Vec3 idx = world_to_voxel(shape, 1.0, {0.0, 0.0, 0.0});
    CHECK(idx.x == Approx(63.5));
    CHECK(idx.y == Approx(63.5));
    CHECK(idx.z == Approx(63.5));
    const Vec3 back = world_to_voxel(shape, 2.0, voxel_center(shape, 2.0, 3, 70, 127));
    CHECK(back.x == Approx(3.0));
    CHECK(back.y == Approx(70.0));
    CHECK(back.z == Approx(127.0));
}

TEST_CASE("ortho-slices pass through the volume center", "[geometry]") {
    const VolumeShape shape{128, 128, 128};
    for (OrthoPlane p : {OrthoPlane::axial, OrthoPlane::frontal, OrthoPlane::longitudinal}) {
        const SliceOrientation o = ortho_slice(shape, p);
        CHECK_NOTHROW(o.validate());
        CHECK(o.width == 128);
        CHECK(o.height == 128);
        const Vec3 centre = world_to_voxel(shape, 1.0, o.pixel_position(63.5, 63.5));
        CHECK(centre.x == Approx(63.5));
        CHECK(centre.y == Approx(63.5));
        CHECK(centre.z == Approx(63.5));
        const Vec3 corner = world_to_voxel(shape, 1.0, o.pixel_position(0, 0));
        CHECK(std::min({corner.x, corner.y, corner.z}) == Approx(0.0));
        CHECK(parse_ortho_plane(to_string(p)) == p);
    }
    const SliceOrientation fr = ortho_slice(shape, OrthoPlane::frontal);
    CHECK(fr.u_axis.x == 1.0);
    CHECK(fr.v_axis.z == 1.0);
    const SliceOrientation lo = ortho_slice(shape, OrthoPlane::longitudinal);
    CHECK(lo.u_axis.y == 1.0);
    CHECK(lo.v_axis.z == 1.0);
    CHECK_THROWS_AS(parse_ortho_plane("sagittalish"), std::invalid_argument);
}

TEST_CASE("axial midplane of an even volume averages the two central planes", "[geometry]") {
    const VolumeShape shape{4, 4, 4};
    const Volume v = fixtures::random_volume(shape, 3);
    const SliceImage mid = sample_volume(v, ortho_slice(shape, OrthoPlane::axial));
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            CHECK(mid.at(y, x) == Approx(0.5 * (v.at(x, y, 1) + v.at(x, y, 2))).epsilon(1e-6));
}

TEST_CASE("non-orthonormal slice axes are rejected and can be repaired", "[geometry]") {
    SliceOrientation o;
    o.width = 8;
    o.height = 8;
    o.u_axis = {1.0, 0.0, 0.0};
    o.v_axis = {0.3, 1.0, 0.0};
    CHECK_THROWS_AS(o.validate(), std::invalid_argument);
    const SliceOrientation fixed = orthonormalized(o);
    CHECK_NOTHROW(fixed.validate());
    CHECK(fixed.u_axis.x == Approx(1.0));
    CHECK(fixed.v_axis.x == Approx(0.0).margin(1e-12));
    o.v_axis = {0.0, 1.0, 0.0};
    o.width = 0;
    CHECK_THROWS_AS(o.validate(), std::invalid_argument);
}

TEST_CASE("angular splits are round-robin partitions", "[geometry]") {
    const Geometry g = make_parallel_geometry(10, 2, 2);
    const AngularSplit sp = split_angles(g, 3);
    REQUIRE(sp.n_splits() == 3);
    CHECK(sp.subsets[0] == std::vector<std::size_t>{0, 3, 6, 9});
    CHECK(sp.subsets[1] == std::vector<std::size_t>{1, 4, 7});
    CHECK(sp.subsets[2] == std::vector<std::size_t>{2, 5, 8});
    CHECK(sp.complement(1) == std::vector<std::size_t>{0, 2, 3, 5, 6, 8, 9});
    std::set<std::size_t> all;
    for (const auto& s : sp.subsets)
        all.insert(s.begin(), s.end());
    CHECK(all.size() == 10);
    CHECK_THROWS_AS(split_angles(g, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_angles(g, 11), std::invalid_argument);
}

#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "n2f/vec3.hpp"

namespace n2f {

/// Parallel-beam acquisition. The rotation axis is the world z axis and the
/// volume is centered at the origin. A point p projects onto detector column
/// column_of(p.x cos(a) + p.y sin(a)) and row row_of(p.z) for angle a.
struct Geometry {
    std::vector<double> angles;  // radians, strictly increasing, in [0, 2*pi)
    std::size_t det_rows = 0;
    std::size_t det_cols = 0;
    double pixel_size = 1.0;
    double cor_shift = 0.0;      // rotation-axis offset in detector columns

    [[nodiscard]] std::size_t n_angles() const noexcept { return angles.size(); }
    [[nodiscard]] std::size_t n_pixels() const noexcept { return angles.size() * det_rows * det_cols; }

    /// Fractional detector column for lateral world coordinate t.
    [[nodiscard]] double column_of(double t) const noexcept {
        return t / pixel_size + 0.5 * static_cast<double>(det_cols - 1) + cor_shift;
    }
    /// Lateral world coordinate of (fractional) column j; inverse of column_of.
    [[nodiscard]] double t_of(double column) const noexcept {
        return (column - 0.5 * static_cast<double>(det_cols - 1) - cor_shift) * pixel_size;
    }
    [[nodiscard]] double row_of(double z) const noexcept {
        return z / pixel_size + 0.5 * static_cast<double>(det_rows - 1);
    }
    [[nodiscard]] double z_of(double row) const noexcept {
        return (row - 0.5 * static_cast<double>(det_rows - 1)) * pixel_size;
    }

    [[nodiscard]] Geometry with_cor_shift(double shift) const;

    /// Throws std::invalid_argument when an invariant does not hold.
    void validate() const;

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// n_angles equally spaced angles i*pi/n_angles over the half rotation.
Geometry make_parallel_geometry(std::size_t n_angles, std::size_t det_rows, std::size_t det_cols,
                                double cor_shift = 0.0);

/// Voxel counts; x varies fastest in memory.
struct VolumeShape {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t nz = 0;

    [[nodiscard]] std::size_t voxel_count() const noexcept { return nx * ny * nz; }
    friend bool operator==(VolumeShape, VolumeShape) = default;
};

/// World position of voxel (i, j, k): voxel centers sit at half-integer offsets
/// around the origin.
Vec3 voxel_center(VolumeShape shape, double voxel_size, double i, double j, double k);
/// Continuous voxel index of a world position; inverse of voxel_center.
Vec3 world_to_voxel(VolumeShape shape, double voxel_size, Vec3 p);

/// A planar grid of width x height pixels. origin is the world position of the
/// slice center; pixel (row, col) lies at
/// origin + (col - (width-1)/2) * pixel_size * u + (row - (height-1)/2) * pixel_size * v.
struct SliceOrientation {
    Vec3 origin;
    Vec3 u_axis{1.0, 0.0, 0.0};
    Vec3 v_axis{0.0, 1.0, 0.0};
    std::size_t width = 0;
    std::size_t height = 0;
    double pixel_size = 1.0;

    [[nodiscard]] Vec3 pixel_position(double row, double col) const noexcept;
    [[nodiscard]] std::size_t pixel_count() const noexcept { return width * height; }

    /// Axes unit length and orthogonal within 1e-9, sizes non-zero.
    void validate() const;

    friend bool operator==(const SliceOrientation&, const SliceOrientation&) = default;
};

/// Gram-Schmidt on (u, v): keeps u's direction, makes v orthogonal to it.
SliceOrientation orthonormalized(SliceOrientation o);

enum class OrthoPlane { axial, frontal, longitudinal };

std::string_view to_string(OrthoPlane plane);
OrthoPlane parse_ortho_plane(std::string_view name);

/// Central axis-aligned slice. axial: u=x, v=y (constant z); frontal: u=x, v=z
/// (constant y); longitudinal: u=y, v=z (constant x).
SliceOrientation ortho_slice(VolumeShape shape, OrthoPlane plane, double voxel_size = 1.0);
std::array<SliceOrientation, 3> ortho_slices(VolumeShape shape, double voxel_size = 1.0);

/// Round-robin partition of the projection angles.
struct AngularSplit {
    std::size_t n_angles = 0;
    std::vector<std::vector<std::size_t>> subsets;

    [[nodiscard]] std::size_t n_splits() const noexcept { return subsets.size(); }
    /// All angle indices not in subset j, ascending.
    [[nodiscard]] std::vector<std::size_t> complement(std::size_t j) const;
};

/// Subset j holds the angle indices i with i mod n_splits == j.
AngularSplit split_angles(const Geometry& g, std::size_t n_splits);

} // namespace n2f

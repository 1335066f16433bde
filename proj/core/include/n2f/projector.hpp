#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "n2f/geometry.hpp"

namespace n2f {

/// Projection stack in [angle][row][col] order, 32-bit storage.
struct Sinogram {
    Geometry geometry;
    std::vector<float> data;

    static Sinogram zeros(Geometry g);

    [[nodiscard]] std::size_t index(std::size_t angle, std::size_t row, std::size_t col) const noexcept {
        return (angle * geometry.det_rows + row) * geometry.det_cols + col;
    }
    [[nodiscard]] float at(std::size_t angle, std::size_t row, std::size_t col) const noexcept {
        return data[index(angle, row, col)];
    }
    float& at(std::size_t angle, std::size_t row, std::size_t col) noexcept { return data[index(angle, row, col)]; }

    /// One detector row of one projection.
    [[nodiscard]] std::span<const float> row(std::size_t angle, std::size_t r) const noexcept {
        return {data.data() + index(angle, r, 0), geometry.det_cols};
    }
    std::span<float> row(std::size_t angle, std::size_t r) noexcept {
        return {data.data() + index(angle, r, 0), geometry.det_cols};
    }

    /// Shape matches the geometry and every value is finite.
    void validate() const;
};

/// Voxel grid in [z][y][x] order, centered at the origin.
struct Volume {
    VolumeShape shape;
    double voxel_size = 1.0;
    std::vector<float> data;

    static Volume zeros(VolumeShape shape, double voxel_size = 1.0);

    [[nodiscard]] std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
        return (z * shape.ny + y) * shape.nx + x;
    }
    [[nodiscard]] float at(std::size_t x, std::size_t y, std::size_t z) const noexcept { return data[index(x, y, z)]; }
    float& at(std::size_t x, std::size_t y, std::size_t z) noexcept { return data[index(x, y, z)]; }

    void validate() const;
};

/// Reconstructed slice in [row][col] order. Values are kept in double so that
/// subset averages and identities can be checked below float resolution.
struct SliceImage {
    SliceOrientation orientation;
    std::vector<double> data;

    static SliceImage zeros(const SliceOrientation& o);

    [[nodiscard]] std::size_t width() const noexcept { return orientation.width; }
    [[nodiscard]] std::size_t height() const noexcept { return orientation.height; }
    [[nodiscard]] double at(std::size_t row, std::size_t col) const noexcept { return data[row * width() + col]; }
    double& at(std::size_t row, std::size_t col) noexcept { return data[row * width() + col]; }
};

struct BackprojectOptions {
    /// Replaces the sinogram geometry's cor_shift at sampling time.
    std::optional<double> cor_shift;
    /// Angle indices to use, ascending; empty means all angles.
    std::span<const std::size_t> angles;
};

/// Ray-driven projection: each detector pixel integrates the volume along its
/// ray with unit-voxel steps and trilinear interpolation (zero outside).
Sinogram forward_project(const Volume& v, const Geometry& g);

/// Pixel-driven backprojection with bilinear detector interpolation, weighted by
/// pi / (number of angles used). Each z plane is computed by backproject_slice.
Volume backproject_volume(const Sinogram& s, VolumeShape shape, double voxel_size = 1.0,
                          const BackprojectOptions& options = {});

/// Backprojection onto an arbitrary plane. Cost depends only on the slice size
/// and the number of angles.
SliceImage backproject_slice(const Sinogram& s, const SliceOrientation& o,
                             const BackprojectOptions& options = {});

/// Trilinear resampling of a volume on a slice grid (zero outside the volume).
SliceImage sample_volume(const Volume& v, const SliceOrientation& o);

} // namespace n2f

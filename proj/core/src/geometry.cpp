#include "n2f/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace n2f {

Geometry Geometry::with_cor_shift(double shift) const {
    Geometry g = *this;
    g.cor_shift = shift;
    return g;
}

void Geometry::validate() const {
    if (angles.empty() || det_rows == 0 || det_cols == 0)
        throw std::invalid_argument("geometry: counts must be at least 1");
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
        throw std::invalid_argument("geometry: pixel size must be positive");
    if (!std::isfinite(cor_shift))
        throw std::invalid_argument("geometry: cor_shift must be finite");
    for (std::size_t i = 0; i < angles.size(); ++i) {
        if (!(angles[i] >= 0.0 && angles[i] < 2.0 * std::numbers::pi))
            throw std::invalid_argument("geometry: angles must lie in [0, 2pi)");
        if (i > 0 && !(angles[i] > angles[i - 1]))
            throw std::invalid_argument("geometry: angles must be strictly increasing");
    }
}

Geometry make_parallel_geometry(std::size_t n_angles, std::size_t det_rows, std::size_t det_cols,
                                double cor_shift) {
    if (n_angles == 0 || det_rows == 0 || det_cols == 0)
        throw std::invalid_argument("make_parallel_geometry: counts must be at least 1");
    Geometry g;
    g.angles.resize(n_angles);
    for (std::size_t i = 0; i < n_angles; ++i)
        g.angles[i] = static_cast<double>(i) * std::numbers::pi / static_cast<double>(n_angles);
    g.det_rows = det_rows;
    g.det_cols = det_cols;
    g.cor_shift = cor_shift;
    g.validate();
    return g;
}

Vec3 voxel_center(VolumeShape shape, double voxel_size, double i, double j, double k) {
    return {(i - 0.5 * static_cast<double>(shape.nx - 1)) * voxel_size,
            (j - 0.5 * static_cast<double>(shape.ny - 1)) * voxel_size,
            (k - 0.5 * static_cast<double>(shape.nz - 1)) * voxel_size};
}

Vec3 world_to_voxel(VolumeShape shape, double voxel_size, Vec3 p) {
    return {p.x / voxel_size + 0.5 * static_cast<double>(shape.nx - 1),
            p.y / voxel_size + 0.5 * static_cast<double>(shape.ny - 1),
            p.z / voxel_size + 0.5 * static_cast<double>(shape.nz - 1)};
}

Vec3 SliceOrientation::pixel_position(double row, double col) const noexcept {
    const double du = (col - 0.5 * static_cast<double>(width - 1)) * pixel_size;
    const double dv = (row - 0.5 * static_cast<double>(height - 1)) * pixel_size;
    return {origin.x + du * u_axis.x + dv * v_axis.x,
            origin.y + du * u_axis.y + dv * v_axis.y,
            origin.z + du * u_axis.z + dv * v_axis.z};
}

void SliceOrientation::validate() const {
    if (width == 0 || height == 0)
        throw std::invalid_argument("slice orientation: width and height must be at least 1");
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
        throw std::invalid_argument("slice orientation: pixel size must be positive");
    constexpr double tol = 1e-9;
    if (std::abs(dot(u_axis, u_axis) - 1.0) > tol || std::abs(dot(v_axis, v_axis) - 1.0) > tol)
        throw std::invalid_argument("slice orientation: axes must have unit length");
    if (std::abs(dot(u_axis, v_axis)) >= tol)
        throw std::invalid_argument("slice orientation: axes must be orthogonal");
    if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z))
        throw std::invalid_argument("slice orientation: origin must be finite");
}

SliceOrientation orthonormalized(SliceOrientation o) {
    const double nu = norm(o.u_axis);
    if (!(nu > 0.0))
        throw std::invalid_argument("orthonormalized: u axis is zero");
    o.u_axis = (1.0 / nu) * o.u_axis;
    const Vec3 v = o.v_axis - dot(o.v_axis, o.u_axis) * o.u_axis;
    const double nv = norm(v);
    if (!(nv > 1e-12))
        throw std::invalid_argument("orthonormalized: axes are parallel");
    o.v_axis = (1.0 / nv) * v;
    return o;
}

std::string_view to_string(OrthoPlane plane) {
    switch (plane) {
        case OrthoPlane::axial: return "axial";
        case OrthoPlane::frontal: return "frontal";
        case OrthoPlane::longitudinal: return "longitudinal";
    }
    return "unknown";
}

OrthoPlane parse_ortho_plane(std::string_view name) {
    if (name == "axial")
        return OrthoPlane::axial;
    if (name == "frontal")
        return OrthoPlane::frontal;
    if (name == "longitudinal")
        return OrthoPlane::longitudinal;
    throw std::invalid_argument("unknown ortho plane '" + std::string(name) + "'");
}

SliceOrientation ortho_slice(VolumeShape shape, OrthoPlane plane, double voxel_size) {
    if (shape.nx == 0 || shape.ny == 0 || shape.nz == 0)
        throw std::invalid_argument("ortho_slice: shape components must be at least 1");
    SliceOrientation o;
    o.origin = {0.0, 0.0, 0.0};
    o.pixel_size = voxel_size;
    switch (plane) {
        case OrthoPlane::axial:
            o.u_axis = {1, 0, 0};
            o.v_axis = {0, 1, 0};
            o.width = shape.nx;
            o.height = shape.ny;
            break;
        case OrthoPlane::frontal:
            o.u_axis = {1, 0, 0};
            o.v_axis = {0, 0, 1};
            o.width = shape.nx;
            o.height = shape.nz;
            break;
        case OrthoPlane::longitudinal:
            o.u_axis = {0, 1, 0};
            o.v_axis = {0, 0, 1};
            o.width = shape.ny;
            o.height = shape.nz;
            break;
    }
    return o;
}

std::array<SliceOrientation, 3> ortho_slices(VolumeShape shape, double voxel_size) {
    return {ortho_slice(shape, OrthoPlane::axial, voxel_size),
            ortho_slice(shape, OrthoPlane::frontal, voxel_size),
            ortho_slice(shape, OrthoPlane::longitudinal, voxel_size)};
}

std::vector<std::size_t> AngularSplit::complement(std::size_t j) const {
    if (j >= subsets.size())
        throw std::invalid_argument("AngularSplit::complement: subset index out of range");
    std::vector<std::size_t> out;
    out.reserve(n_angles - subsets[j].size());
    for (std::size_t i = 0; i < n_angles; ++i)
        if (i % subsets.size() != j)
            out.push_back(i);
    return out;
}

AngularSplit split_angles(const Geometry& g, std::size_t n_splits) {
    if (n_splits < 2 || n_splits > g.n_angles())
        throw std::invalid_argument("split_angles: need 2 <= n_splits <= n_angles");
    AngularSplit split;
    split.n_angles = g.n_angles();
    split.subsets.resize(n_splits);
    for (std::size_t i = 0; i < g.n_angles(); ++i)
        split.subsets[i % n_splits].push_back(i);
    return split;
}

} // namespace n2f

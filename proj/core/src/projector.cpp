#include "n2f/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "n2f/parallel.hpp"

namespace n2f {

namespace {
    bool all_finite_(std::span<const float> values) {
        return std::all_of(values.begin(), values.end(), [](float x) { return std::isfinite(x); });
    }

    // Bilinear detector sample with zero padding outside the detector.
    inline double sample_detector_(const float* proj, std::size_t rows, std::size_t cols,
                                   double row, double col) noexcept {
        const double r0f = std::floor(row);
        const double c0f = std::floor(col);
        const double fr = row - r0f;
        const double fc = col - c0f;
        const long r0 = static_cast<long>(r0f);
        const long c0 = static_cast<long>(c0f);
        const long nr = static_cast<long>(rows);
        const long nc = static_cast<long>(cols);
        if (r0 >= 0 && r0 + 1 < nr && c0 >= 0 && c0 + 1 < nc) {
            const float* p = proj + r0 * nc + c0;
            const double top = (1.0 - fc) * p[0] + fc * p[1];
            const double bottom = (1.0 - fc) * p[nc] + fc * p[nc + 1];
            return (1.0 - fr) * top + fr * bottom;
        }
        if (r0 < -1 || r0 >= nr || c0 < -1 || c0 >= nc)
            return 0.0;
        double value = 0.0;
        for (long dr = 0; dr < 2; ++dr) {
            const long r = r0 + dr;
            if (r < 0 || r >= nr)
                continue;
            const double wr = dr == 0 ? 1.0 - fr : fr;
            for (long dc = 0; dc < 2; ++dc) {
                const long c = c0 + dc;
                if (c < 0 || c >= nc)
                    continue;
                const double wc = dc == 0 ? 1.0 - fc : fc;
                value += wr * wc * proj[r * nc + c];
            }
        }
        return value;
    }

    // Bilinear sample of one z slab at continuous (x, y) voxel index.
    inline double sample_slab_(const float* slab, long nx, long ny, double xi, double yi) noexcept {
        const double x0f = std::floor(xi);
        const double y0f = std::floor(yi);
        const long x0 = static_cast<long>(x0f);
        const long y0 = static_cast<long>(y0f);
        if (x0 < -1 || x0 >= nx || y0 < -1 || y0 >= ny)
            return 0.0;
        const double fx = xi - x0f;
        const double fy = yi - y0f;
        if (x0 >= 0 && x0 + 1 < nx && y0 >= 0 && y0 + 1 < ny) {
            const float* p = slab + y0 * nx + x0;
            return (1.0 - fy) * ((1.0 - fx) * p[0] + fx * p[1]) + fy * ((1.0 - fx) * p[nx] + fx * p[nx + 1]);
        }
        double value = 0.0;
        for (long dy = 0; dy < 2; ++dy) {
            const long y = y0 + dy;
            if (y < 0 || y >= ny)
                continue;
            const double wy = dy == 0 ? 1.0 - fy : fy;
            for (long dx = 0; dx < 2; ++dx) {
                const long x = x0 + dx;
                if (x < 0 || x >= nx)
                    continue;
                const double wx = dx == 0 ? 1.0 - fx : fx;
                value += wy * wx * slab[y * nx + x];
            }
        }
        return value;
    }

    std::vector<std::size_t> resolve_angles_(const Geometry& g, std::span<const std::size_t> requested) {
        std::vector<std::size_t> angles;
        if (requested.empty()) {
            angles.resize(g.n_angles());
            for (std::size_t i = 0; i < angles.size(); ++i)
                angles[i] = i;
            return angles;
        }
        angles.assign(requested.begin(), requested.end());
        for (std::size_t i = 0; i < angles.size(); ++i) {
            if (angles[i] >= g.n_angles())
                throw std::invalid_argument("backprojection: angle index out of range");
            if (i > 0 && angles[i] <= angles[i - 1])
                throw std::invalid_argument("backprojection: angle indices must be strictly increasing");
        }
        return angles;
    }
}

Sinogram Sinogram::zeros(Geometry g) {
    g.validate();
    Sinogram s;
    s.data.assign(g.n_pixels(), 0.0f);
    s.geometry = std::move(g);
    return s;
}

void Sinogram::validate() const {
    geometry.validate();
    if (data.size() != geometry.n_pixels())
        throw std::invalid_argument("sinogram: data size does not match geometry");
    if (!all_finite_(data))
        throw std::invalid_argument("sinogram: non-finite value");
}

Volume Volume::zeros(VolumeShape shape, double voxel_size) {
    if (shape.voxel_count() == 0)
        throw std::invalid_argument("volume: shape components must be at least 1");
    if (!(voxel_size > 0.0))
        throw std::invalid_argument("volume: voxel size must be positive");
    Volume v;
    v.shape = shape;
    v.voxel_size = voxel_size;
    v.data.assign(shape.voxel_count(), 0.0f);
    return v;
}

void Volume::validate() const {
    if (shape.voxel_count() == 0 || data.size() != shape.voxel_count())
        throw std::invalid_argument("volume: data size does not match shape");
    if (!(voxel_size > 0.0))
        throw std::invalid_argument("volume: voxel size must be positive");
    if (!all_finite_(data))
        throw std::invalid_argument("volume: non-finite value");
}

SliceImage SliceImage::zeros(const SliceOrientation& o) {
    SliceImage img;
    img.orientation = o;
    img.data.assign(o.pixel_count(), 0.0);
    return img;
}

Sinogram forward_project(const Volume& v, const Geometry& g) {
    v.validate();
    g.validate();
    const double vs = v.voxel_size;
    if (static_cast<double>(v.shape.nz) * vs > static_cast<double>(g.det_rows) * g.pixel_size + 1e-9 ||
        static_cast<double>(std::max(v.shape.nx, v.shape.ny)) * vs >
            static_cast<double>(g.det_cols) * g.pixel_size + 1e-9)
        throw std::invalid_argument("forward_project: volume does not fit the detector");

    Sinogram out = Sinogram::zeros(g);
    const long nx = static_cast<long>(v.shape.nx);
    const long ny = static_cast<long>(v.shape.ny);
    const long nz = static_cast<long>(v.shape.nz);
    const double half_diag = 0.5 * std::hypot(static_cast<double>(nx), static_cast<double>(ny)) * vs + vs;
    const long n_steps = static_cast<long>(std::ceil(2.0 * half_diag / vs));
    const double cx = 0.5 * static_cast<double>(nx - 1);
    const double cy = 0.5 * static_cast<double>(ny - 1);
    const std::size_t slab_size = v.shape.nx * v.shape.ny;

    // Rows are independent: a horizontal ray at height z touches at most two z slabs.
    parallel_for(0, g.det_rows, [&](std::size_t r) {
        const double zi = world_to_voxel(v.shape, vs, {0.0, 0.0, g.z_of(static_cast<double>(r))}).z;
        const double z0f = std::floor(zi);
        const long z0 = static_cast<long>(z0f);
        const double fz = zi - z0f;
        struct Slab { const float* data; double weight; };
        Slab slabs[2];
        int n_slabs = 0;
        if (z0 >= 0 && z0 < nz && 1.0 - fz > 0.0)
            slabs[n_slabs++] = {v.data.data() + static_cast<std::size_t>(z0) * slab_size, 1.0 - fz};
        if (z0 + 1 >= 0 && z0 + 1 < nz && fz > 0.0)
            slabs[n_slabs++] = {v.data.data() + static_cast<std::size_t>(z0 + 1) * slab_size, fz};
        if (n_slabs == 0)
            return;

        for (std::size_t a = 0; a < g.n_angles(); ++a) {
            const double ca = std::cos(g.angles[a]);
            const double sa = std::sin(g.angles[a]);
            float* out_row = out.row(a, r).data();
            for (std::size_t c = 0; c < g.det_cols; ++c) {
                const double t = g.t_of(static_cast<double>(c));
                double sum = 0.0;
                for (long k = 0; k < n_steps; ++k) {
                    const double s = (static_cast<double>(k) - 0.5 * static_cast<double>(n_steps - 1)) * vs;
                    const double x = t * ca - s * sa;
                    const double y = t * sa + s * ca;
                    const double xi = x / vs + cx;
                    const double yi = y / vs + cy;
                    for (int b = 0; b < n_slabs; ++b)
                        sum += slabs[b].weight * sample_slab_(slabs[b].data, nx, ny, xi, yi);
                }
                out_row[c] = static_cast<float>(sum * vs);
            }
        }
    });
    return out;
}

SliceImage backproject_slice(const Sinogram& s, const SliceOrientation& o, const BackprojectOptions& options) {
    o.validate();
    const Geometry& g = s.geometry;
    if (s.data.size() != g.n_pixels())
        throw std::invalid_argument("backproject_slice: sinogram data does not match geometry");
    const std::vector<std::size_t> angles = resolve_angles_(g, options.angles);
    const double shift = options.cor_shift.value_or(g.cor_shift);
    const double weight = std::numbers::pi / static_cast<double>(angles.size());
    const double col_center = 0.5 * static_cast<double>(g.det_cols - 1) + shift;
    const double row_center = 0.5 * static_cast<double>(g.det_rows - 1);
    const double inv_px = 1.0 / g.pixel_size;
    const std::size_t proj_size = g.det_rows * g.det_cols;

    struct AngleTerms { double ca, sa; const float* proj; };
    std::vector<AngleTerms> terms(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i)
        terms[i] = {std::cos(g.angles[angles[i]]), std::sin(g.angles[angles[i]]),
                    s.data.data() + angles[i] * proj_size};

    SliceImage out = SliceImage::zeros(o);
    parallel_for(0, o.height, [&](std::size_t r) {
        std::vector<double> acc(o.width, 0.0);
        std::vector<Vec3> positions(o.width);
        for (std::size_t c = 0; c < o.width; ++c)
            positions[c] = o.pixel_position(static_cast<double>(r), static_cast<double>(c));
        for (const AngleTerms& at : terms) {
            for (std::size_t c = 0; c < o.width; ++c) {
                const Vec3& p = positions[c];
                const double col = (p.x * at.ca + p.y * at.sa) * inv_px + col_center;
                const double row = p.z * inv_px + row_center;
                acc[c] += sample_detector_(at.proj, g.det_rows, g.det_cols, row, col);
            }
        }
        double* dst = out.data.data() + r * o.width;
        for (std::size_t c = 0; c < o.width; ++c)
            dst[c] = acc[c] * weight;
    });
    return out;
}

Volume backproject_volume(const Sinogram& s, VolumeShape shape, double voxel_size, const BackprojectOptions& options) {
    Volume v = Volume::zeros(shape, voxel_size);
    for (std::size_t k = 0; k < shape.nz; ++k) {
        SliceOrientation plane;
        plane.origin = voxel_center(shape, voxel_size, 0.5 * static_cast<double>(shape.nx - 1),
                                    0.5 * static_cast<double>(shape.ny - 1), static_cast<double>(k));
        plane.u_axis = {1, 0, 0};
        plane.v_axis = {0, 1, 0};
        plane.width = shape.nx;
        plane.height = shape.ny;
        plane.pixel_size = voxel_size;
        const SliceImage img = backproject_slice(s, plane, options);
        float* dst = v.data.data() + k * shape.nx * shape.ny;
        for (std::size_t i = 0; i < img.data.size(); ++i)
            dst[i] = static_cast<float>(img.data[i]);
    }
    return v;
}

SliceImage sample_volume(const Volume& v, const SliceOrientation& o) {
    o.validate();
    SliceImage out = SliceImage::zeros(o);
    const long nx = static_cast<long>(v.shape.nx);
    const long ny = static_cast<long>(v.shape.ny);
    const long nz = static_cast<long>(v.shape.nz);
    const std::size_t slab_size = v.shape.nx * v.shape.ny;
    parallel_for(0, o.height, [&](std::size_t r) {
        for (std::size_t c = 0; c < o.width; ++c) {
            const Vec3 idx = world_to_voxel(v.shape, v.voxel_size,
                                            o.pixel_position(static_cast<double>(r), static_cast<double>(c)));
            const double z0f = std::floor(idx.z);
            const long z0 = static_cast<long>(z0f);
            const double fz = idx.z - z0f;
            double value = 0.0;
            if (z0 >= 0 && z0 < nz)
                value += (1.0 - fz) * sample_slab_(v.data.data() + static_cast<std::size_t>(z0) * slab_size,
                                                   nx, ny, idx.x, idx.y);
            if (z0 + 1 >= 0 && z0 + 1 < nz && fz > 0.0)
                value += fz * sample_slab_(v.data.data() + static_cast<std::size_t>(z0 + 1) * slab_size,
                                           nx, ny, idx.x, idx.y);
            out.at(r, c) = value;
        }
    });
    return out;
}

} // namespace n2f

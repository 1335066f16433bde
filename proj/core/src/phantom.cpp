#include "n2f/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "n2f/errors.hpp"
#include "n2f/parallel.hpp"

namespace n2f {

namespace {
    // Small counter-based generator: one independent stream per detector pixel.
    struct SplitMix64 {
        using result_type = std::uint64_t;
        std::uint64_t state;

        static constexpr result_type min() { return 0; }
        static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
        result_type operator()() noexcept {
            std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            return z ^ (z >> 31);
        }
    };

    double chord_(double radius_sq, double dist_sq) noexcept {
        return dist_sq < radius_sq ? 2.0 * std::sqrt(radius_sq - dist_sq) : 0.0;
    }

    bool overlaps_(const std::vector<Ball>& balls, const Ball& b) {
        for (const Ball& other : balls) {
            const double reach = other.radius + b.radius;
            const Vec3 d = other.center - b.center;
            if (dot(d, d) < reach * reach)
                return true;
        }
        return false;
    }
}

FoamConfig default_foam_config(std::size_t n, std::uint64_t seed) {
    FoamConfig config;
    config.cylinder_radius = 0.4 * static_cast<double>(n);
    config.cylinder_half_height = 0.4 * static_cast<double>(n);
    config.seed = seed;
    return config;
}

FoamPhantom generate_foam(const FoamConfig& config) {
    if (!(config.cylinder_radius > 0.0) || !(config.cylinder_half_height > 0.0))
        throw std::invalid_argument("generate_foam: cylinder dimensions must be positive");
    if (!(config.min_radius_fraction > 0.0) || config.max_radius_fraction < config.min_radius_fraction ||
        config.max_radius_fraction >= 1.0)
        throw std::invalid_argument("generate_foam: invalid ball radius range");
    if (!(config.density >= 0.0))
        throw std::invalid_argument("generate_foam: density must be non-negative");

    FoamPhantom p;
    p.cylinder_radius = config.cylinder_radius;
    p.cylinder_half_height = config.cylinder_half_height;
    p.density = config.density;
    p.seed = config.seed;
    p.balls.reserve(config.n_balls);

    const double r_min = config.min_radius_fraction * config.cylinder_radius;
    const double r_max = config.max_radius_fraction * config.cylinder_radius;
    if (r_max >= config.cylinder_half_height)
        throw std::invalid_argument("generate_foam: balls do not fit in the cylinder height");

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t rejections = 0;
    while (p.balls.size() < config.n_balls) {
        Ball b;
        b.radius = r_min + (r_max - r_min) * unit(rng);
        const double radial = (config.cylinder_radius - b.radius) * std::sqrt(unit(rng));
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        const double z = (config.cylinder_half_height - b.radius) * (2.0 * unit(rng) - 1.0);
        b.center = {radial * std::cos(phi), radial * std::sin(phi), z};
        if (overlaps_(p.balls, b)) {
            if (++rejections >= 1'000'000)
                throw CapacityExceeded("generate_foam: could not place ball " + std::to_string(p.balls.size() + 1) +
                                       " after 10^6 attempts");
            continue;
        }
        rejections = 0;
        p.balls.push_back(b);
    }
    return p;
}

Sinogram project_foam(const FoamPhantom& p, const Geometry& g, std::size_t supersampling) {
    g.validate();
    if (supersampling == 0)
        throw std::invalid_argument("project_foam: supersampling must be at least 1");
    const std::size_t ss = supersampling;
    const std::size_t sub_rows = g.det_rows * ss;
    const std::size_t sub_cols = g.det_cols * ss;
    const double inv_ss = 1.0 / static_cast<double>(ss);

    // Sub-ray (a, b) sits at fractional detector position index/ss + (0.5/ss - 0.5).
    auto sub_t = [&](std::size_t b) {
        return g.t_of(static_cast<double>(b) * inv_ss + 0.5 * inv_ss - 0.5);
    };
    auto sub_z = [&](std::size_t a) {
        return g.z_of(static_cast<double>(a) * inv_ss + 0.5 * inv_ss - 0.5);
    };
    auto sub_index_from_t = [&](double t) { return (g.column_of(t) + 0.5 - 0.5 * inv_ss) * static_cast<double>(ss); };
    auto sub_index_from_z = [&](double z) { return (g.row_of(z) + 0.5 - 0.5 * inv_ss) * static_cast<double>(ss); };

    std::vector<double> cylinder_cols(sub_cols);
    for (std::size_t b = 0; b < sub_cols; ++b) {
        const double t = sub_t(b);
        cylinder_cols[b] = chord_(p.cylinder_radius * p.cylinder_radius, t * t);
    }
    std::vector<char> inside_rows(sub_rows);
    for (std::size_t a = 0; a < sub_rows; ++a)
        inside_rows[a] = std::abs(sub_z(a)) <= p.cylinder_half_height;

    Sinogram s = Sinogram::zeros(g);
    parallel_for(0, g.n_angles(), [&](std::size_t angle) {
        const double c = std::cos(g.angles[angle]);
        const double sn = std::sin(g.angles[angle]);
        std::vector<double> grid(sub_rows * sub_cols, 0.0);
        for (std::size_t a = 0; a < sub_rows; ++a) {
            if (!inside_rows[a])
                continue;
            std::copy(cylinder_cols.begin(), cylinder_cols.end(), grid.begin() + static_cast<long>(a * sub_cols));
        }
        for (const Ball& ball : p.balls) {
            const double tc = ball.center.x * c + ball.center.y * sn;
            const double zc = ball.center.z;
            const double r2 = ball.radius * ball.radius;
            const long b0 = std::max(0L, static_cast<long>(std::floor(sub_index_from_t(tc - ball.radius))));
            const long b1 = std::min(static_cast<long>(sub_cols) - 1,
                                     static_cast<long>(std::ceil(sub_index_from_t(tc + ball.radius))));
            const long a0 = std::max(0L, static_cast<long>(std::floor(sub_index_from_z(zc - ball.radius))));
            const long a1 = std::min(static_cast<long>(sub_rows) - 1,
                                     static_cast<long>(std::ceil(sub_index_from_z(zc + ball.radius))));
            for (long a = a0; a <= a1; ++a) {
                const double dz = sub_z(static_cast<std::size_t>(a)) - zc;
                const double dz2 = dz * dz;
                if (dz2 >= r2)
                    continue;
                double* line = grid.data() + a * static_cast<long>(sub_cols);
                for (long b = b0; b <= b1; ++b) {
                    const double dt = sub_t(static_cast<std::size_t>(b)) - tc;
                    line[b] -= chord_(r2, dt * dt + dz2);
                }
            }
        }
        const double scale = p.density * inv_ss * inv_ss;
        for (std::size_t r = 0; r < g.det_rows; ++r) {
            std::span<float> out = s.row(angle, r);
            for (std::size_t col = 0; col < g.det_cols; ++col) {
                double sum = 0.0;
                for (std::size_t a = r * ss; a < (r + 1) * ss; ++a)
                    for (std::size_t b = col * ss; b < (col + 1) * ss; ++b)
                        sum += grid[a * sub_cols + b];
                out[col] = static_cast<float>(std::max(0.0, sum * scale));
            }
        }
    });
    return s;
}

Volume voxelize_foam(const FoamPhantom& p, VolumeShape shape, double voxel_size) {
    Volume v = Volume::zeros(shape, voxel_size);
    const std::size_t sx = 2 * shape.nx;
    const std::size_t sy = 2 * shape.ny;
    const std::size_t sz = 2 * shape.nz;
    // Subsample (a, b, c) sits at voxel index a/2 - 0.25.
    auto sub_pos = [&](std::size_t a, std::size_t b, std::size_t c) {
        return voxel_center(shape, voxel_size, 0.5 * static_cast<double>(a) - 0.25,
                            0.5 * static_cast<double>(b) - 0.25, 0.5 * static_cast<double>(c) - 0.25);
    };
    std::vector<unsigned char> solid(sx * sy * sz, 0);
    const double r2 = p.cylinder_radius * p.cylinder_radius;
    parallel_for(0, sz, [&](std::size_t c) {
        for (std::size_t b = 0; b < sy; ++b)
            for (std::size_t a = 0; a < sx; ++a) {
                const Vec3 q = sub_pos(a, b, c);
                solid[(c * sy + b) * sx + a] =
                    (q.x * q.x + q.y * q.y < r2 && std::abs(q.z) < p.cylinder_half_height) ? 1 : 0;
            }
    });
    auto sub_index = [&](double world, std::size_t n) {
        return (world / voxel_size + 0.5 * static_cast<double>(n - 1) + 0.25) * 2.0;
    };
    for (const Ball& ball : p.balls) {
        const double br2 = ball.radius * ball.radius;
        auto range = [&](double center, std::size_t n, std::size_t sub_n) {
            const long lo = std::max(0L, static_cast<long>(std::floor(sub_index(center - ball.radius, n))));
            const long hi = std::min(static_cast<long>(sub_n) - 1,
                                     static_cast<long>(std::ceil(sub_index(center + ball.radius, n))));
            return std::pair{lo, hi};
        };
        const auto [a0, a1] = range(ball.center.x, shape.nx, sx);
        const auto [b0, b1] = range(ball.center.y, shape.ny, sy);
        const auto [c0, c1] = range(ball.center.z, shape.nz, sz);
        for (long c = c0; c <= c1; ++c)
            for (long b = b0; b <= b1; ++b)
                for (long a = a0; a <= a1; ++a) {
                    const Vec3 d = sub_pos(static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                                           static_cast<std::size_t>(c)) - ball.center;
                    if (dot(d, d) < br2)
                        solid[(static_cast<std::size_t>(c) * sy + static_cast<std::size_t>(b)) * sx +
                              static_cast<std::size_t>(a)] = 0;
                }
    }
    const float unit = static_cast<float>(p.density / 8.0);
    for (std::size_t k = 0; k < shape.nz; ++k)
        for (std::size_t j = 0; j < shape.ny; ++j)
            for (std::size_t i = 0; i < shape.nx; ++i) {
                int count = 0;
                for (std::size_t dc = 0; dc < 2; ++dc)
                    for (std::size_t db = 0; db < 2; ++db)
                        for (std::size_t da = 0; da < 2; ++da)
                            count += solid[((2 * k + dc) * sy + 2 * j + db) * sx + 2 * i + da];
                v.at(i, j, k) = count == 8 ? static_cast<float>(p.density) : unit * static_cast<float>(count);
            }
    return v;
}

Sinogram apply_poisson_noise(const Sinogram& s, const NoiseSpec& spec) {
    s.validate();
    if (!(spec.photon_count > 0.0) || !std::isfinite(spec.photon_count))
        throw std::invalid_argument("apply_poisson_noise: photon count must be positive");
    if (std::any_of(s.data.begin(), s.data.end(), [](float x) { return x < 0.0f; }))
        throw std::invalid_argument("apply_poisson_noise: line integrals must be non-negative");

    Sinogram noisy = s;
    const Geometry& g = s.geometry;
    const std::size_t per_angle = g.det_rows * g.det_cols;
    const double i0 = spec.photon_count;
    const double log_i0 = std::log(i0);
    SplitMix64 seeder{spec.seed};
    const std::uint64_t base = seeder();
    parallel_for(0, g.n_angles(), [&](std::size_t angle) {
        for (std::size_t i = angle * per_angle; i < (angle + 1) * per_angle; ++i) {
            SplitMix64 mix{base ^ (0xd1b54a32d192ed03ull * (i + 1))};
            SplitMix64 rng{mix()};
            const double mean = i0 * std::exp(-static_cast<double>(s.data[i]));
            std::poisson_distribution<std::uint64_t> poisson(mean);
            const std::uint64_t count = mean > 0.0 ? poisson(rng) : 0;
            noisy.data[i] = static_cast<float>(log_i0 - std::log(static_cast<double>(std::max<std::uint64_t>(count, 1))));
        }
    });
    return noisy;
}

double mean_absorption(const Sinogram& s) {
    double sum = 0.0;
    std::size_t hits = 0;
    for (float p : s.data) {
        if (p <= 0.0f)
            continue;
        sum += 1.0 - std::exp(-static_cast<double>(p));
        ++hits;
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

FoamPhantom calibrate_density(const FoamPhantom& p, const Geometry& g, double target_absorption) {
    if (!(target_absorption >= 0.0 && target_absorption < 1.0))
        throw std::invalid_argument("calibrate_density: target absorption must lie in [0, 1)");
    FoamPhantom out = p;
    if (target_absorption == 0.0) {
        out.density = 0.0;
        return out;
    }
    FoamPhantom unit = p;
    unit.density = 1.0;
    const Sinogram s = project_foam(unit, g, 2);
    std::vector<double> paths;
    for (float v : s.data)
        if (v > 0.0f)
            paths.push_back(v);
    if (paths.empty())
        throw std::invalid_argument("calibrate_density: no ray intersects the phantom");
    auto absorption = [&](double density) {
        double sum = 0.0;
        for (double path : paths)
            sum += 1.0 - std::exp(-density * path);
        return sum / static_cast<double>(paths.size());
    };
    double lo = 0.0;
    double hi = 1.0;
    while (absorption(hi) < target_absorption) {
        hi *= 2.0;
        if (hi > 1e12)
            throw std::invalid_argument("calibrate_density: target absorption is unreachable");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (absorption(mid) < target_absorption ? lo : hi) = mid;
    }
    out.density = 0.5 * (lo + hi);
    return out;
}

} // namespace n2f

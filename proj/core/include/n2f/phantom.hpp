#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "n2f/geometry.hpp"
#include "n2f/projector.hpp"
#include "n2f/vec3.hpp"

namespace n2f {

struct Ball {
    Vec3 center;
    double radius = 0.0;

    friend bool operator==(const Ball&, const Ball&) = default;
};

/// A solid cylinder along z, centered at the origin, with spherical voids.
/// Lengths are in voxel units.
struct FoamPhantom {
    double cylinder_radius = 0.0;
    double cylinder_half_height = 0.0;
    std::vector<Ball> balls;
    double density = 1.0;  // attenuation per unit length
    std::uint64_t seed = 0;

    friend bool operator==(const FoamPhantom&, const FoamPhantom&) = default;
};

struct FoamConfig {
    double cylinder_radius = 51.2;
    double cylinder_half_height = 51.2;
    std::size_t n_balls = 1000;
    /// Ball radii are uniform in [min, max] times the cylinder radius.
    double min_radius_fraction = 0.03;
    double max_radius_fraction = 0.1;
    double density = 1.0;
    std::uint64_t seed = 0;
};

/// Cylinder radius and half height 0.4 * n for an n^3 volume.
FoamConfig default_foam_config(std::size_t n, std::uint64_t seed);

/// Rejection sampling of non-overlapping balls strictly inside the cylinder.
/// Throws CapacityExceeded after 10^6 consecutive rejections.
FoamPhantom generate_foam(const FoamConfig& config);

/// Exact line integrals, averaged over supersampling^2 rays per detector pixel.
Sinogram project_foam(const FoamPhantom& p, const Geometry& g, std::size_t supersampling = 2);

/// Attenuation per voxel, antialiased with 2x2x2 subsamples.
Volume voxelize_foam(const FoamPhantom& p, VolumeShape shape, double voxel_size = 1.0);

struct NoiseSpec {
    double photon_count = 1000.0;  // I0, expected photons per pixel without absorption
    std::uint64_t seed = 0;
};

/// Poisson counts c ~ Poisson(I0 exp(-p)), returned as -log(max(c, 1) / I0).
/// Every pixel draws from its own stream, so the result does not depend on threading.
Sinogram apply_poisson_noise(const Sinogram& s, const NoiseSpec& spec);

/// Mean of 1 - exp(-p) over the rays that hit the phantom.
double mean_absorption(const Sinogram& s);

/// Rescales the density so that the mean absorption of rays hitting the
/// cylinder equals target_absorption.
FoamPhantom calibrate_density(const FoamPhantom& p, const Geometry& g, double target_absorption);

} // namespace n2f

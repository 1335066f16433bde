#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "n2f/filters.hpp"
#include "n2f/geometry.hpp"
#include "n2f/projector.hpp"

namespace n2f {

/// backproject_slice(convolve_sinogram(s, f), o).
SliceImage fbp_slice(const Sinogram& s, const Filter& f, const SliceOrientation& o,
                     const BackprojectOptions& options = {});
Volume fbp_volume(const Sinogram& s, const Filter& f, VolumeShape shape, double voxel_size = 1.0);

enum class SubsetMode { single, complement };

/// FBP from the angles of subset j (single) or of every other subset
/// (complement), weighted by pi / (angles used).
SliceImage fbp_subset_slice(const Sinogram& s, const AngularSplit& split, std::size_t j, const Filter& f,
                            const SliceOrientation& o, SubsetMode mode);

/// Same, for a sinogram that has already been convolved.
SliceImage backproject_subset_slice(const Sinogram& filtered, const AngularSplit& split, std::size_t j,
                                    const SliceOrientation& o, SubsetMode mode);

/// Convolved copies of one sinogram, one per filter. Immutable once built, so
/// any number of threads may backproject from it at the same time.
class FilteredStack {
public:
    FilteredStack() = default;
    FilteredStack(std::vector<Sinogram> filtered, std::vector<std::uint64_t> filter_fingerprints);

    [[nodiscard]] std::size_t size() const noexcept { return filtered_.size(); }
    [[nodiscard]] const Sinogram& operator[](std::size_t k) const { return filtered_.at(k); }
    [[nodiscard]] const Geometry& geometry() const;
    [[nodiscard]] std::span<const std::uint64_t> filter_fingerprints() const noexcept { return fingerprints_; }

    /// Backprojection of filtered sinogram k onto o.
    [[nodiscard]] SliceImage backproject(std::size_t k, const SliceOrientation& o,
                                         const BackprojectOptions& options = {}) const;

private:
    std::vector<Sinogram> filtered_;
    std::vector<std::uint64_t> fingerprints_;
};

FilteredStack filter_and_cache(const Sinogram& s, std::span<const Filter> filters);

} // namespace n2f

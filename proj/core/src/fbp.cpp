#include "n2f/fbp.hpp"

#include <stdexcept>

namespace n2f {

SliceImage fbp_slice(const Sinogram& s, const Filter& f, const SliceOrientation& o,
                     const BackprojectOptions& options) {
    return backproject_slice(convolve_sinogram(s, f), o, options);
}

Volume fbp_volume(const Sinogram& s, const Filter& f, VolumeShape shape, double voxel_size) {
    return backproject_volume(convolve_sinogram(s, f), shape, voxel_size);
}

SliceImage backproject_subset_slice(const Sinogram& filtered, const AngularSplit& split, std::size_t j,
                                    const SliceOrientation& o, SubsetMode mode) {
    if (split.n_angles != filtered.geometry.n_angles())
        throw std::invalid_argument("subset FBP: split does not match the sinogram");
    if (j >= split.n_splits())
        throw std::invalid_argument("subset FBP: subset index out of range");
    std::vector<std::size_t> angles = mode == SubsetMode::single ? split.subsets[j] : split.complement(j);
    BackprojectOptions options;
    options.angles = angles;
    return backproject_slice(filtered, o, options);
}

SliceImage fbp_subset_slice(const Sinogram& s, const AngularSplit& split, std::size_t j, const Filter& f,
                            const SliceOrientation& o, SubsetMode mode) {
    return backproject_subset_slice(convolve_sinogram(s, f), split, j, o, mode);
}

FilteredStack::FilteredStack(std::vector<Sinogram> filtered, std::vector<std::uint64_t> filter_fingerprints)
    : filtered_(std::move(filtered)), fingerprints_(std::move(filter_fingerprints)) {
    if (filtered_.empty())
        throw std::invalid_argument("FilteredStack: at least one filtered sinogram is required");
    if (fingerprints_.size() != filtered_.size())
        throw std::invalid_argument("FilteredStack: one fingerprint per filter is required");
    for (const Sinogram& s : filtered_)
        if (!(s.geometry == filtered_.front().geometry))
            throw std::invalid_argument("FilteredStack: sinograms must share one geometry");
}

const Geometry& FilteredStack::geometry() const {
    if (filtered_.empty())
        throw std::logic_error("FilteredStack: empty stack");
    return filtered_.front().geometry;
}

SliceImage FilteredStack::backproject(std::size_t k, const SliceOrientation& o,
                                      const BackprojectOptions& options) const {
    return backproject_slice(filtered_.at(k), o, options);
}

FilteredStack filter_and_cache(const Sinogram& s, std::span<const Filter> filters) {
    if (filters.empty())
        throw std::invalid_argument("filter_and_cache: at least one filter is required");
    std::vector<std::uint64_t> fingerprints;
    for (const Filter& f : filters)
        fingerprints.push_back(f.fingerprint());
    return FilteredStack(convolve_sinogram(s, filters), std::move(fingerprints));
}

} // namespace n2f

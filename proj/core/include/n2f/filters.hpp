#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "n2f/projector.hpp"

namespace n2f {

/// Dense 1D filter on the offsets [-half_width, half_width].
class Filter {
public:
    Filter() = default;
    explicit Filter(std::size_t half_width);
    /// coeffs[k + half_width] holds the tap at offset k.
    Filter(std::size_t half_width, std::vector<double> coeffs);

    static Filter delta(std::size_t half_width);

    [[nodiscard]] std::size_t half_width() const noexcept { return half_width_; }
    [[nodiscard]] std::size_t size() const noexcept { return coeffs_.size(); }
    [[nodiscard]] std::span<const double> coeffs() const noexcept { return coeffs_; }

    /// Tap at offset k; zero outside the support.
    [[nodiscard]] double at(long k) const noexcept;
    void set(long k, double value);

    [[nodiscard]] bool is_symmetric(double tol = 1e-12) const noexcept;
    /// FNV-1a over the coefficient bytes; identifies a filter bit-exactly.
    [[nodiscard]] std::uint64_t fingerprint() const noexcept;

    friend bool operator==(const Filter&, const Filter&) = default;

private:
    std::size_t half_width_ = 0;
    std::vector<double> coeffs_{0.0};
};

/// Piecewise-linear filter basis on exponentially growing knots
/// 0, 1, 2, 4, ..., 2^m, half_width. Element i is the symmetric hat that is 1 at
/// offset +-knots[i] and falls linearly to 0 at the neighbouring knots.
struct ExpBinBasis {
    std::size_t half_width = 0;
    std::vector<std::size_t> knots;

    [[nodiscard]] std::size_t size() const noexcept { return knots.size(); }
    friend bool operator==(const ExpBinBasis&, const ExpBinBasis&) = default;
};

ExpBinBasis make_basis(std::size_t half_width);
Filter basis_element(const ExpBinBasis& basis, std::size_t i);
/// sum_i c[i] * basis_element(i), i.e. linear interpolation of c between knots.
Filter expand_filter(const ExpBinBasis& basis, std::span<const double> c);

/// Filters span the whole detector row.
inline std::size_t default_half_width(const Geometry& g) { return g.det_cols - 1; }

/// Band-limited ramp: 1/(4T^2) at 0, -1/(pi^2 k^2 T^2) at odd k, 0 at even k.
Filter ram_lak(std::size_t half_width, double pixel_size = 1.0);

/// Linear convolution of every detector row with f, out[j] = sum_k f[k] * in[j-k],
/// zero outside the row. FFT length is the next power of two >= det_cols + 2*half_width.
Sinogram convolve_sinogram(const Sinogram& s, const Filter& f);
/// Same as above for several filters of one half width; the forward transform of
/// each row is shared.
/// Result k is bit-identical to convolve_sinogram(s, filters[k]).
std::vector<Sinogram> convolve_sinogram(const Sinogram& s, std::span<const Filter> filters);

/// f convolved with a unit-sum sampled Gaussian of standard deviation sigma
/// (support +-ceil(4 sigma)), cropped back to f's half width.
Filter gaussian_smooth(const Filter& f, double sigma);

/// Zeroes every frequency above f_sc * Nyquist in the filter's periodic
/// (length 2*half_width+1) spectrum. f_sc in (0, 1].
Filter frequency_scale(const Filter& f, double f_sc);

} // namespace n2f

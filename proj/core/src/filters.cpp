#include "n2f/filters.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "n2f/parallel.hpp"

namespace n2f {

namespace {
    std::size_t next_pow2_(std::size_t n) {
        std::size_t p = 1;
        while (p < n)
            p <<= 1;
        return p;
    }

    struct FftwFree {
        void operator()(void* p) const noexcept { fftw_free(p); }
    };
    using RealBuffer = std::unique_ptr<double, FftwFree>;
    using ComplexBuffer = std::unique_ptr<fftw_complex, FftwFree>;

    RealBuffer alloc_real_(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
    ComplexBuffer alloc_complex_(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

    // Plans are created once per length and shared; fftw_execute_dft_* on
    // fresh fftw_malloc'd arrays is safe from any thread.
    struct RealPlans {
        fftw_plan forward = nullptr;
        fftw_plan backward = nullptr;
    };

    const RealPlans& plans_for_(std::size_t n) {
        static std::mutex mutex;
        static std::map<std::size_t, RealPlans> cache;
        std::lock_guard lock(mutex);
        auto it = cache.find(n);
        if (it != cache.end())
            return it->second;
        RealBuffer in = alloc_real_(n);
        ComplexBuffer out = alloc_complex_(n / 2 + 1);
        RealPlans plans;
        const int len = static_cast<int>(n);
        plans.forward = fftw_plan_dft_r2c_1d(len, in.get(), out.get(), FFTW_ESTIMATE);
        plans.backward = fftw_plan_dft_c2r_1d(len, out.get(), in.get(), FFTW_ESTIMATE);
        if (!plans.forward || !plans.backward)
            throw std::runtime_error("fftw: plan creation failed");
        return cache.emplace(n, plans).first->second;
    }

    // Spectrum of f laid out circularly (tap k at index k mod n).
    std::vector<std::complex<double>> filter_spectrum_(const Filter& f, std::size_t n) {
        const RealPlans& plans = plans_for_(n);
        RealBuffer in = alloc_real_(n);
        ComplexBuffer out = alloc_complex_(n / 2 + 1);
        std::fill(in.get(), in.get() + n, 0.0);
        const long hw = static_cast<long>(f.half_width());
        const long ln = static_cast<long>(n);
        for (long k = -hw; k <= hw; ++k)
            in.get()[((k % ln) + ln) % ln] += f.at(k);
        fftw_execute_dft_r2c(plans.forward, in.get(), out.get());
        std::vector<std::complex<double>> spectrum(n / 2 + 1);
        for (std::size_t m = 0; m < spectrum.size(); ++m)
            spectrum[m] = {out.get()[m][0], out.get()[m][1]};
        return spectrum;
    }

    double hat_value_(const ExpBinBasis& basis, std::size_t i, double offset) {
        const double d = std::abs(offset);
        const double knot = static_cast<double>(basis.knots[i]);
        if (d == knot)
            return 1.0;
        if (d < knot) {
            if (i == 0)
                return 0.0;
            const double lo = static_cast<double>(basis.knots[i - 1]);
            return d <= lo ? 0.0 : (d - lo) / (knot - lo);
        }
        if (i + 1 >= basis.knots.size())
            return 0.0;
        const double hi = static_cast<double>(basis.knots[i + 1]);
        return d >= hi ? 0.0 : (hi - d) / (hi - knot);
    }
}

Filter::Filter(std::size_t half_width) : half_width_(half_width), coeffs_(2 * half_width + 1, 0.0) {}

Filter::Filter(std::size_t half_width, std::vector<double> coeffs)
    : half_width_(half_width), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != 2 * half_width_ + 1)
        throw std::invalid_argument("Filter: coefficient count must be 2*half_width+1");
    if (!std::all_of(coeffs_.begin(), coeffs_.end(), [](double x) { return std::isfinite(x); }))
        throw std::invalid_argument("Filter: non-finite coefficient");
}

Filter Filter::delta(std::size_t half_width) {
    Filter f(half_width);
    f.set(0, 1.0);
    return f;
}

double Filter::at(long k) const noexcept {
    const long hw = static_cast<long>(half_width_);
    if (k < -hw || k > hw)
        return 0.0;
    return coeffs_[static_cast<std::size_t>(k + hw)];
}

void Filter::set(long k, double value) {
    const long hw = static_cast<long>(half_width_);
    if (k < -hw || k > hw)
        throw std::out_of_range("Filter::set: offset outside support");
    coeffs_[static_cast<std::size_t>(k + hw)] = value;
}

bool Filter::is_symmetric(double tol) const noexcept {
    const long hw = static_cast<long>(half_width_);
    for (long k = 1; k <= hw; ++k)
        if (std::abs(at(k) - at(-k)) > tol)
            return false;
    return true;
}

std::uint64_t Filter::fingerprint() const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    const std::uint64_t hw = half_width_;
    mix(&hw, sizeof(hw));
    mix(coeffs_.data(), coeffs_.size() * sizeof(double));
    return h;
}

ExpBinBasis make_basis(std::size_t half_width) {
    if (half_width == 0)
        throw std::invalid_argument("make_basis: half_width must be at least 1");
    ExpBinBasis basis;
    basis.half_width = half_width;
    basis.knots = {0, 1};
    while (basis.knots.back() < half_width)
        basis.knots.push_back(std::min(2 * basis.knots.back(), half_width));
    return basis;
}

Filter basis_element(const ExpBinBasis& basis, std::size_t i) {
    if (i >= basis.size())
        throw std::out_of_range("basis_element: index out of range");
    Filter f(basis.half_width);
    const long hw = static_cast<long>(basis.half_width);
    const long lo = i == 0 ? 0 : static_cast<long>(basis.knots[i - 1]);
    const long hi = i + 1 < basis.size() ? static_cast<long>(basis.knots[i + 1]) : hw;
    for (long k = lo; k <= hi; ++k) {
        const double value = hat_value_(basis, i, static_cast<double>(k));
        f.set(k, value);
        f.set(-k, value);
    }
    return f;
}

Filter expand_filter(const ExpBinBasis& basis, std::span<const double> c) {
    if (c.size() != basis.size())
        throw std::invalid_argument("expand_filter: coefficient count does not match basis");
    Filter f(basis.half_width);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const long lo = i == 0 ? 0 : static_cast<long>(basis.knots[i - 1]);
        const long hi = i + 1 < basis.size() ? static_cast<long>(basis.knots[i + 1])
                                             : static_cast<long>(basis.half_width);
        for (long k = lo; k <= hi; ++k) {
            const double v = c[i] * hat_value_(basis, i, static_cast<double>(k));
            if (v == 0.0)
                continue;
            f.set(k, f.at(k) + v);
            if (k != 0)
                f.set(-k, f.at(-k) + v);
        }
    }
    return f;
}

Filter ram_lak(std::size_t half_width, double pixel_size) {
    if (half_width == 0)
        throw std::invalid_argument("ram_lak: half_width must be at least 1");
    if (!(pixel_size > 0.0))
        throw std::invalid_argument("ram_lak: pixel size must be positive");
    Filter f(half_width);
    const double t2 = pixel_size * pixel_size;
    f.set(0, 1.0 / (4.0 * t2));
    for (long k = 1; k <= static_cast<long>(half_width); k += 2) {
        const double v = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(k * k) * t2);
        f.set(k, v);
        f.set(-k, v);
    }
    return f;
}

std::vector<Sinogram> convolve_sinogram(const Sinogram& s, std::span<const Filter> filters) {
    const Geometry& g = s.geometry;
    if (s.data.size() != g.n_pixels())
        throw std::invalid_argument("convolve_sinogram: sinogram data does not match geometry");
    std::vector<Sinogram> out;
    if (filters.empty())
        return out;

    const std::size_t hw = filters.front().half_width();
    for (const Filter& f : filters)
        if (f.half_width() != hw)
            throw std::invalid_argument("convolve_sinogram: filters must share one half width");
    const std::size_t n = next_pow2_(g.det_cols + 2 * hw);
    const std::size_t n_freq = n / 2 + 1;
    const RealPlans& plans = plans_for_(n);

    std::vector<std::vector<std::complex<double>>> spectra;
    spectra.reserve(filters.size());
    for (const Filter& f : filters)
        spectra.push_back(filter_spectrum_(f, n));

    out.reserve(filters.size());
    for (std::size_t k = 0; k < filters.size(); ++k) {
        Sinogram filtered;
        filtered.geometry = g;
        filtered.data.assign(s.data.size(), 0.0f);
        out.push_back(std::move(filtered));
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    parallel_for(0, g.n_angles(), [&](std::size_t a) {
        RealBuffer line = alloc_real_(n);
        ComplexBuffer freq = alloc_complex_(n_freq);
        ComplexBuffer product = alloc_complex_(n_freq);
        for (std::size_t r = 0; r < g.det_rows; ++r) {
            const std::span<const float> src = s.row(a, r);
            std::fill(line.get(), line.get() + n, 0.0);
            std::copy(src.begin(), src.end(), line.get());
            fftw_execute_dft_r2c(plans.forward, line.get(), freq.get());
            for (std::size_t k = 0; k < filters.size(); ++k) {
                const auto& h = spectra[k];
                for (std::size_t m = 0; m < n_freq; ++m) {
                    const std::complex<double> x(freq.get()[m][0], freq.get()[m][1]);
                    const std::complex<double> y = x * h[m];
                    product.get()[m][0] = y.real();
                    product.get()[m][1] = y.imag();
                }
                fftw_execute_dft_c2r(plans.backward, product.get(), line.get());
                std::span<float> dst = out[k].row(a, r);
                for (std::size_t c = 0; c < g.det_cols; ++c)
                    dst[c] = static_cast<float>(line.get()[c] * inv_n);
            }
        }
    });
    return out;
}

Sinogram convolve_sinogram(const Sinogram& s, const Filter& f) {
    auto out = convolve_sinogram(s, std::span<const Filter>(&f, 1));
    return std::move(out.front());
}

Filter gaussian_smooth(const Filter& f, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("gaussian_smooth: sigma must be positive");
    const long radius = static_cast<long>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (long j = -radius; j <= radius; ++j) {
        const double v = std::exp(-static_cast<double>(j * j) / (2.0 * sigma * sigma)) /
                         (sigma * std::sqrt(2.0 * std::numbers::pi));
        kernel[static_cast<std::size_t>(j + radius)] = v;
        total += v;
    }
    for (double& v : kernel)
        v /= total;

    const long hw = static_cast<long>(f.half_width());
    Filter out(f.half_width());
    for (long k = -hw; k <= hw; ++k) {
        double sum = 0.0;
        for (long j = -radius; j <= radius; ++j)
            sum += kernel[static_cast<std::size_t>(j + radius)] * f.at(k - j);
        out.set(k, sum);
    }
    return out;
}

Filter frequency_scale(const Filter& f, double f_sc) {
    if (!(f_sc > 0.0 && f_sc <= 1.0))
        throw std::invalid_argument("frequency_scale: f_sc must lie in (0, 1]");
    const std::size_t n = f.size();
    std::vector<std::complex<double>> spectrum = filter_spectrum_(f, n);
    // Bin m sits at m/n cycles per sample; Nyquist is 1/2.
    const double cutoff = f_sc * 0.5 * static_cast<double>(n);
    for (std::size_t m = 0; m < spectrum.size(); ++m)
        if (static_cast<double>(m) > cutoff)
            spectrum[m] = 0.0;

    const RealPlans& plans = plans_for_(n);
    ComplexBuffer freq = alloc_complex_(n / 2 + 1);
    RealBuffer line = alloc_real_(n);
    for (std::size_t m = 0; m < spectrum.size(); ++m) {
        freq.get()[m][0] = spectrum[m].real();
        freq.get()[m][1] = spectrum[m].imag();
    }
    fftw_execute_dft_c2r(plans.backward, freq.get(), line.get());

    const long hw = static_cast<long>(f.half_width());
    const long ln = static_cast<long>(n);
    Filter out(f.half_width());
    for (long k = -hw; k <= hw; ++k)
        out.set(k, line.get()[((k % ln) + ln) % ln] / static_cast<double>(n));
    if (f.is_symmetric(0.0)) {
        for (long k = 1; k <= hw; ++k) {
            const double mean = 0.5 * (out.at(k) + out.at(-k));
            out.set(k, mean);
            out.set(-k, mean);
        }
    }
    return out;
}

} // namespace n2f

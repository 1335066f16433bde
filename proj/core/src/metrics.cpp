#include "n2f/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "n2f/fbp.hpp"
#include "n2f/geometry.hpp"

namespace n2f {

namespace {
    constexpr std::size_t window_size_ = 11;
    constexpr double window_sigma_ = 1.5;

    std::array<double, window_size_> gaussian_window_() {
        std::array<double, window_size_> w{};
        const double c = 0.5 * static_cast<double>(window_size_ - 1);
        double total = 0.0;
        for (std::size_t i = 0; i < window_size_; ++i) {
            const double d = static_cast<double>(i) - c;
            w[i] = std::exp(-d * d / (2.0 * window_sigma_ * window_sigma_));
            total += w[i];
        }
        for (double& v : w)
            v /= total;
        return w;
    }

    // Separable "valid" filtering with the Gaussian window.
    std::vector<double> filter_valid_(const std::vector<double>& img, std::size_t width, std::size_t height,
                                      const std::array<double, window_size_>& w) {
        const std::size_t ow = width - window_size_ + 1;
        const std::size_t oh = height - window_size_ + 1;
        std::vector<double> tmp(height * ow);
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < ow; ++c) {
                double sum = 0.0;
                for (std::size_t k = 0; k < window_size_; ++k)
                    sum += w[k] * img[r * width + c + k];
                tmp[r * ow + c] = sum;
            }
        std::vector<double> out(oh * ow);
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t c = 0; c < ow; ++c) {
                double sum = 0.0;
                for (std::size_t k = 0; k < window_size_; ++k)
                    sum += w[k] * tmp[(r + k) * ow + c];
                out[r * ow + c] = sum;
            }
        return out;
    }

    void check_same_shape_(const SliceImage& x, const SliceImage& ref) {
        if (x.width() != ref.width() || x.height() != ref.height())
            throw std::invalid_argument("metrics: images differ in shape");
    }
}

double psnr(std::span<const double> x, std::span<const double> ref, double data_range) {
    if (x.size() != ref.size() || x.empty())
        throw std::invalid_argument("psnr: images must be non-empty and equally sized");
    if (!(data_range > 0.0))
        throw std::invalid_argument("psnr: data range must be positive");
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - ref[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(x.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double psnr(const SliceImage& x, const SliceImage& ref, double range) {
    check_same_shape_(x, ref);
    return psnr(x.data, ref.data, range);
}

double ssim(std::span<const double> x, std::span<const double> ref, std::size_t width, std::size_t height,
            double data_range) {
    if (x.size() != width * height || ref.size() != width * height)
        throw std::invalid_argument("ssim: image size does not match the given shape");
    if (width < window_size_ || height < window_size_)
        throw std::invalid_argument("ssim: images must be at least 11x11");
    if (!(data_range > 0.0))
        throw std::invalid_argument("ssim: data range must be positive");
    const auto w = gaussian_window_();
    const std::vector<double> a(x.begin(), x.end());
    const std::vector<double> b(ref.begin(), ref.end());
    std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto mu_a = filter_valid_(a, width, height, w);
    const auto mu_b = filter_valid_(b, width, height, w);
    const auto e_aa = filter_valid_(aa, width, height, w);
    const auto e_bb = filter_valid_(bb, width, height, w);
    const auto e_ab = filter_valid_(ab, width, height, w);
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
        const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
                 ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
    }
    return total / static_cast<double>(mu_a.size());
}

double ssim(const SliceImage& x, const SliceImage& ref, double range) {
    check_same_shape_(x, ref);
    return ssim(x.data, ref.data, x.width(), x.height(), range);
}

double data_range(const SliceImage& ref) {
    if (ref.data.empty())
        throw std::invalid_argument("data_range: empty image");
    const auto [lo, hi] = std::minmax_element(ref.data.begin(), ref.data.end());
    return *hi - *lo;
}

Scores ortho_scores(std::span<const SliceImage> recon, std::span<const SliceImage> truth) {
    if (recon.size() != truth.size() || recon.empty())
        throw std::invalid_argument("ortho_scores: expected matching, non-empty slice lists");
    Scores mean;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const double range = data_range(truth[i]);
        mean.psnr += psnr(recon[i], truth[i], range);
        mean.ssim += ssim(recon[i], truth[i], range);
    }
    mean.psnr /= static_cast<double>(recon.size());
    mean.ssim /= static_cast<double>(recon.size());
    return mean;
}

std::array<SliceImage, 3> ground_truth_slices(const Volume& truth) {
    const auto planes = ortho_slices(truth.shape, truth.voxel_size);
    return {sample_volume(truth, planes[0]), sample_volume(truth, planes[1]), sample_volume(truth, planes[2])};
}

Filter baseline_filter(BaselineKind kind, double param, std::size_t half_width) {
    const Filter ramp = ram_lak(half_width);
    return kind == BaselineKind::gaussian ? gaussian_smooth(ramp, param) : frequency_scale(ramp, param);
}

GridSearchResult grid_search_baseline(const Sinogram& s, const Volume& truth, BaselineKind kind,
                                      std::span<const double> grid) {
    if (grid.empty())
        throw std::invalid_argument("grid_search_baseline: empty grid");
    const auto planes = ortho_slices(truth.shape, truth.voxel_size);
    const auto reference = ground_truth_slices(truth);
    const std::size_t hw = default_half_width(s.geometry);

    GridSearchResult result;
    result.params.assign(grid.begin(), grid.end());
    for (double param : grid) {
        const Sinogram filtered = convolve_sinogram(s, baseline_filter(kind, param, hw));
        std::array<SliceImage, 3> recon;
        for (std::size_t i = 0; i < 3; ++i)
            recon[i] = backproject_slice(filtered, planes[i]);
        result.scores.push_back(ortho_scores(recon, reference));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double a = result.scores[i].ssim;
        const double b = result.scores[best].ssim;
        if (a > b || (a == b && grid[i] < grid[best]))
            best = i;
    }
    result.best_param = grid[best];
    return result;
}

} // namespace n2f

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "n2f/filters.hpp"
#include "n2f/projector.hpp"

namespace n2f {

/// 10 log10(data_range^2 / MSE); +inf when the images are identical.
double psnr(std::span<const double> x, std::span<const double> ref, double data_range);
double psnr(const SliceImage& x, const SliceImage& ref, double data_range);

/// Mean local SSIM over the positions where an 11x11 Gaussian window
/// (sigma 1.5) fits inside the image; K1 = 0.01, K2 = 0.03.
double ssim(std::span<const double> x, std::span<const double> ref, std::size_t width, std::size_t height,
            double data_range);
double ssim(const SliceImage& x, const SliceImage& ref, double data_range);

/// max - min of an image.
double data_range(const SliceImage& ref);

struct Scores {
    double psnr = 0.0;
    double ssim = 0.0;
};

/// Means over the three ortho-slices; each slice uses its own reference range.
Scores ortho_scores(std::span<const SliceImage> recon, std::span<const SliceImage> truth);

/// The three ortho-slices sampled from a ground-truth volume.
std::array<SliceImage, 3> ground_truth_slices(const Volume& truth);

enum class BaselineKind { gaussian, freqscale };

/// Ram-Lak modified by gaussian_smooth(sigma) or frequency_scale(f_sc).
Filter baseline_filter(BaselineKind kind, double param, std::size_t half_width);

struct GridSearchResult {
    double best_param = 0.0;
    std::vector<double> params;
    std::vector<Scores> scores;  // same order as params
};

/// Ortho-slice-averaged SSIM for every grid value; the argmax wins and ties go
/// to the smaller parameter.
GridSearchResult grid_search_baseline(const Sinogram& s, const Volume& truth, BaselineKind kind,
                                      std::span<const double> grid);

} // namespace n2f

#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abscope/map_stack.hpp"

namespace abscope {

struct ProfileSample {
    double position;  // nm
    double value;
};

/// value(x) = amplitude * exp(-(x - center)^2 / (2 sigma^2)) + offset,
/// sigma = fwhm / (2 sqrt(2 ln 2)).
struct GaussianParams {
    double amplitude = 0.0;
    double center = 0.0;
    double fwhm = 1.0;
    double offset = 0.0;
};

/// Two Gaussians sharing one width and one offset.
struct TwoPeakParams {
    double amplitude1 = 0.0;
    double amplitude2 = 0.0;
    double center1 = 0.0;
    double center2 = 0.0;
    double fwhm = 1.0;
    double offset = 0.0;
};

double gaussian_model(const GaussianParams& p, double x);
/// d value / d (amplitude, center, fwhm, offset).
std::array<double, 4> gaussian_jacobian(const GaussianParams& p, double x);

double two_gaussian_model(const TwoPeakParams& p, double x);
/// d value / d (amplitude1, amplitude2, center1, center2, fwhm, offset).
std::array<double, 6> two_gaussian_jacobian(const TwoPeakParams& p, double x);

struct GaussianFit {
    GaussianParams params;
    /// Standard errors from the residual variance and (J^T J)^-1.
    GaussianParams std_err;
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct TwoPeakFit {
    TwoPeakParams params;
    double separation = 0.0;
    double separation_se = 0.0;
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Centres closer than the sample pitch: the profile looks like one peak.
    bool degenerate = false;
};

/// Damped Gauss-Newton fit. Needs >= 5 samples with strictly increasing
/// positions; starts from weighted moments unless `init` is given. A flat
/// profile returns converged = false.
GaussianFit fit_gaussian_1d(std::span<const ProfileSample> profile,
                            std::optional<GaussianParams> init = std::nullopt);

/// Needs >= 9 samples. Default start splits the single-Gaussian fit symmetrically.
TwoPeakFit fit_two_gaussians_1d(std::span<const ProfileSample> profile,
                                std::optional<TwoPeakParams> init = std::nullopt);

/// Classical lateral resolution limit lambda / (2 NA), nm.
double abbe_limit(double wavelength_nm, double numerical_aperture);

/// Row index whose y coordinate is closest to `y` (clamped to the grid).
int nearest_row(const ScanGrid& grid, double y);

/// Defined pixels of one grid row as (x, value) samples.
std::vector<ProfileSample> row_profile(const MapStack& maps, const std::string& layer, int row);

/// Layer holding the order-k image: `intensity` for k = 1, `sr<k>` otherwise.
std::string order_layer_name(int k);

struct NarrowingRow {
    int order = 1;
    std::string layer;
    double fitted_fwhm = 0.0;
    double scaled_fwhm = 0.0;  // fitted_fwhm * sqrt(k)
    double deviation = 0.0;    // scaled_fwhm / fwhm at k = 1, minus 1
    bool converged = false;
};

/// Fits the row through `emitter` in each order's layer. The k = 1 intensity
/// fit is always the reference. Throws MissingLayerError.
std::vector<NarrowingRow> narrowing_report(const MapStack& maps, Point emitter, std::span<const int> orders);

void write_narrowing_csv(std::ostream& os, std::span<const NarrowingRow> rows);

struct TwoPeakReport {
    std::string layer;
    int row = 0;
    TwoPeakFit fit;
};

/// Two-peak fit along `row` (default: the row holding the layer maximum).
TwoPeakReport two_peak_report(const MapStack& maps, const std::string& layer, std::optional<int> row = std::nullopt);

void write_two_peak_csv(std::ostream& os, const TwoPeakReport& report);

}  // namespace abscope

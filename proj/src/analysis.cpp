#include "abscope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

namespace abscope {
namespace {

const double kFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::log(2.0));
constexpr int kMaxIterations = 200;
constexpr double kStepTolerance = 1e-8;

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

template <int N>
struct SolverResult {
    Vec<N> params;
    Mat<N> jtj;
    double rss = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Levenberg-style damped Gauss-Newton: the damping is multiplied by 10 after a
// rejected step and divided by 10 after an accepted one. `admissible` rejects
// parameter vectors outside the model's domain.
template <int N, class Model, class Jacobian, class Admissible>
SolverResult<N> damped_gauss_newton(std::span<const ProfileSample> samples, Vec<N> params, Model model,
                                    Jacobian jacobian, Admissible admissible) {
    auto residual_ss = [&](const Vec<N>& p) {
        double rss = 0.0;
        for (const auto& s : samples) {
            const double r = s.value - model(p, s.position);
            rss += r * r;
        }
        return rss;
    };

    SolverResult<N> result;
    double lambda = 1e-3;
    double rss = residual_ss(params);
    for (int it = 1; it <= kMaxIterations; ++it) {
        result.iterations = it;
        Mat<N> jtj = Mat<N>::Zero();
        Vec<N> jtr = Vec<N>::Zero();
        for (const auto& s : samples) {
            const Vec<N> j = jacobian(params, s.position);
            jtj.noalias() += j * j.transpose();
            jtr.noalias() += j * (s.value - model(params, s.position));
        }
        Mat<N> damped = jtj;
        const double scale = std::max(jtj.diagonal().maxCoeff(), 1e-300);
        for (int d = 0; d < N; ++d) {
            damped(d, d) += lambda * std::max(jtj(d, d), 1e-12 * scale);
        }
        const Vec<N> step = damped.ldlt().solve(jtr);
        if (!step.allFinite()) {
            lambda *= 10.0;
            continue;
        }
        // Heavy damping shrinks steps artificially, so a small step only signals
        // convergence when it was accepted or taken with light damping.
        const bool small_step = step.norm() < kStepTolerance * (params.norm() + kStepTolerance);
        const Vec<N> trial = params + step;
        const double trial_rss = admissible(trial) ? residual_ss(trial) : INFINITY;
        if (trial_rss <= rss) {
            params = trial;
            rss = trial_rss;
            lambda = std::max(lambda / 10.0, 1e-12);
            if (small_step) {
                result.converged = true;
                break;
            }
        } else {
            if (small_step && lambda <= 1.0) {
                result.converged = true;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
    }
    result.params = params;
    result.rss = rss;
    result.jtj.setZero();
    for (const auto& s : samples) {
        const Vec<N> j = jacobian(params, s.position);
        result.jtj.noalias() += j * j.transpose();
    }
    return result;
}

template <int N>
Mat<N> covariance(const SolverResult<N>& r, std::size_t sample_count) {
    if (sample_count <= static_cast<std::size_t>(N)) return Mat<N>::Zero();
    const double variance = r.rss / static_cast<double>(sample_count - N);
    // Parameters differ in scale by many decades; invert the unit-diagonal form.
    Vec<N> scale;
    for (int i = 0; i < N; ++i) scale[i] = r.jtj(i, i) > 0.0 ? 1.0 / std::sqrt(r.jtj(i, i)) : 0.0;
    const Mat<N> normalized = scale.asDiagonal() * r.jtj * scale.asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<Mat<N>> decomposition(normalized);
    return variance * (scale.asDiagonal() * decomposition.pseudoInverse() * scale.asDiagonal());
}

void check_profile(std::span<const ProfileSample> profile, std::size_t minimum) {
    if (profile.size() < minimum) {
        throw std::invalid_argument("profile fit needs at least " + std::to_string(minimum) + " samples");
    }
    for (std::size_t i = 1; i < profile.size(); ++i) {
        if (!(profile[i].position > profile[i - 1].position)) {
            throw std::invalid_argument("profile positions must be strictly increasing");
        }
    }
}

double min_spacing(std::span<const ProfileSample> profile) {
    double spacing = INFINITY;
    for (std::size_t i = 1; i < profile.size(); ++i) {
        spacing = std::min(spacing, profile[i].position - profile[i - 1].position);
    }
    return spacing;
}

GaussianParams from_vec(const Vec<4>& v) { return {v[0], v[1], v[2], v[3]}; }
Vec<4> to_vec(const GaussianParams& p) { return {p.amplitude, p.center, p.fwhm, p.offset}; }

TwoPeakParams from_vec(const Vec<6>& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }
Vec<6> to_vec(const TwoPeakParams& p) {
    Vec<6> v;
    v << p.amplitude1, p.amplitude2, p.center1, p.center2, p.fwhm, p.offset;
    return v;
}

std::string format_number(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

}  // namespace

double gaussian_model(const GaussianParams& p, double x) {
    const double sigma = p.fwhm / kFwhmPerSigma;
    const double u = (x - p.center) / sigma;
    return p.amplitude * std::exp(-0.5 * u * u) + p.offset;
}

std::array<double, 4> gaussian_jacobian(const GaussianParams& p, double x) {
    const double sigma = p.fwhm / kFwhmPerSigma;
    const double dx = x - p.center;
    const double e = std::exp(-0.5 * dx * dx / (sigma * sigma));
    const double d_center = p.amplitude * e * dx / (sigma * sigma);
    const double d_sigma = p.amplitude * e * dx * dx / (sigma * sigma * sigma);
    return {e, d_center, d_sigma / kFwhmPerSigma, 1.0};
}

double two_gaussian_model(const TwoPeakParams& p, double x) {
    return gaussian_model({p.amplitude1, p.center1, p.fwhm, 0.0}, x) +
           gaussian_model({p.amplitude2, p.center2, p.fwhm, 0.0}, x) + p.offset;
}

std::array<double, 6> two_gaussian_jacobian(const TwoPeakParams& p, double x) {
    const auto j1 = gaussian_jacobian({p.amplitude1, p.center1, p.fwhm, 0.0}, x);
    const auto j2 = gaussian_jacobian({p.amplitude2, p.center2, p.fwhm, 0.0}, x);
    return {j1[0], j2[0], j1[1], j2[1], j1[2] + j2[2], 1.0};
}

GaussianFit fit_gaussian_1d(std::span<const ProfileSample> profile, std::optional<GaussianParams> init) {
    check_profile(profile, 5);
    GaussianFit fit;
    const auto [lo, hi] = std::minmax_element(profile.begin(), profile.end(),
                                              [](const auto& a, const auto& b) { return a.value < b.value; });
    if (!(hi->value > lo->value)) {
        return fit;  // flat profile: nothing to fit
    }
    GaussianParams start;
    if (init) {
        start = *init;
    } else {
        double w_sum = 0.0, mean = 0.0;
        for (const auto& s : profile) {
            const double w = s.value - lo->value;
            w_sum += w;
            mean += w * s.position;
        }
        mean /= w_sum;
        double var = 0.0;
        for (const auto& s : profile) var += (s.value - lo->value) * (s.position - mean) * (s.position - mean);
        var /= w_sum;
        start = {hi->value - lo->value, mean, kFwhmPerSigma * std::sqrt(var), lo->value};
        if (!(start.fwhm > 0.0)) start.fwhm = min_spacing(profile);
    }

    const auto result = damped_gauss_newton<4>(
        profile, to_vec(start),
        [](const Vec<4>& p, double x) { return gaussian_model(from_vec(p), x); },
        [](const Vec<4>& p, double x) {
            const auto j = gaussian_jacobian(from_vec(p), x);
            return Vec<4>(j[0], j[1], j[2], j[3]);
        },
        [](const Vec<4>& p) { return p[2] > 0.0; });

    fit.params = from_vec(result.params);
    fit.iterations = result.iterations;
    fit.converged = result.converged && fit.params.fwhm > 0.0;
    fit.residual_rms = std::sqrt(result.rss / static_cast<double>(profile.size()));
    const auto cov = covariance(result, profile.size());
    fit.std_err = {std::sqrt(std::max(cov(0, 0), 0.0)), std::sqrt(std::max(cov(1, 1), 0.0)),
                   std::sqrt(std::max(cov(2, 2), 0.0)), std::sqrt(std::max(cov(3, 3), 0.0))};
    return fit;
}

TwoPeakFit fit_two_gaussians_1d(std::span<const ProfileSample> profile, std::optional<TwoPeakParams> init) {
    check_profile(profile, 9);
    TwoPeakFit fit;
    TwoPeakParams start;
    if (init) {
        start = *init;
    } else {
        const GaussianFit single = fit_gaussian_1d(profile);
        if (!(single.params.fwhm > 0.0) || single.params.amplitude == 0.0) {
            return fit;
        }
        // Two equal peaks at c -/+ W/4 of width w have a combined width close
        // to W when w^2 = W^2 - 8 ln2 (W/4)^2.
        const double w = single.params.fwhm;
        start = {0.6 * single.params.amplitude, 0.6 * single.params.amplitude,
                 single.params.center - w / 4.0,  single.params.center + w / 4.0,
                 w * std::sqrt(1.0 - std::log(2.0) / 2.0), single.params.offset};
    }

    const auto result = damped_gauss_newton<6>(
        profile, to_vec(start),
        [](const Vec<6>& p, double x) { return two_gaussian_model(from_vec(p), x); },
        [](const Vec<6>& p, double x) {
            const auto j = two_gaussian_jacobian(from_vec(p), x);
            Vec<6> v;
            v << j[0], j[1], j[2], j[3], j[4], j[5];
            return v;
        },
        [](const Vec<6>& p) { return p[4] > 0.0; });

    fit.params = from_vec(result.params);
    if (fit.params.center1 > fit.params.center2) {
        std::swap(fit.params.center1, fit.params.center2);
        std::swap(fit.params.amplitude1, fit.params.amplitude2);
    }
    fit.iterations = result.iterations;
    fit.converged = result.converged;
    fit.residual_rms = std::sqrt(result.rss / static_cast<double>(profile.size()));
    fit.separation = fit.params.center2 - fit.params.center1;
    const auto cov = covariance(result, profile.size());
    fit.separation_se = std::sqrt(std::max(cov(2, 2) + cov(3, 3) - 2.0 * cov(2, 3), 0.0));
    fit.degenerate = fit.separation < min_spacing(profile);
    return fit;
}

double abbe_limit(double wavelength_nm, double numerical_aperture) {
    if (!(wavelength_nm > 0.0) || !(numerical_aperture > 0.0)) {
        throw std::invalid_argument("abbe_limit: wavelength and numerical aperture must be positive");
    }
    return wavelength_nm / (2.0 * numerical_aperture);
}

int nearest_row(const ScanGrid& grid, double y) {
    const double row = std::round((y - grid.origin.y) / grid.pitch);
    return static_cast<int>(std::clamp(row, 0.0, static_cast<double>(grid.height - 1)));
}

std::vector<ProfileSample> row_profile(const MapStack& maps, const std::string& layer_name, int row) {
    const Layer& layer = maps.at(layer_name);
    const ScanGrid& grid = maps.grid();
    if (row < 0 || row >= grid.height) {
        throw std::out_of_range("row " + std::to_string(row) + " outside grid");
    }
    std::vector<ProfileSample> out;
    for (int col = 0; col < grid.width; ++col) {
        const auto i = static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.width) + static_cast<std::size_t>(col);
        if (layer.is_defined(i)) out.push_back({grid.point(row, col).x, layer.values[i]});
    }
    return out;
}

std::string order_layer_name(int k) { return k == 1 ? "intensity" : "sr" + std::to_string(k); }

std::vector<NarrowingRow> narrowing_report(const MapStack& maps, Point emitter, std::span<const int> orders) {
    const int row = nearest_row(maps.grid(), emitter.y);
    auto fit_order = [&](int k) {
        NarrowingRow out;
        out.order = k;
        out.layer = order_layer_name(k);
        const auto profile = row_profile(maps, out.layer, row);
        const auto fit = fit_gaussian_1d(profile);
        out.fitted_fwhm = fit.params.fwhm;
        out.scaled_fwhm = fit.params.fwhm * std::sqrt(static_cast<double>(k));
        out.converged = fit.converged;
        return out;
    };
    const NarrowingRow reference = fit_order(1);
    std::vector<NarrowingRow> rows;
    for (int k : orders) {
        if (k < 1) throw std::invalid_argument("narrowing_report: orders must be >= 1");
        NarrowingRow r = k == 1 ? reference : fit_order(k);
        r.deviation = k == 1 ? 0.0 : r.scaled_fwhm / reference.fitted_fwhm - 1.0;
        r.converged = r.converged && reference.converged;
        rows.push_back(r);
    }
    return rows;
}

void write_narrowing_csv(std::ostream& os, std::span<const NarrowingRow> rows) {
    os << "k,layer,fitted_fwhm_nm,fwhm_times_sqrt_k_nm,deviation,converged\n";
    for (const auto& r : rows) {
        os << r.order << ',' << r.layer << ',' << format_number(r.fitted_fwhm) << ','
           << format_number(r.scaled_fwhm) << ',' << format_number(r.deviation) << ','
           << (r.converged ? "true" : "false") << '\n';
    }
}

TwoPeakReport two_peak_report(const MapStack& maps, const std::string& layer_name, std::optional<int> row) {
    const Layer& layer = maps.at(layer_name);
    TwoPeakReport report;
    report.layer = layer_name;
    if (row) {
        report.row = *row;
    } else {
        std::size_t best = 0;
        bool found = false;
        for (std::size_t i = 0; i < layer.values.size(); ++i) {
            if (layer.is_defined(i) && (!found || layer.values[i] > layer.values[best])) {
                best = i;
                found = true;
            }
        }
        report.row = static_cast<int>(best / static_cast<std::size_t>(maps.grid().width));
    }
    report.fit = fit_two_gaussians_1d(row_profile(maps, layer_name, report.row));
    return report;
}

void write_two_peak_csv(std::ostream& os, const TwoPeakReport& report) {
    const auto& f = report.fit;
    os << "layer,row,center1_nm,center2_nm,separation_nm,separation_se_nm,fwhm_nm,converged,degenerate\n";
    os << report.layer << ',' << report.row << ',' << format_number(f.params.center1) << ','
       << format_number(f.params.center2) << ',' << format_number(f.separation) << ','
       << format_number(f.separation_se) << ',' << format_number(f.params.fwhm) << ','
       << (f.converged ? "true" : "false") << ',' << (f.degenerate ? "true" : "false") << '\n';
}

}  // namespace abscope

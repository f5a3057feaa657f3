#pragma once

#include <cstdint>
#include <vector>

#include "abscope/map_stack.hpp"
#include "abscope/montecarlo.hpp"

namespace abscope {

/// Tree estimates above this mean photon number per pulse carry a high-flux warning.
inline constexpr double kTreeLowFluxLimit = 0.1;

/// Estimated <N> and g^(1..K) at one scan position. Vectors are indexed by
/// order - 1; g^(1) is 1 with zero error by construction.
struct PixelStatistics {
    int max_order = 0;
    std::uint64_t pulses = 0;
    double mean_n = 0.0;
    double mean_n_se = 0.0;
    std::vector<double> g;
    std::vector<double> g_se;
    std::vector<std::uint8_t> g_defined;
    std::vector<std::uint8_t> se_defined;
    /// Photon-number-resolving data only: F-hat_1..F-hat_K and their errors.
    std::vector<double> factorial_moments;
    std::vector<double> factorial_moments_se;
    /// Set by the tree estimator when mean_n exceeds kTreeLowFluxLimit.
    bool high_flux = false;

    bool defined(int k) const { return g_defined.at(static_cast<std::size_t>(k - 1)) != 0; }
    double g_at(int k) const { return g.at(static_cast<std::size_t>(k - 1)); }
    double se_at(int k) const { return g_se.at(static_cast<std::size_t>(k - 1)); }
};

/// Plug-in estimator from photon-number histograms:
/// F-hat_k = mean of N(N-1)...(N-k+1), g-hat^(k) = F-hat_k / F-hat_1^k.
/// Standard errors come from a delete-one-block jackknife when the tally has
/// more than one block and from the exact delete-one-pulse jackknife otherwise.
PixelStatistics estimate_from_counts(const PixelTally& tally, int max_order);
PixelStatistics estimate_from_counts(const Tally& tally, int max_order);

/// Low-flux estimator from click-mask histograms of a detector tree:
/// g-hat^(k) = C_k / e_k(s_1..s_d), where C_k is the per-pulse rate of joint
/// clicks summed over k-subsets of detectors and s_i are singles rates.
/// Relative bias is O(<N>). Rejects max_order > d.
PixelStatistics estimate_from_tree(const PixelTally& tally, const DetectorModel& detector, int max_order);

/// Per-pixel estimates as layers `intensity, g2..gK, se_intensity, se_g2..se_gK`.
/// Throws PreconditionError when the detector cannot sample order K.
MapStack estimate_scan(const RawScan& raw, int max_order, int threads = 1);

}  // namespace abscope

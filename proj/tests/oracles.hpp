#pragma once

// Brute-force reference computations used only by the tests. Nothing here
// calls into the library's photon algebra.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

inline double falling(double n, int k) {
    double out = 1.0;
    for (int i = 0; i < k; ++i) out *= n - i;
    return out;
}

/// Photon-number distribution of independent single-photon emitters by
/// enumerating all 2^n emission outcomes.
inline std::vector<double> emitter_count_distribution(const std::vector<double>& probs) {
    std::vector<double> dist(probs.size() + 1, 0.0);
    const std::uint64_t outcomes = std::uint64_t{1} << probs.size();
    for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
        double p = 1.0;
        int photons = 0;
        for (std::size_t a = 0; a < probs.size(); ++a) {
            if ((mask >> a) & 1U) {
                p *= probs[a];
                ++photons;
            } else {
                p *= 1.0 - probs[a];
            }
        }
        dist[static_cast<std::size_t>(photons)] += p;
    }
    return dist;
}

/// Adds an independent Poisson background by direct convolution, truncated
/// where the Poisson tail is below double precision.
inline std::vector<double> with_poisson(const std::vector<double>& dist, double mean, int max_extra = 80) {
    if (mean == 0.0) return dist;
    std::vector<double> poisson(static_cast<std::size_t>(max_extra) + 1);
    for (int j = 0; j <= max_extra; ++j) {
        poisson[static_cast<std::size_t>(j)] = std::exp(-mean + j * std::log(mean) - std::lgamma(j + 1.0));
    }
    std::vector<double> out(dist.size() + poisson.size(), 0.0);
    for (std::size_t i = 0; i < dist.size(); ++i) {
        for (std::size_t j = 0; j < poisson.size(); ++j) out[i + j] += dist[i] * poisson[j];
    }
    return out;
}

/// F_1..F_K of a photon-number distribution.
inline std::vector<double> factorial_moments(const std::vector<double>& dist, int max_order) {
    std::vector<double> f(static_cast<std::size_t>(max_order), 0.0);
    for (int k = 1; k <= max_order; ++k) {
        for (std::size_t n = 0; n < dist.size(); ++n) {
            f[static_cast<std::size_t>(k - 1)] += dist[n] * falling(static_cast<double>(n), k);
        }
    }
    return f;
}

/// e_j as a sum over all j-subsets.
inline std::vector<double> elementary_symmetric(const std::vector<double>& probs, int k) {
    std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
    const std::uint64_t outcomes = std::uint64_t{1} << probs.size();
    for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
        int size = 0;
        double product = 1.0;
        for (std::size_t a = 0; a < probs.size(); ++a) {
            if ((mask >> a) & 1U) {
                ++size;
                product *= probs[a];
            }
        }
        if (size <= k) e[static_cast<std::size_t>(size)] += product;
    }
    return e;
}

inline double power_sum(const std::vector<double>& probs, int k) {
    double s = 0.0;
    for (double p : probs) s += std::pow(p, k);
    return s;
}

/// Click-mask distribution when m photons are routed independently to d
/// detectors, by enumerating all d^m assignments.
inline std::map<std::uint64_t, double> click_mask_distribution(int photons, const std::vector<double>& splitting) {
    std::map<std::uint64_t, double> dist;
    const int d = static_cast<int>(splitting.size());
    std::uint64_t assignments = 1;
    for (int i = 0; i < photons; ++i) assignments *= static_cast<std::uint64_t>(d);
    for (std::uint64_t code = 0; code < assignments; ++code) {
        std::uint64_t rest = code;
        std::uint64_t mask = 0;
        double p = 1.0;
        for (int i = 0; i < photons; ++i) {
            const auto det = static_cast<std::size_t>(rest % static_cast<std::uint64_t>(d));
            rest /= static_cast<std::uint64_t>(d);
            mask |= std::uint64_t{1} << det;
            p *= splitting[det];
        }
        dist[mask] += p;
    }
    return dist;
}

}  // namespace oracle

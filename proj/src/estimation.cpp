#include "abscope/estimation.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "abscope/errors.hpp"
#include "abscope/parallel.hpp"
#include "abscope/photon_algebra.hpp"

namespace abscope {
namespace {

// An estimator that is a smooth function of per-pulse additive statistics.
// Output slots: [mean_n, g^(2), ..., g^(K), then model-specific extras].
struct RatioEstimator {
    std::size_t feature_count = 0;
    std::size_t output_count = 0;
    std::function<void(std::uint64_t key, std::vector<double>& features)> features;
    std::function<void(const std::vector<double>& sums, double pulses, std::vector<double>& out,
                       std::vector<std::uint8_t>& defined)>
        evaluate;
};

struct Evaluation {
    std::vector<double> value;
    std::vector<std::uint8_t> defined;
};

std::vector<double> tally_sums(const RatioEstimator& est, const Tally& tally) {
    std::vector<double> sums(est.feature_count, 0.0);
    std::vector<double> f(est.feature_count);
    for (const auto& [key, count] : tally) {
        est.features(key, f);
        for (std::size_t j = 0; j < f.size(); ++j) sums[j] += static_cast<double>(count) * f[j];
    }
    return sums;
}

Evaluation evaluate(const RatioEstimator& est, const std::vector<double>& sums, double pulses) {
    Evaluation e{std::vector<double>(est.output_count, 0.0), std::vector<std::uint8_t>(est.output_count, 0)};
    if (pulses > 0.0) est.evaluate(sums, pulses, e.value, e.defined);
    return e;
}

struct Replicate {
    Evaluation eval;
    double weight;
};

// Jackknife standard errors from leave-one-group-out replicates; each replicate
// stands for `weight` deletable groups out of `groups` in total.
Evaluation jackknife(const RatioEstimator& est, const std::vector<Replicate>& replicates, double groups) {
    Evaluation se{std::vector<double>(est.output_count, 0.0), std::vector<std::uint8_t>(est.output_count, 1)};
    if (groups < 2.0) {
        std::fill(se.defined.begin(), se.defined.end(), 0);
        return se;
    }
    for (std::size_t j = 0; j < est.output_count; ++j) {
        double mean = 0.0;
        for (const auto& r : replicates) {
            if (!r.eval.defined[j]) {
                se.defined[j] = 0;
                break;
            }
            mean += r.weight * r.eval.value[j];
        }
        if (!se.defined[j]) continue;
        mean /= groups;
        double ss = 0.0;
        for (const auto& r : replicates) {
            const double d = r.eval.value[j] - mean;
            ss += r.weight * d * d;
        }
        se.value[j] = std::sqrt((groups - 1.0) / groups * ss);
    }
    return se;
}

struct EstimateResult {
    Evaluation full;
    Evaluation se;
    std::uint64_t pulses = 0;
};

EstimateResult run_estimator(const RatioEstimator& est, const PixelTally& tally) {
    EstimateResult result;
    const Tally total = tally.total();
    result.pulses = tally_pulses(total);
    if (result.pulses == 0) {
        throw std::invalid_argument("estimator needs at least one pulse");
    }
    const auto sums = tally_sums(est, total);
    const auto pulses = static_cast<double>(result.pulses);
    result.full = evaluate(est, sums, pulses);

    std::vector<Replicate> replicates;
    double groups = 0.0;
    std::vector<double> reduced(sums.size());
    if (tally.blocks.size() > 1) {
        for (const auto& block : tally.blocks) {
            const auto block_sums = tally_sums(est, block);
            for (std::size_t j = 0; j < sums.size(); ++j) reduced[j] = sums[j] - block_sums[j];
            replicates.push_back({evaluate(est, reduced, pulses - static_cast<double>(tally_pulses(block))), 1.0});
        }
        groups = static_cast<double>(tally.blocks.size());
    } else {
        // Delete-one-pulse jackknife: every pulse with the same outcome yields
        // the same replicate, so one replicate per outcome class suffices.
        std::vector<double> f(est.feature_count);
        for (const auto& [key, count] : total) {
            est.features(key, f);
            for (std::size_t j = 0; j < sums.size(); ++j) reduced[j] = sums[j] - f[j];
            replicates.push_back({evaluate(est, reduced, pulses - 1.0), static_cast<double>(count)});
        }
        groups = pulses;
    }
    result.se = jackknife(est, replicates, groups);
    return result;
}

double falling_factorial(double n, int k) {
    double out = 1.0;
    for (int i = 0; i < k; ++i) out *= n - i;
    return out;
}

void check_order(int max_order) {
    if (max_order < 2 || max_order > kMaxOrder) {
        throw std::invalid_argument("estimation order must be in [2, " + std::to_string(kMaxOrder) + "]");
    }
}

PixelStatistics package(const EstimateResult& r, int max_order) {
    PixelStatistics s;
    s.max_order = max_order;
    s.pulses = r.pulses;
    s.mean_n = r.full.value[0];
    s.mean_n_se = r.se.defined[0] ? r.se.value[0] : 0.0;
    const auto k_count = static_cast<std::size_t>(max_order);
    s.g.assign(k_count, 0.0);
    s.g_se.assign(k_count, 0.0);
    s.g_defined.assign(k_count, 0);
    s.se_defined.assign(k_count, 0);
    const bool any_light = r.full.value[0] > 0.0;
    s.g[0] = 1.0;
    s.g_defined[0] = any_light ? 1 : 0;
    s.se_defined[0] = s.g_defined[0];
    for (std::size_t k = 2; k <= k_count; ++k) {
        const std::size_t slot = k - 1;
        s.g_defined[slot] = r.full.defined[slot];
        if (!r.full.defined[slot]) continue;
        s.g[slot] = r.full.value[slot];
        s.se_defined[slot] = r.se.defined[slot];
        s.g_se[slot] = r.se.defined[slot] ? r.se.value[slot] : 0.0;
    }
    return s;
}

}  // namespace

PixelStatistics estimate_from_counts(const PixelTally& tally, int max_order) {
    check_order(max_order);
    const auto k_count = static_cast<std::size_t>(max_order);
    RatioEstimator est;
    est.feature_count = k_count;
    est.output_count = 2 * k_count;
    est.features = [max_order](std::uint64_t photons, std::vector<double>& f) {
        for (int k = 1; k <= max_order; ++k) {
            f[static_cast<std::size_t>(k - 1)] = falling_factorial(static_cast<double>(photons), k);
        }
    };
    est.evaluate = [k_count](const std::vector<double>& sums, double pulses, std::vector<double>& out,
                             std::vector<std::uint8_t>& defined) {
        const double mean = sums[0] / pulses;
        out[0] = mean;
        defined[0] = 1;
        for (std::size_t k = 1; k <= k_count; ++k) {
            const double moment = sums[k - 1] / pulses;
            out[k_count + k - 1] = moment;
            defined[k_count + k - 1] = 1;
            if (k >= 2 && mean > 0.0) {
                out[k - 1] = moment / std::pow(mean, static_cast<double>(k));
                defined[k - 1] = 1;
            }
        }
    };
    const auto result = run_estimator(est, tally);
    PixelStatistics s = package(result, max_order);
    s.factorial_moments.assign(result.full.value.begin() + static_cast<std::ptrdiff_t>(k_count), result.full.value.end());
    s.factorial_moments_se.assign(result.se.value.begin() + static_cast<std::ptrdiff_t>(k_count), result.se.value.end());
    return s;
}

PixelStatistics estimate_from_counts(const Tally& tally, int max_order) {
    return estimate_from_counts(PixelTally{{tally}}, max_order);
}

PixelStatistics estimate_from_tree(const PixelTally& tally, const DetectorModel& detector, int max_order) {
    check_order(max_order);
    if (detector.kind() != DetectorKind::Tree) {
        throw std::invalid_argument("estimate_from_tree needs a tree detector model");
    }
    const int d = detector.detectors();
    if (max_order > d) {
        throw PreconditionError("insufficient detector order: g^(" + std::to_string(max_order) +
                                ") needs at least " + std::to_string(max_order) + " detectors, tree has " +
                                std::to_string(d));
    }
    const auto k_count = static_cast<std::size_t>(max_order);
    const auto dd = static_cast<std::size_t>(d);
    RatioEstimator est;
    // Features: d singles indicators, then binomial(popcount, k) for k = 2..K.
    est.feature_count = dd + k_count - 1;
    est.output_count = k_count;
    est.features = [dd, max_order](std::uint64_t mask, std::vector<double>& f) {
        for (std::size_t i = 0; i < dd; ++i) f[i] = static_cast<double>((mask >> i) & 1U);
        const int clicks = std::popcount(mask);
        double binom = static_cast<double>(clicks);  // C(clicks, 1)
        for (int k = 2; k <= max_order; ++k) {
            binom = binom * (clicks - k + 1) / k;
            f[dd + static_cast<std::size_t>(k - 2)] = binom;
        }
    };
    est.evaluate = [dd, max_order](const std::vector<double>& sums, double pulses, std::vector<double>& out,
                                   std::vector<std::uint8_t>& defined) {
        std::vector<double> singles(dd);
        double mean = 0.0;
        for (std::size_t i = 0; i < dd; ++i) {
            singles[i] = sums[i] / pulses;
            mean += singles[i];
        }
        out[0] = mean;
        defined[0] = 1;
        const auto e = elementary_symmetric(singles, max_order);
        for (int k = 2; k <= max_order; ++k) {
            const auto slot = static_cast<std::size_t>(k);
            if (e[slot] > 0.0) {
                out[slot - 1] = (sums[dd + slot - 2] / pulses) / e[slot];
                defined[slot - 1] = 1;
            }
        }
    };
    PixelStatistics s = package(run_estimator(est, tally), max_order);
    s.high_flux = s.mean_n > kTreeLowFluxLimit;
    return s;
}

MapStack estimate_scan(const RawScan& raw, int max_order, int threads) {
    check_order(max_order);
    if (max_order > raw.detector.max_sampled_order()) {
        throw PreconditionError("insufficient detector order: detector " + raw.detector.to_string() +
                                " cannot sample g^(" + std::to_string(max_order) + ")");
    }
    if (raw.pixels.size() != raw.grid.pixel_count()) {
        throw std::invalid_argument("estimate_scan: tally count does not match grid");
    }
    MapStack stack(raw.grid);
    stack.add_layer("intensity");
    for (int k = 2; k <= max_order; ++k) stack.add_layer("g" + std::to_string(k));
    stack.add_layer("se_intensity");
    for (int k = 2; k <= max_order; ++k) stack.add_layer("se_g" + std::to_string(k));

    Layer& intensity = *stack.find("intensity");
    Layer& se_intensity = *stack.find("se_intensity");
    std::vector<Layer*> g_layers, se_layers;
    for (int k = 2; k <= max_order; ++k) {
        g_layers.push_back(stack.find("g" + std::to_string(k)));
        se_layers.push_back(stack.find("se_g" + std::to_string(k)));
    }
    const bool is_tree = raw.detector.kind() == DetectorKind::Tree;
    parallel_for(raw.pixels.size(), threads, [&](std::size_t i) {
        const PixelStatistics s = is_tree ? estimate_from_tree(raw.pixels[i], raw.detector, max_order)
                                          : estimate_from_counts(raw.pixels[i], max_order);
        intensity.set(i, s.mean_n);
        se_intensity.set(i, s.mean_n_se);
        for (int k = 2; k <= max_order; ++k) {
            const auto slot = static_cast<std::size_t>(k - 2);
            if (s.defined(k)) g_layers[slot]->set(i, s.g_at(k));
            if (s.defined(k) && s.se_defined[static_cast<std::size_t>(k - 1)]) se_layers[slot]->set(i, s.se_at(k));
        }
    });
    return stack;
}

}  // namespace abscope

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "abscope/partition.hpp"
#include "abscope/rational.hpp"

namespace abscope {

/// Highest correlation order supported by the symbolic expansion.
inline constexpr int kMaxOrder = 8;

/// Factorial moments F_1..F_K of a photon-number distribution,
/// F_k = <N(N-1)...(N-k+1)>.
class FactorialMoments {
public:
    FactorialMoments() = default;
    /// values[0] is F_1. Rejects negative or non-finite entries.
    explicit FactorialMoments(std::vector<double> values);

    int max_order() const { return static_cast<int>(values_.size()); }
    /// F_k for 1 <= k <= max_order().
    double operator()(int k) const;
    std::span<const double> values() const { return values_; }

private:
    std::vector<double> values_;
};

/// Normalized correlations g^(1)..g^(K) at zero delay. g^(1) is exactly 1.
class GVector {
public:
    GVector() : values_{1.0} {}
    /// values[0] is g^(1) and must equal 1; remaining entries must be >= 0.
    explicit GVector(std::vector<double> values);

    int max_order() const { return static_cast<int>(values_.size()); }
    /// g^(k) for 1 <= k <= max_order().
    double operator()(int k) const;
    std::span<const double> values() const { return values_; }

private:
    std::vector<double> values_;
};

/// e_0..e_k of the given probabilities, built one probability at a time.
std::vector<double> elementary_symmetric(std::span<const double> probs, int k);

/// Factorial moments of independent single-photon emitters: F_k = k! e_k.
FactorialMoments factorial_moments_bernoulli(std::span<const double> probs, int max_order);

/// Factorial moments of emitters plus an independent Poisson background with
/// mean `background_mean` photons per pulse.
FactorialMoments factorial_moments_with_background(std::span<const double> probs,
                                                   double background_mean, int max_order);

/// g^(k) = F_k / F_1^k. Returns nullopt for a dark pixel (F_1 == 0).
std::optional<GVector> g_from_moments(const FactorialMoments& moments);

struct ExpansionTerm {
    Partition partition;
    Rational coefficient;
};

/// Exact expansion of sum_a P_a^k / <N>^k as a polynomial in g^(2)..g^(k).
/// Each term is keyed by the partition {j_1,...,j_l} of k standing for the
/// product g^(j_1)...g^(j_l) (parts equal to 1 contribute g^(1) = 1).
class PowerSumExpansion {
public:
    PowerSumExpansion(int order, std::vector<ExpansionTerm> terms);

    int order() const { return order_; }
    /// Terms in reverse-lexicographic partition order.
    const std::vector<ExpansionTerm>& terms() const { return terms_; }
    /// Coefficient of the given partition, zero if it is not a partition of order().
    Rational coefficient(const Partition& partition) const;

    /// sum_i y_i beta_i for the given g values.
    double evaluate_normalized(const GVector& g) const;

private:
    int order_;
    std::vector<ExpansionTerm> terms_;
};

/// Builds the expansion for order k via Newton's identities with
/// e_j = g^(j) <N>^j / j!. Rejects k < 1 or k > max_order.
PowerSumExpansion power_sum_expansion(int k, int max_order = kMaxOrder);

/// <N>^k sum_i y_i beta_i. Requires g up to order expansion.order().
double evaluate_power_sum(const PowerSumExpansion& expansion, double mean_n, const GVector& g);

/// Partial derivatives of evaluate_power_sum; d_g[j] is with respect to g^(j)
/// (entries 0 and 1 are always zero).
struct PowerSumGradient {
    double d_mean_n = 0.0;
    std::vector<double> d_g;
};

PowerSumGradient power_sum_gradient(const PowerSumExpansion& expansion, double mean_n,
                                    const GVector& g);

/// Two-emitter reconstruction: g^(2) = g2 and g^(j) = 0 for j >= 3.
double two_emitter_power_sum(double mean_n, double g2, int k);

/// GVector truncated to g^(1), g^(2) = g2 and zeros up to order k.
GVector two_emitter_g(double g2, int k);

/// CSV with header `k,partition,numerator,denominator`.
void write_coefficient_csv(std::ostream& os, std::span<const PowerSumExpansion> expansions);

}  // namespace abscope

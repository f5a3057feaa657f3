#include "abscope/photon_algebra.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

namespace abscope {
namespace {

void check_probabilities(std::span<const double> probs) {
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("detection probability outside [0,1]: " + std::to_string(p));
        }
    }
}

std::int64_t factorial(int n) {
    std::int64_t out = 1;
    for (int i = 2; i <= n; ++i) out *= i;
    return out;
}

using Polynomial = std::map<Partition, Rational>;

// Multiplies every monomial by g^(order) and scales by `factor`.
void accumulate_product(Polynomial& target, const Polynomial& source, int order,
                        const Rational& factor) {
    for (const auto& [monomial, coefficient] : source) {
        std::vector<int> parts = monomial.parts();
        parts.push_back(order);
        target[Partition(std::move(parts))] += coefficient * factor;
    }
}

// Extended precision: the signed terms cancel heavily when many emitters
// contribute comparable probabilities.
using Wide = long double;

Wide coefficient_value(const Rational& r) {
    return static_cast<Wide>(r.numerator()) / static_cast<Wide>(r.denominator());
}

Wide product_of_g(const Partition& partition, const GVector& g, int skip_part = 0) {
    Wide product = 1.0L;
    bool skipped = false;
    for (int part : partition.parts()) {
        if (!skipped && part == skip_part) {
            skipped = true;
            continue;
        }
        if (part > 1) product *= static_cast<Wide>(g(part));
    }
    return product;
}

void check_g_order(int order, const GVector& g) {
    if (g.max_order() < order) {
        throw std::invalid_argument("power sum of order " + std::to_string(order) +
                                    " needs g up to that order, got " + std::to_string(g.max_order()));
    }
}

Wide normalized_sum(const std::vector<ExpansionTerm>& terms, const GVector& g) {
    Wide sum = 0.0L;
    for (const auto& term : terms) sum += coefficient_value(term.coefficient) * product_of_g(term.partition, g);
    return sum;
}

Wide wide_power(double base, int exponent) {
    Wide out = 1.0L;
    for (int i = 0; i < exponent; ++i) out *= static_cast<Wide>(base);
    return out;
}

}  // namespace

FactorialMoments::FactorialMoments(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("factorial moments must be finite and non-negative");
        }
    }
}

double FactorialMoments::operator()(int k) const {
    if (k < 1 || k > max_order()) {
        throw std::out_of_range("factorial moment order " + std::to_string(k) + " not available");
    }
    return values_[static_cast<std::size_t>(k - 1)];
}

GVector::GVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty() || values_[0] != 1.0) {
        throw std::invalid_argument("GVector: g^(1) must be exactly 1");
    }
    for (double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("GVector: correlations must be finite and non-negative");
        }
    }
}

double GVector::operator()(int k) const {
    if (k < 1 || k > max_order()) {
        throw std::out_of_range("g order " + std::to_string(k) + " not available");
    }
    return values_[static_cast<std::size_t>(k - 1)];
}

std::vector<double> elementary_symmetric(std::span<const double> probs, int k) {
    if (k < 0) {
        throw std::invalid_argument("elementary_symmetric: order must be >= 0");
    }
    check_probabilities(probs);
    std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
    e[0] = 1.0;
    for (double p : probs) {
        for (int j = k; j >= 1; --j) {
            e[static_cast<std::size_t>(j)] += p * e[static_cast<std::size_t>(j - 1)];
        }
    }
    return e;
}

FactorialMoments factorial_moments_bernoulli(std::span<const double> probs, int max_order) {
    return factorial_moments_with_background(probs, 0.0, max_order);
}

FactorialMoments factorial_moments_with_background(std::span<const double> probs,
                                                   double background_mean, int max_order) {
    if (max_order < 1) {
        throw std::invalid_argument("factorial moments: order must be >= 1");
    }
    if (!(background_mean >= 0.0) || !std::isfinite(background_mean)) {
        throw std::invalid_argument("background mean must be finite and >= 0");
    }
    // Coefficients of the factorial-moment generating function in u = z - 1:
    // prod_a (1 + P_a u) * exp(b u), truncated at degree K. e_j are the emitter
    // coefficients, b^j / j! the background ones.
    const auto e = elementary_symmetric(probs, max_order);
    std::vector<double> background(e.size(), 0.0);
    background[0] = 1.0;
    for (std::size_t j = 1; j < background.size(); ++j) {
        background[j] = background[j - 1] * background_mean / static_cast<double>(j);
    }
    std::vector<double> moments(static_cast<std::size_t>(max_order));
    double k_factorial = 1.0;
    for (int k = 1; k <= max_order; ++k) {
        k_factorial *= k;
        double coefficient = 0.0;
        for (int j = 0; j <= k; ++j) {
            coefficient += e[static_cast<std::size_t>(j)] * background[static_cast<std::size_t>(k - j)];
        }
        moments[static_cast<std::size_t>(k - 1)] = k_factorial * coefficient;
    }
    return FactorialMoments(std::move(moments));
}

std::optional<GVector> g_from_moments(const FactorialMoments& moments) {
    if (moments.max_order() < 1 || moments(1) <= 0.0) {
        return std::nullopt;
    }
    const double mean = moments(1);
    std::vector<double> g(static_cast<std::size_t>(moments.max_order()));
    g[0] = 1.0;
    double mean_power = mean;
    for (int k = 2; k <= moments.max_order(); ++k) {
        mean_power *= mean;
        g[static_cast<std::size_t>(k - 1)] = moments(k) / mean_power;
    }
    return GVector(std::move(g));
}

PowerSumExpansion::PowerSumExpansion(int order, std::vector<ExpansionTerm> terms)
    : order_(order), terms_(std::move(terms)) {}

Rational PowerSumExpansion::coefficient(const Partition& partition) const {
    for (const auto& term : terms_) {
        if (term.partition == partition) return term.coefficient;
    }
    return Rational(0);
}

double PowerSumExpansion::evaluate_normalized(const GVector& g) const {
    check_g_order(order_, g);
    return static_cast<double>(normalized_sum(terms_, g));
}

PowerSumExpansion power_sum_expansion(int k, int max_order) {
    if (k < 1 || k > max_order) {
        throw std::invalid_argument("power_sum_expansion: order " + std::to_string(k) +
                                    " outside [1, " + std::to_string(max_order) + "]");
    }
    // q_m = p_m / <N>^m. Newton's identity
    //   p_m = sum_{i=1}^{m-1} (-1)^{i-1} e_i p_{m-i} + (-1)^{m-1} m e_m
    // with e_i = g^(i) <N>^i / i! keeps every monomial homogeneous of weight m.
    std::vector<Polynomial> q(static_cast<std::size_t>(k) + 1);
    for (int m = 1; m <= k; ++m) {
        Polynomial& current = q[static_cast<std::size_t>(m)];
        for (int i = 1; i < m; ++i) {
            const Rational sign = (i % 2 == 1) ? Rational(1) : Rational(-1);
            accumulate_product(current, q[static_cast<std::size_t>(m - i)], i,
                               sign * Rational(1, factorial(i)));
        }
        const Rational sign = (m % 2 == 1) ? Rational(1) : Rational(-1);
        current[Partition({m})] += sign * Rational(m, factorial(m));
    }

    std::vector<ExpansionTerm> terms;
    const Polynomial& result = q[static_cast<std::size_t>(k)];
    for (const auto& partition : partitions_of(k)) {
        auto it = result.find(partition);
        terms.push_back({partition, it == result.end() ? Rational(0) : it->second});
    }
    return PowerSumExpansion(k, std::move(terms));
}

double evaluate_power_sum(const PowerSumExpansion& expansion, double mean_n, const GVector& g) {
    if (!(mean_n >= 0.0)) {
        throw std::invalid_argument("evaluate_power_sum: mean photon number must be >= 0");
    }
    check_g_order(expansion.order(), g);
    return static_cast<double>(wide_power(mean_n, expansion.order()) * normalized_sum(expansion.terms(), g));
}

PowerSumGradient power_sum_gradient(const PowerSumExpansion& expansion, double mean_n,
                                    const GVector& g) {
    const int k = expansion.order();
    check_g_order(k, g);
    PowerSumGradient grad;
    grad.d_mean_n = static_cast<double>(k * wide_power(mean_n, k - 1) * normalized_sum(expansion.terms(), g));
    std::vector<Wide> d_g(static_cast<std::size_t>(k) + 1, 0.0L);
    for (const auto& term : expansion.terms()) {
        const Wide y = coefficient_value(term.coefficient);
        for (int j = 2; j <= k; ++j) {
            const int m = term.partition.multiplicity(j);
            if (m == 0) continue;
            d_g[static_cast<std::size_t>(j)] += y * m * product_of_g(term.partition, g, j);
        }
    }
    const Wide scale = wide_power(mean_n, k);
    grad.d_g.resize(d_g.size());
    for (std::size_t j = 0; j < d_g.size(); ++j) grad.d_g[j] = static_cast<double>(scale * d_g[j]);
    return grad;
}

GVector two_emitter_g(double g2, int k) {
    std::vector<double> g(static_cast<std::size_t>(std::max(k, 2)), 0.0);
    g[0] = 1.0;
    g[1] = g2;
    return GVector(std::move(g));
}

double two_emitter_power_sum(double mean_n, double g2, int k) {
    if (k < 2) {
        throw std::invalid_argument("two_emitter_power_sum: order must be >= 2");
    }
    return evaluate_power_sum(power_sum_expansion(k), mean_n, two_emitter_g(g2, k));
}

void write_coefficient_csv(std::ostream& os, std::span<const PowerSumExpansion> expansions) {
    os << "k,partition,numerator,denominator\n";
    for (const auto& expansion : expansions) {
        for (const auto& term : expansion.terms()) {
            os << expansion.order() << ',' << term.partition.to_string() << ','
               << term.coefficient.numerator() << ',' << term.coefficient.denominator() << '\n';
        }
    }
}

}  // namespace abscope

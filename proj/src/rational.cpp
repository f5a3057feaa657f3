#include "abscope/rational.hpp"

#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace abscope {
namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t out = 0;
    if (__builtin_mul_overflow(a, b, &out)) {
        throw std::overflow_error("Rational: multiplication overflow");
    }
    return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t out = 0;
    if (__builtin_add_overflow(a, b, &out)) {
        throw std::overflow_error("Rational: addition overflow");
    }
    return out;
}

std::int64_t checked_neg(std::int64_t a) {
    if (a == std::numeric_limits<std::int64_t>::min()) {
        throw std::overflow_error("Rational: negation overflow");
    }
    return -a;
}

}  // namespace

Rational::Rational(std::int64_t value) : num_(value), den_(1) {}

Rational::Rational(std::int64_t numerator, std::int64_t denominator) {
    if (denominator == 0) {
        throw std::domain_error("Rational: zero denominator");
    }
    if (denominator < 0) {
        numerator = checked_neg(numerator);
        denominator = checked_neg(denominator);
    }
    const std::int64_t g = std::gcd(numerator, denominator);
    num_ = numerator / g;
    den_ = denominator / g;
}

std::string Rational::to_string() const {
    if (den_ == 1) {
        return std::to_string(num_);
    }
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::operator-() const { return {checked_neg(num_), den_}; }

Rational& Rational::operator+=(const Rational& rhs) {
    // Reduce through the lcm of denominators to keep intermediates small.
    const std::int64_t g = std::gcd(den_, rhs.den_);
    const std::int64_t lhs_scale = rhs.den_ / g;
    const std::int64_t rhs_scale = den_ / g;
    const std::int64_t n = checked_add(checked_mul(num_, lhs_scale), checked_mul(rhs.num_, rhs_scale));
    const std::int64_t d = checked_mul(den_, lhs_scale);
    *this = Rational(n, d);
    return *this;
}

Rational& Rational::operator-=(const Rational& rhs) { return *this += -rhs; }

Rational& Rational::operator*=(const Rational& rhs) {
    const std::int64_t g1 = std::gcd(num_, rhs.den_);
    const std::int64_t g2 = std::gcd(rhs.num_, den_);
    const std::int64_t n = checked_mul(num_ / (g1 ? g1 : 1), rhs.num_ / (g2 ? g2 : 1));
    const std::int64_t d = checked_mul(den_ / (g2 ? g2 : 1), rhs.den_ / (g1 ? g1 : 1));
    *this = Rational(n, d);
    return *this;
}

Rational& Rational::operator/=(const Rational& rhs) {
    if (rhs.num_ == 0) {
        throw std::domain_error("Rational: division by zero");
    }
    return *this *= Rational(rhs.den_, rhs.num_);
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

}  // namespace abscope

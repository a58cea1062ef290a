#pragma once

#include <boost/rational.hpp>

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mensura {

// Exact rational arithmetic, the single currency for all rhythm math.
// Durations are counted in minima on the mensural side and in half-note
// units on the CMN side; the two scales coincide (one minima = one half
// note), so values cross the pipeline unchanged.
//
// Always kept in lowest terms with a positive denominator (boost::rational
// normalizes on construction and after every operation).
class Rational {
public:
    using Int = long long;

    constexpr Rational() = default;
    Rational(Int n) : v_(n) {}
    Rational(Int n, Int d) : v_(checked(n, d)) {}

    Int num() const { return v_.numerator(); }
    Int den() const { return v_.denominator(); }

    bool is_zero() const { return v_.numerator() == 0; }
    bool is_integer() const { return v_.denominator() == 1; }
    bool negative() const { return v_.numerator() < 0; }

    Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
    Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
    Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
    Rational& operator/=(const Rational& o) {
        if (o.is_zero()) throw std::domain_error("Rational: division by zero");
        v_ /= o.v_;
        return *this;
    }

    friend Rational operator+(Rational a, const Rational& b) { return a += b; }
    friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
    friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
    friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

    friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Rational& a, const Rational& b) { return a.v_ != b.v_; }
    friend bool operator<(const Rational& a, const Rational& b) { return a.v_ < b.v_; }
    friend bool operator<=(const Rational& a, const Rational& b) { return a.v_ <= b.v_; }
    friend bool operator>(const Rational& a, const Rational& b) { return a.v_ > b.v_; }
    friend bool operator>=(const Rational& a, const Rational& b) { return a.v_ >= b.v_; }

    // "7/3", or just "7" for integers.
    std::string str() const {
        std::string s = std::to_string(num());
        if (!is_integer()) s += "/" + std::to_string(den());
        return s;
    }

    double approx() const { return boost::rational_cast<double>(v_); }

private:
    static boost::rational<Int> checked(Int n, Int d) {
        if (d == 0) throw std::domain_error("Rational: zero denominator");
        return boost::rational<Int>(n, d);
    }

    boost::rational<Int> v_{0};
};

}  // namespace mensura

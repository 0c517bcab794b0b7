#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace psim {

/// Exact rational number over int64. Effective iteration durations are
/// quotients of integer millisecond quantities (cycle / repetition count),
/// so all duration and loss arithmetic stays exact; no floating point
/// creeps into scheduling decisions or threshold comparisons.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t value);  // NOLINT(google-explicit-constructor)
    Rational(std::int64_t num, std::int64_t den);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }

    bool is_integer() const { return den_ == 1; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    /// floor(*this), as an integer.
    std::int64_t floor() const;
    /// ceil(*this), as an integer.
    std::int64_t ceil() const;

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const;

    bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const;
    bool operator<=(const Rational& o) const { return *this < o || *this == o; }
    bool operator>(const Rational& o) const { return o < *this; }
    bool operator>=(const Rational& o) const { return o <= *this; }

    std::string str() const;  // "num/den", or "num" when integral

private:
    void normalize();

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

std::ostream& operator<<(std::ostream& os, const Rational& r);

/// max(a, b) without <algorithm> ambiguity on mixed int/Rational call sites.
inline Rational rational_max(const Rational& a, const Rational& b) { return a < b ? b : a; }

/// Parses a decimal literal ("0.1", "2", "0.250") into an exact Rational.
Rational rational_from_decimal(const std::string& text);

}  // namespace psim

#include "psim/rational.hpp"

#include <numeric>
#include <ostream>
#include <stdexcept>

namespace psim {

Rational::Rational(std::int64_t value) : num_(value), den_(1) {}

Rational::Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
    if (den_ == 0) {
        throw std::invalid_argument("Rational: zero denominator");
    }
    normalize();
}

void Rational::normalize() {
    if (den_ < 0) {
        num_ = -num_;
        den_ = -den_;
    }
    if (num_ == 0) {
        den_ = 1;
        return;
    }
    const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    num_ /= g;
    den_ /= g;
}

std::int64_t Rational::floor() const {
    if (num_ >= 0) return num_ / den_;
    return -((-num_ + den_ - 1) / den_);
}

std::int64_t Rational::ceil() const {
    if (num_ >= 0) return (num_ + den_ - 1) / den_;
    return -((-num_) / den_);
}

Rational Rational::operator+(const Rational& o) const {
    return Rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}

Rational Rational::operator-(const Rational& o) const {
    return Rational(num_ * o.den_ - o.num_ * den_, den_ * o.den_);
}

Rational Rational::operator*(const Rational& o) const {
    return Rational(num_ * o.num_, den_ * o.den_);
}

Rational Rational::operator/(const Rational& o) const {
    if (o.num_ == 0) {
        throw std::invalid_argument("Rational: division by zero");
    }
    return Rational(num_ * o.den_, den_ * o.num_);
}

bool Rational::operator<(const Rational& o) const {
    // Denominators are positive after normalization; cross-multiply exactly.
    return num_ * o.den_ < o.num_ * den_;
}

std::string Rational::str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

Rational rational_from_decimal(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty decimal literal");
    std::size_t dot = text.find('.');
    if (dot == std::string::npos) {
        return Rational(std::stoll(text));
    }
    const std::string whole = text.substr(0, dot);
    const std::string frac = text.substr(dot + 1);
    if (frac.empty()) return Rational(std::stoll(whole));
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) {
        if (den > 1'000'000'000'000'000LL) throw std::invalid_argument("decimal literal too precise");
        den *= 10;
    }
    const bool neg = !whole.empty() && whole[0] == '-';
    std::int64_t w = whole.empty() || whole == "-" ? 0 : std::stoll(whole);
    std::int64_t f = std::stoll(frac);
    std::int64_t num = (neg ? -1 : 1) * ((w < 0 ? -w : w) * den + f);
    return Rational(num, den);
}

}  // namespace psim

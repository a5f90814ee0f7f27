#include "qccs/value.hpp"

#include <numeric>
#include <sstream>

namespace qccs {

Rational::Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) {
  if (den_ == 0) fail_validation("rational with zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
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
bool Rational::operator<(const Rational& o) const {
  return num_ * o.den_ < o.num_ * den_;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

std::string bits_to_string(const Bits& b) {
  std::string s;
  s.reserve(b.size());
  for (auto bit : b) s.push_back(bit ? '1' : '0');
  return s;
}

Bits bits_from_string(const std::string& s) {
  Bits b;
  b.reserve(s.size());
  for (char c : s) {
    if (c == '0')
      b.push_back(0);
    else if (c == '1')
      b.push_back(1);
    else
      fail_validation("bit string literal may contain only 0 and 1");
  }
  return b;
}

const Rational& Value::as_rational() const {
  if (!is_rational()) fail_validation("value is not a rational: " + str());
  return std::get<Rational>(v_);
}
const Bits& Value::as_bits() const {
  if (!is_bits()) fail_validation("value is not a bit string: " + str());
  return std::get<Bits>(v_);
}

bool Value::operator<(const Value& o) const {
  if (is_rational() != o.is_rational()) return is_rational();
  if (is_rational()) return as_rational() < o.as_rational();
  return as_bits() < o.as_bits();
}

std::string Value::str() const {
  if (is_rational()) return as_rational().str();
  return "\"" + bits_to_string(as_bits()) + "\"";
}

Bits cmp_bits(const Bits& x, const Bits& y, const Bits& z) {
  if (x.size() != y.size() || y.size() != z.size())
    fail_validation("cmp expects three strings of equal length");
  Bits out;
  for (size_t i = 0; i < x.size(); ++i)
    if (y[i] == z[i]) out.push_back(x[i]);
  return out;
}

Bits substr_bits(const Bits& k, const Bits& mask) {
  if (k.size() != mask.size()) fail_validation("substr expects strings of equal length");
  Bits out;
  for (size_t i = 0; i < k.size(); ++i)
    if (mask[i]) out.push_back(k[i]);
  return out;
}

Bits remstr_bits(const Bits& k, const Bits& mask) {
  if (k.size() != mask.size()) fail_validation("remstr expects strings of equal length");
  Bits out;
  for (size_t i = 0; i < k.size(); ++i)
    if (!mask[i]) out.push_back(k[i]);
  return out;
}

}  // namespace qccs

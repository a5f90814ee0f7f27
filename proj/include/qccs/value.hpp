#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qccs/errors.hpp"

namespace qccs {

// Exact rational arithmetic for classical expressions.  Kept deliberately
// small: corpus values are bit flags, eigenvalue labels and probabilities.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit by design
  Rational(std::int64_t n, std::int64_t d);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator-() const { return Rational(-num_, den_); }

  bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
  bool operator<(const Rational& o) const;
  bool operator<=(const Rational& o) const { return *this < o || *this == o; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// Key material in the protocols is a finite string of bits; the empty string
// is the `cmp` result when two base strings match nowhere.
using Bits = std::vector<std::uint8_t>;

std::string bits_to_string(const Bits& b);
Bits bits_from_string(const std::string& s);  // accepts only '0'/'1'

// A classical value: rational number or bit string.  Channel domains are
// finite lists of these; measurement outcomes may be labelled with either.
class Value {
 public:
  Value() : v_(Rational(0)) {}
  explicit Value(Rational r) : v_(std::move(r)) {}
  explicit Value(Bits b) : v_(std::move(b)) {}
  static Value rational(std::int64_t n, std::int64_t d = 1) { return Value(Rational(n, d)); }
  static Value bits(const std::string& s) { return Value(bits_from_string(s)); }

  bool is_rational() const { return std::holds_alternative<Rational>(v_); }
  bool is_bits() const { return std::holds_alternative<Bits>(v_); }
  const Rational& as_rational() const;
  const Bits& as_bits() const;

  bool operator==(const Value& o) const { return v_ == o.v_; }
  bool operator<(const Value& o) const;  // total order for canonical output

  std::string str() const;

 private:
  std::variant<Rational, Bits> v_;
};

// Bit-string helpers used by the protocol expressions.
//
// cmp(x, y, z): the substring of x at the positions where y and z agree;
// all three must have equal length.
Bits cmp_bits(const Bits& x, const Bits& y, const Bits& z);
// substr(k, mask): bits of k at the positions where mask is 1 (|k| == |mask|).
Bits substr_bits(const Bits& k, const Bits& mask);
// remstr(k, mask): bits of k at the positions where mask is 0.
Bits remstr_bits(const Bits& k, const Bits& mask);

}  // namespace qccs

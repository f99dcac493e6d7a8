#ifndef SHAPVAL_RATIONAL_HPP
#define SHAPVAL_RATIONAL_HPP

#include <gmpxx.h>

#include <stdexcept>
#include <string>

namespace shapval {

// All arithmetic in the library is exact. Integer and Rational are
// arbitrary-precision; Rational is kept in lowest terms with a positive
// denominator (gmp canonical form).
using Integer = mpz_class;
using Rational = mpq_class;

inline Rational make_rational(const Integer& num, const Integer& den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline Rational make_rational(long num, long den = 1) {
  return make_rational(Integer(num), Integer(den));
}

Integer factorial(unsigned long n);
Integer binomial(const Integer& n, const Integer& k);

// Parses "p/q" or "p" (used by the database format and the CLI).
Rational parse_rational(const std::string& text);

// Renders "p/q", or just "p" when the denominator is 1.
std::string to_string(const Rational& r);

bool is_integral(const Rational& r);

}  // namespace shapval

#endif

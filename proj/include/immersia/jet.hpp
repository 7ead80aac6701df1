#pragma once

#include <array>
#include <vector>

namespace immersia {

inline constexpr int kMaxN = 4;
inline constexpr int kMaxD = 8;
inline constexpr int kJetOrder = 3;
inline constexpr int kMaxMonomials = 35;  // monomials of degree <= 3 in 4 variables

using Exponent = std::array<int, kMaxN>;

// Monomial tables for truncated Taylor arithmetic in n variables.
struct JetLayout {
  int n = 0;
  int size = 0;
  std::array<Exponent, kMaxMonomials> exps{};
  std::array<int, kMaxMonomials> degree{};
  std::array<double, kMaxMonomials> factorial{};  // prod of e_i!
  struct Product {
    int a, b, c;
  };
  std::vector<Product> products;  // grouped by a
  std::array<int, kMaxMonomials + 1> row{};

  int index_of(const Exponent& e) const;
  static const JetLayout& get(int n);
};

// Taylor coefficients of a scalar function around a point, truncated at order 3.
struct Jet {
  const JetLayout* layout = nullptr;
  std::array<double, kMaxMonomials> c{};

  Jet() = default;
  explicit Jet(const JetLayout& L, double value = 0.0) : layout(&L) { c[0] = value; }

  static Jet variable(const JetLayout& L, int i, double value);

  double value() const { return c[0]; }
  // Partial derivative for the multi-index e (sum <= 3).
  double derivative(const Exponent& e) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(double s);
  Jet& operator+=(double s) {
    c[0] += s;
    return *this;
  }
};

Jet operator+(Jet a, const Jet& b);
Jet operator-(Jet a, const Jet& b);
Jet operator-(Jet a);
Jet operator*(const Jet& a, const Jet& b);
Jet operator*(Jet a, double s);
Jet operator*(double s, Jet a);
Jet operator+(Jet a, double s);
Jet operator+(double s, Jet a);
Jet operator-(Jet a, double s);
Jet operator-(double s, const Jet& a);

// f(a) from the value and first three derivatives of f at a.value().
Jet compose(const Jet& a, double f0, double f1, double f2, double f3);

Jet sqrt(const Jet& a);
Jet inv(const Jet& a);
Jet rsqrt(const Jet& a);
Jet exp(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet sinh(const Jet& a);
Jet cosh(const Jet& a);
Jet operator/(const Jet& a, const Jet& b);

}  // namespace immersia

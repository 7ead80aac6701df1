#include "immersia/jet.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace immersia {

namespace {

JetLayout make_layout(int n) {
  JetLayout L;
  L.n = n;
  int k = 0;
  for (int deg = 0; deg <= kJetOrder; ++deg) {
    // enumerate exponents of total degree deg in lexicographic order
    Exponent e{};
    std::vector<Exponent> level;
    auto rec = [&](auto&& self, int var, int left) -> void {
      if (var == n - 1) {
        e[var] = left;
        level.push_back(e);
        return;
      }
      for (int v = left; v >= 0; --v) {
        e[var] = v;
        self(self, var + 1, left - v);
      }
    };
    if (n == 0) {
      if (deg == 0) level.push_back(e);
    } else {
      rec(rec, 0, deg);
    }
    for (const auto& x : level) {
      L.exps[k] = x;
      L.degree[k] = deg;
      double f = 1.0;
      for (int i = 0; i < n; ++i)
        for (int j = 2; j <= x[i]; ++j) f *= j;
      L.factorial[k] = f;
      ++k;
    }
  }
  L.size = k;
  for (int a = 0; a < L.size; ++a) {
    L.row[a] = static_cast<int>(L.products.size());
    for (int b = 0; b < L.size; ++b) {
      if (L.degree[a] + L.degree[b] > kJetOrder) continue;
      Exponent s{};
      for (int i = 0; i < n; ++i) s[i] = L.exps[a][i] + L.exps[b][i];
      L.products.push_back({a, b, L.index_of(s)});
    }
  }
  L.row[L.size] = static_cast<int>(L.products.size());
  return L;
}

}  // namespace

int JetLayout::index_of(const Exponent& e) const {
  for (int k = 0; k < size; ++k) {
    bool eq = true;
    for (int i = 0; i < n; ++i) eq = eq && exps[k][i] == e[i];
    if (eq) return k;
  }
  return -1;
}

const JetLayout& JetLayout::get(int n) {
  static std::array<JetLayout, kMaxN + 1> layouts;
  static std::once_flag once;
  std::call_once(once, [] {
    for (int i = 0; i <= kMaxN; ++i) layouts[i] = make_layout(i);
  });
  if (n < 0 || n > kMaxN) throw std::out_of_range("jet dimension");
  return layouts[n];
}

Jet Jet::variable(const JetLayout& L, int i, double value) {
  Jet j(L, value);
  Exponent e{};
  e[i] = 1;
  j.c[L.index_of(e)] = 1.0;
  return j;
}

double Jet::derivative(const Exponent& e) const {
  int k = layout->index_of(e);
  if (k < 0) throw std::out_of_range("jet derivative order");
  return c[k] * layout->factorial[k];
}

Jet& Jet::operator+=(const Jet& o) {
  for (int k = 0; k < layout->size; ++k) c[k] += o.c[k];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  for (int k = 0; k < layout->size; ++k) c[k] -= o.c[k];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (int k = 0; k < layout->size; ++k) c[k] *= s;
  return *this;
}

Jet operator+(Jet a, const Jet& b) { return a += b; }
Jet operator-(Jet a, const Jet& b) { return a -= b; }
Jet operator-(Jet a) { return a *= -1.0; }
Jet operator*(Jet a, double s) { return a *= s; }
Jet operator*(double s, Jet a) { return a *= s; }
Jet operator+(Jet a, double s) { return a += s; }
Jet operator+(double s, Jet a) { return a += s; }
Jet operator-(Jet a, double s) { return a += -s; }
Jet operator-(double s, const Jet& a) {
  Jet r = -a;
  return r += s;
}

Jet operator*(const Jet& a, const Jet& b) {
  const JetLayout* L = a.layout ? a.layout : b.layout;
  Jet r(*L, 0.0);
  // skip zero coefficients of the left factor
  for (int i = 0; i < L->size; ++i) {
    const double x = a.c[i];
    if (x == 0.0) continue;
    const auto* p = L->products.data();
    for (int t = L->row[i]; t < L->row[i + 1]; ++t) r.c[p[t].c] += x * b.c[p[t].b];
  }
  return r;
}

Jet compose(const Jet& a, double f0, double f1, double f2, double f3) {
  Jet d = a;
  d.c[0] = 0.0;
  Jet d2 = d * d;
  Jet d3 = d2 * d;
  Jet r(*a.layout, f0);
  for (int k = 1; k < a.layout->size; ++k)
    r.c[k] = f1 * d.c[k] + 0.5 * f2 * d2.c[k] + (f3 / 6.0) * d3.c[k];
  return r;
}

Jet sqrt(const Jet& a) {
  double x = a.value();
  double s = std::sqrt(x);
  return compose(a, s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x));
}

Jet inv(const Jet& a) {
  double x = a.value();
  double i = 1.0 / x;
  return compose(a, i, -i * i, 2.0 * i * i * i, -6.0 * i * i * i * i);
}

Jet rsqrt(const Jet& a) {
  double x = a.value();
  double r = 1.0 / std::sqrt(x);
  double r3 = r / x, r5 = r3 / x, r7 = r5 / x;
  return compose(a, r, -0.5 * r3, 0.75 * r5, -1.875 * r7);
}

Jet exp(const Jet& a) {
  double e = std::exp(a.value());
  return compose(a, e, e, e, e);
}

Jet sin(const Jet& a) {
  double s = std::sin(a.value()), c = std::cos(a.value());
  return compose(a, s, c, -s, -c);
}

Jet cos(const Jet& a) {
  double s = std::sin(a.value()), c = std::cos(a.value());
  return compose(a, c, -s, -c, s);
}

Jet sinh(const Jet& a) {
  double s = std::sinh(a.value()), c = std::cosh(a.value());
  return compose(a, s, c, s, c);
}

Jet cosh(const Jet& a) {
  double s = std::sinh(a.value()), c = std::cosh(a.value());
  return compose(a, c, s, c, s);
}

Jet operator/(const Jet& a, const Jet& b) { return a * inv(b); }

}  // namespace immersia

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>

#include "esspec/errors.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Truncated Taylor arithmetic
// ---------------------------------------------------------------------------
//
// Jet<T, N> carries the scaled Taylor coefficients a[k] = f^(k)(t0) / k! of a
// scalar function about a base point, up to order N.  Arithmetic propagates
// the coefficients exactly, so derivatives of deeply composed coefficient
// functions come out to machine precision instead of via finite differences.
// Coefficient models evaluate as order-4 jets: values and first/second
// derivatives of the Schur complement functions need up to fourth derivatives
// of the primitives once explicit d/dt operators appear inside a model's q.

template <class T, int N>
struct Jet {
  static_assert(N >= 1);
  std::array<T, N + 1> a{};  // a[k] = f^(k)/k!

  static Jet constant(T v) {
    Jet j;
    j.a[0] = v;
    return j;
  }
  // The coordinate itself: value t0, unit first derivative.
  static Jet variable(T t0) {
    Jet j;
    j.a[0] = t0;
    j.a[1] = T(1);
    return j;
  }

  T value() const { return a[0]; }
  T d1() const { return a[1]; }
  T d2() const {
    static_assert(N >= 2);
    return T(2) * a[2];
  }

  Jet operator-() const {
    Jet r;
    for (int k = 0; k <= N; ++k) r.a[k] = -a[k];
    return r;
  }
};

// Shift down one derivative: returns the jet of f' (one order shorter).
template <class T, int N>
Jet<T, N - 1> derivative(const Jet<T, N>& f) {
  Jet<T, N - 1> r;
  for (int k = 0; k <= N - 1; ++k) r.a[k] = T(k + 1) * f.a[k + 1];
  return r;
}

// Drop coefficients beyond order M.  Composite coefficient functions are
// evaluated at a higher order than the final jet so that explicit d/dt
// factors stay exact; this brings intermediates back to a common order.
template <int M, class T, int N>
Jet<T, M> truncate(const Jet<T, N>& f) {
  static_assert(M <= N, "truncate cannot raise the order of a jet");
  Jet<T, M> r;
  for (int k = 0; k <= M; ++k) r.a[k] = f.a[k];
  return r;
}

template <class T, int N>
Jet<T, N> operator+(const Jet<T, N>& x, const Jet<T, N>& y) {
  Jet<T, N> r;
  for (int k = 0; k <= N; ++k) r.a[k] = x.a[k] + y.a[k];
  return r;
}

template <class T, int N>
Jet<T, N> operator-(const Jet<T, N>& x, const Jet<T, N>& y) {
  Jet<T, N> r;
  for (int k = 0; k <= N; ++k) r.a[k] = x.a[k] - y.a[k];
  return r;
}

template <class T, int N>
Jet<T, N> operator*(const Jet<T, N>& x, const Jet<T, N>& y) {
  Jet<T, N> r;
  for (int k = 0; k <= N; ++k) {
    T s{};
    for (int j = 0; j <= k; ++j) s += x.a[j] * y.a[k - j];
    r.a[k] = s;
  }
  return r;
}

template <class T, int N>
Jet<T, N> operator/(const Jet<T, N>& x, const Jet<T, N>& y) {
  if (y.a[0] == T(0)) throw DomainError("division by zero");
  Jet<T, N> r;
  r.a[0] = x.a[0] / y.a[0];
  for (int k = 1; k <= N; ++k) {
    T s = x.a[k];
    for (int j = 1; j <= k; ++j) s -= y.a[j] * r.a[k - j];
    r.a[k] = s / y.a[0];
  }
  return r;
}

template <class T, int N>
Jet<T, N> operator*(T s, const Jet<T, N>& x) {
  Jet<T, N> r;
  for (int k = 0; k <= N; ++k) r.a[k] = s * x.a[k];
  return r;
}
template <class T, int N>
Jet<T, N> operator*(const Jet<T, N>& x, T s) {
  return s * x;
}
template <class T, int N>
Jet<T, N> operator+(const Jet<T, N>& x, T s) {
  Jet<T, N> r = x;
  r.a[0] += s;
  return r;
}
template <class T, int N>
Jet<T, N> operator+(T s, const Jet<T, N>& x) {
  return x + s;
}
template <class T, int N>
Jet<T, N> operator-(const Jet<T, N>& x, T s) {
  Jet<T, N> r = x;
  r.a[0] -= s;
  return r;
}
template <class T, int N>
Jet<T, N> operator-(T s, const Jet<T, N>& x) {
  return (-x) + s;
}

template <class T, int N>
Jet<T, N> exp(const Jet<T, N>& x) {
  Jet<T, N> r;
  r.a[0] = std::exp(x.a[0]);
  for (int k = 1; k <= N; ++k) {
    T s{};
    for (int j = 1; j <= k; ++j) s += T(j) * x.a[j] * r.a[k - j];
    r.a[k] = s / T(k);
  }
  return r;
}

template <int N>
Jet<double, N> log(const Jet<double, N>& x) {
  if (!(x.a[0] > 0.0)) throw DomainError("log of a nonpositive value");
  Jet<double, N> r;
  r.a[0] = std::log(x.a[0]);
  for (int k = 1; k <= N; ++k) {
    double s = double(k) * x.a[k];
    for (int j = 1; j < k; ++j) s -= double(j) * r.a[j] * x.a[k - j];
    r.a[k] = s / (double(k) * x.a[0]);
  }
  return r;
}

// x^e for integer e via exponentiation by squaring; well defined at x = 0
// for e >= 0 (so expressions like t^2 evaluate at t = 0).
template <class T, int N>
Jet<T, N> pow_int(const Jet<T, N>& x, long e) {
  if (e < 0) return Jet<T, N>::constant(T(1)) / pow_int(x, -e);
  Jet<T, N> r = Jet<T, N>::constant(T(1));
  Jet<T, N> base = x;
  for (unsigned long m = static_cast<unsigned long>(e); m != 0; m >>= 1) {
    if (m & 1) r = r * base;
    base = base * base;
  }
  return r;
}

// x^e for real e; integer exponents route through pow_int, otherwise the
// base must be strictly positive.
template <int N>
Jet<double, N> pow(const Jet<double, N>& x, double e) {
  if (e == std::nearbyint(e) && std::abs(e) <= 1e6)
    return pow_int(x, static_cast<long>(std::llrint(e)));
  if (!(x.a[0] > 0.0))
    throw DomainError("fractional power of a nonpositive base");
  // k a0 p_k = sum_{j<k} (e (k-j) - j) a_{k-j} p_j  (from a p' = e a' p)
  Jet<double, N> r;
  r.a[0] = std::pow(x.a[0], e);
  for (int k = 1; k <= N; ++k) {
    double s = 0.0;
    for (int j = 0; j < k; ++j)
      s += (e * double(k - j) - double(j)) * x.a[k - j] * r.a[j];
    r.a[k] = s / (double(k) * x.a[0]);
  }
  return r;
}

template <int N>
Jet<double, N> sqrt(const Jet<double, N>& x) {
  if (!(x.a[0] > 0.0)) throw DomainError("sqrt of a nonpositive value");
  return pow(x, 0.5);
}

template <class T, int N>
void sincos(const Jet<T, N>& x, Jet<T, N>& s, Jet<T, N>& c) {
  s.a[0] = std::sin(x.a[0]);
  c.a[0] = std::cos(x.a[0]);
  for (int k = 1; k <= N; ++k) {
    T su{}, cu{};
    for (int j = 1; j <= k; ++j) {
      su += T(j) * x.a[j] * c.a[k - j];
      cu += T(j) * x.a[j] * s.a[k - j];
    }
    s.a[k] = su / T(k);
    c.a[k] = -cu / T(k);
  }
}

template <class T, int N>
Jet<T, N> sin(const Jet<T, N>& x) {
  Jet<T, N> s, c;
  sincos(x, s, c);
  return s;
}

template <class T, int N>
Jet<T, N> cos(const Jet<T, N>& x) {
  Jet<T, N> s, c;
  sincos(x, s, c);
  return c;
}

// Compose a real pair (re, im) into a complex jet.
template <int N>
Jet<std::complex<double>, N> complex_jet(const Jet<double, N>& re,
                                         const Jet<double, N>& im) {
  Jet<std::complex<double>, N> r;
  for (int k = 0; k <= N; ++k) r.a[k] = {re.a[k], im.a[k]};
  return r;
}

template <int N>
Jet<std::complex<double>, N> conj(const Jet<std::complex<double>, N>& x) {
  Jet<std::complex<double>, N> r;
  for (int k = 0; k <= N; ++k) r.a[k] = std::conj(x.a[k]);
  return r;
}

// ---------------------------------------------------------------------------
// Second-order dual numbers
// ---------------------------------------------------------------------------
//
// The public face of derivative propagation: value plus first and second
// derivative with respect to t.  Obtained by truncating a jet.

struct Dual2 {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

template <int N>
Dual2 to_dual2(const Jet<double, N>& j) {
  static_assert(N >= 2);
  return {j.a[0], j.a[1], 2.0 * j.a[2]};
}

using Jet4 = Jet<double, 4>;
using CJet4 = Jet<std::complex<double>, 4>;

}  // namespace esspec

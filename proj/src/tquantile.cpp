#include "orepanel/tquantile.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace orepanel {

namespace {

// Continued fraction for the incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double kEps = 3e-16;
  const double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw std::invalid_argument("incomplete beta: a,b must be positive");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double inv_reg_incomplete_beta(double a, double b, double p) {
  if (p <= 0) return 0.0;
  if (p >= 1) return 1.0;
  double lo = 0.0, hi = 1.0, x = 0.5;
  for (int i = 0; i < 200; ++i) {
    x = 0.5 * (lo + hi);
    if (reg_incomplete_beta(a, b, x) < p)
      lo = x;
    else
      hi = x;
    if (hi - lo < 1e-14) break;
  }
  // Newton polish: d/dx I_x(a,b) = x^(a-1)(1-x)^(b-1)/B(a,b)
  double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  for (int i = 0; i < 5; ++i) {
    double f = reg_incomplete_beta(a, b, x) - p;
    if (x <= 0 || x >= 1) break;
    double dens = std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - lbeta);
    if (dens <= 0) break;
    double step = f / dens;
    double xn = x - step;
    if (xn <= 0 || xn >= 1) break;
    x = xn;
    if (std::fabs(step) < 1e-12) break;
  }
  return x;
}

double student_t_cdf(double t, double df) {
  if (df <= 0) throw std::invalid_argument("t cdf: df must be positive");
  if (t == 0) return 0.5;
  double x = df / (df + t * t);
  double tail = 0.5 * reg_incomplete_beta(df / 2.0, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (df <= 0) throw std::invalid_argument("t quantile: df must be positive");
  if (p <= 0 || p >= 1) throw std::invalid_argument("t quantile: p must be in (0,1)");
  if (p == 0.5) return 0.0;
  bool upper = p > 0.5;
  double tail = upper ? 2.0 * (1.0 - p) : 2.0 * p;
  double x = inv_reg_incomplete_beta(df / 2.0, 0.5, tail);
  double t;
  if (x <= 0) {
    t = std::numeric_limits<double>::infinity();
  } else {
    t = std::sqrt(df * (1.0 - x) / x);
  }
  return upper ? t : -t;
}

}  // namespace orepanel

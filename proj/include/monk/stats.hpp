#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "monk/common.hpp"

namespace monk::stats {

struct Sample {
  std::vector<double> values;
  std::string label;
};

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double median_sorted(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return median_sorted(v);
}

// ---- special functions -----------------------------------------------------

// Continued fraction for the regularized incomplete beta, evaluated with the
// modified Lentz scheme to 1e-12.
inline double beta_cont_fraction(double a, double b, double x) {
  constexpr double kEps = 1e-12;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
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
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * beta_cont_fraction(a, b, x) / a;
  }
  return 1.0 - bt * beta_cont_fraction(b, a, 1.0 - x) / b;
}

// Two-sided p-value of the Student-t distribution.
inline double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) throw ConfigError("student t: df must be positive");
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Standard normal quantile via bisection plus Newton polish. Monotone,
// deterministic, and accurate to ~1e-14 over the range the tests exercise.
inline double normal_ppf(double p) {
  if (p <= 0.0 || p >= 1.0) throw ConfigError("normal_ppf: p must be in (0,1)");
  double lo = -12.0;
  double hi = 12.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double z = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    const double err = normal_cdf(z) - p;
    const double d = normal_pdf(z);
    if (d <= 0.0) break;
    z -= err / d;
  }
  return z;
}

// ---- the battery -----------------------------------------------------------

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
// freedom; two-sided p from the Student-t distribution.
inline WelchResult welch_t(const Sample& a, const Sample& b) {
  const std::size_t na = a.values.size();
  const std::size_t nb = b.values.size();
  if (na < 2 || nb < 2) {
    throw ConfigError("welch_t: each sample needs at least 2 values");
  }
  const double ma = mean(a.values);
  const double mb = mean(b.values);
  const double va = sample_variance(a.values);
  const double vb = sample_variance(b.values);
  if (va == 0.0 && vb == 0.0) {
    if (ma == mb) {
      return WelchResult{0.0, static_cast<double>(na + nb - 2), 1.0};
    }
    throw ConfigError("welch_t: zero variance in both samples with unequal means");
  }
  const double sa = va / static_cast<double>(na);
  const double sb = vb / static_cast<double>(nb);
  const double se = std::sqrt(sa + sb);
  WelchResult r;
  r.t = (ma - mb) / se;
  r.df = (sa + sb) * (sa + sb) /
         (sa * sa / static_cast<double>(na - 1) +
          sb * sb / static_cast<double>(nb - 1));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

struct ShapiroResult {
  double w = 0.0;
  double p = 0.0;
};

// Shapiro-Wilk normality test in the Royston (1995) approximation, valid for
// 3 <= n <= 5000.
inline ShapiroResult shapiro_wilk(const Sample& sample) {
  const std::size_t n = sample.values.size();
  if (n < 3 || n > 5000) {
    throw ConfigError("shapiro_wilk: n must be within [3,5000]");
  }
  std::vector<double> x = sample.values;
  std::sort(x.begin(), x.end());
  const double nd = static_cast<double>(n);

  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = normal_ppf((static_cast<double>(i + 1) - 0.375) / (nd + 0.25));
  }
  double m_sq = 0.0;
  for (double v : m) m_sq += v * v;

  std::vector<double> a(n, 0.0);
  if (n == 3) {
    a[0] = -std::sqrt(0.5);
    a[2] = std::sqrt(0.5);
  } else {
    const double rsn = 1.0 / std::sqrt(nd);
    const double c_n = m[n - 1] / std::sqrt(m_sq);
    const double an = c_n + rsn * (0.221157 +
                                   rsn * (-0.147981 +
                                          rsn * (-2.071190 +
                                                 rsn * (4.434685 +
                                                        rsn * -2.706056))));
    double an1 = 0.0;
    double phi = 0.0;
    if (n > 5) {
      const double c_n1 = m[n - 2] / std::sqrt(m_sq);
      an1 = c_n1 + rsn * (0.042981 +
                          rsn * (-0.293762 +
                                 rsn * (-1.752461 +
                                        rsn * (5.682633 + rsn * -3.582633))));
      phi = (m_sq - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2]) /
            (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
    } else {
      phi = (m_sq - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * an * an);
    }
    const double sqrt_phi = std::sqrt(phi);
    a[n - 1] = an;
    a[0] = -an;
    if (n > 5) {
      a[n - 2] = an1;
      a[1] = -an1;
      for (std::size_t i = 2; i + 2 < n; ++i) a[i] = m[i] / sqrt_phi;
    } else {
      for (std::size_t i = 1; i + 1 < n; ++i) a[i] = m[i] / sqrt_phi;
    }
  }

  const double xbar = mean(x);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += a[i] * x[i];
    den += (x[i] - xbar) * (x[i] - xbar);
  }
  if (den <= 0.0) {
    throw ConfigError("shapiro_wilk: sample has zero variance");
  }
  ShapiroResult r;
  r.w = num * num / den;
  if (r.w > 1.0) r.w = 1.0;

  if (n == 3) {
    const double pi6 = 6.0 / 3.14159265358979323846;
    const double stqr = std::asin(std::sqrt(0.75));
    double p = pi6 * (std::asin(std::sqrt(r.w)) - stqr);
    r.p = std::clamp(p, 0.0, 1.0);
    return r;
  }
  double z = 0.0;
  if (n <= 11) {
    const double g = -2.273 + 0.459 * nd;
    const double mu = 0.5440 - 0.39978 * nd + 0.025054 * nd * nd -
                      0.0006714 * nd * nd * nd;
    const double sigma = std::exp(1.3822 - 0.77857 * nd + 0.062767 * nd * nd -
                                  0.0020322 * nd * nd * nd);
    const double y = -std::log(g - std::log(1.0 - r.w));
    z = (y - mu) / sigma;
  } else {
    const double ln = std::log(nd);
    const double mu = -1.5861 - 0.31082 * ln - 0.083751 * ln * ln +
                      0.0038915 * ln * ln * ln;
    const double sigma = std::exp(-0.4803 - 0.082676 * ln + 0.0030302 * ln * ln);
    z = (std::log(1.0 - r.w) - mu) / sigma;
  }
  r.p = 1.0 - normal_cdf(z);
  return r;
}

struct MadResult {
  Sample filtered;
  std::size_t removed = 0;
};

// Removes values farther than k raw MADs from the median. A zero MAD (half
// or more of the data at the median) removes nothing. The 1.4826 normal
// consistency constant is off by default.
inline MadResult mad_filter(const Sample& s, double k,
                            bool consistency_constant = false) {
  if (s.values.empty()) throw ConfigError("mad_filter: empty sample");
  if (k <= 0.0) throw ConfigError("mad_filter: k must be positive");
  const double med = median(s.values);
  std::vector<double> dev;
  dev.reserve(s.values.size());
  for (double v : s.values) dev.push_back(std::fabs(v - med));
  double mad = median(dev);
  if (consistency_constant) mad *= 1.4826;
  MadResult r;
  r.filtered.label = s.label;
  if (mad == 0.0) {
    r.filtered.values = s.values;
    return r;
  }
  for (double v : s.values) {
    if (std::fabs(v - med) > k * mad) {
      ++r.removed;
    } else {
      r.filtered.values.push_back(v);
    }
  }
  return r;
}

// Relative standard deviation in percent.
inline double rsd(const Sample& s) {
  if (s.values.size() < 2) throw ConfigError("rsd: need at least 2 values");
  const double m = mean(s.values);
  if (m == 0.0) throw ConfigError("rsd: mean is zero");
  return 100.0 * std::sqrt(sample_variance(s.values)) / std::fabs(m);
}

struct StatsReport {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  double normality_p = -1.0;  // negative when not computed
  double rsd_percent = 0.0;
  std::size_t n_removed_outliers = 0;
};

}  // namespace monk::stats

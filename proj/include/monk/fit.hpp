#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "monk/common.hpp"

namespace monk {

struct FitSegment {
  double lo = 0.0;  // segment domain [lo, hi)
  double hi = 0.0;
  int degree = 1;
  std::vector<double> coefficients;  // ascending powers
  double sse = 0.0;
  std::size_t points = 0;

  double leading() const { return coefficients.back(); }
  double eval(double x) const {
    double y = 0.0;
    for (std::size_t i = coefficients.size(); i-- > 0;) {
      y = y * x + coefficients[i];
    }
    return y;
  }
};

struct PiecewiseFit {
  std::vector<double> breakpoints;
  std::vector<FitSegment> segments;
  std::vector<double> leading_ratios;  // segment[i+1].leading / segment[i].leading
};

namespace detail {

// Gaussian elimination with partial pivoting; the systems here are tiny
// (degree + 1 unknowns).
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                        std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < 1e-30) {
      throw ConfigError("least squares: singular normal equations");
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace detail

// Ordinary least squares polynomial fit (normal equations, partial
// pivoting). Returns coefficients in ascending powers.
inline std::vector<double> polyfit(const std::vector<double>& xs,
                                   const std::vector<double>& ys, int degree) {
  if (degree < 0) throw ConfigError("polyfit: degree must be >= 0");
  if (xs.size() != ys.size()) throw ConfigError("polyfit: size mismatch");
  const std::size_t n = xs.size();
  const std::size_t terms = static_cast<std::size_t>(degree) + 1;
  if (n < terms) throw ConfigError("polyfit: under-determined system");
  std::vector<double> power_sums(2 * terms - 1, 0.0);
  std::vector<double> rhs(terms, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double p = 1.0;
    for (std::size_t k = 0; k < power_sums.size(); ++k) {
      power_sums[k] += p;
      if (k < terms) rhs[k] += ys[i] * p;
      p *= xs[i];
    }
  }
  std::vector<std::vector<double>> g(terms, std::vector<double>(terms, 0.0));
  for (std::size_t r = 0; r < terms; ++r) {
    for (std::size_t c = 0; c < terms; ++c) g[r][c] = power_sums[r + c];
  }
  return detail::solve_linear(std::move(g), std::move(rhs));
}

// Piecewise least-squares over (x, y) points split at the given x
// breakpoints. Every segment must be over-determined: more than degree+1
// points.
inline PiecewiseFit fit_piecewise(const std::vector<double>& xs,
                                  const std::vector<double>& ys,
                                  std::vector<double> breakpoints, int degree) {
  if (xs.size() != ys.size()) throw ConfigError("fit_piecewise: size mismatch");
  std::sort(breakpoints.begin(), breakpoints.end());
  PiecewiseFit fit;
  fit.breakpoints = breakpoints;
  const std::size_t nseg = breakpoints.size() + 1;
  std::vector<std::vector<double>> seg_x(nseg), seg_y(nseg);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::size_t s = 0;
    while (s < breakpoints.size() && xs[i] >= breakpoints[s]) ++s;
    seg_x[s].push_back(xs[i]);
    seg_y[s].push_back(ys[i]);
  }
  for (std::size_t s = 0; s < nseg; ++s) {
    FitSegment seg;
    seg.lo = s == 0 ? -std::numeric_limits<double>::infinity()
                    : breakpoints[s - 1];
    seg.hi = s == breakpoints.size()
                 ? std::numeric_limits<double>::infinity()
                 : breakpoints[s];
    seg.degree = degree;
    seg.points = seg_x[s].size();
    if (seg.points <= static_cast<std::size_t>(degree) + 1) {
      throw ConfigError("fit_piecewise: segment " + std::to_string(s) +
                        " is under-determined (" + std::to_string(seg.points) +
                        " points for degree " + std::to_string(degree) + ")");
    }
    seg.coefficients = polyfit(seg_x[s], seg_y[s], degree);
    for (std::size_t i = 0; i < seg_x[s].size(); ++i) {
      const double e = seg_y[s][i] - seg.eval(seg_x[s][i]);
      seg.sse += e * e;
    }
    fit.segments.push_back(std::move(seg));
  }
  for (std::size_t s = 0; s + 1 < fit.segments.size(); ++s) {
    fit.leading_ratios.push_back(fit.segments[s + 1].leading() /
                                 fit.segments[s].leading());
  }
  return fit;
}

}  // namespace monk

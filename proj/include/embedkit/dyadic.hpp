#pragma once

// Dyadic cube lattice Q_{nu,m}: center 2^{-nu} m, side 2^{-nu}. Cubes at
// different levels are deliberately NOT nested under this centering
// convention, so there is no parent/child API. This module provides exact
// cube geometry, the near-origin / intermediate / far region split, finite
// window enumeration with a budget, and log2 least-squares slope fitting for
// asymptotic classification of lattice sequences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "embedkit/common.hpp"

namespace embedkit::dyadic {

struct Cube {
  int nu = 0;
  std::vector<std::int64_t> m;

  int dim() const { return static_cast<int>(m.size()); }
  double side() const { return std::ldexp(1.0, -nu); }
  double center(int i) const { return std::ldexp(static_cast<double>(m[static_cast<std::size_t>(i)]), -nu); }

  // Euclidean distance of the center from the origin, 2^{-nu}|m|.
  double center_norm() const {
    double s = 0.0;
    for (auto mi : m) {
      double v = static_cast<double>(mi);
      s += v * v;
    }
    return std::ldexp(std::sqrt(s), -nu);
  }

  bool operator==(const Cube& o) const { return nu == o.nu && m == o.m; }
};

inline Box cube_box(const Cube& c) {
  if (c.nu < 0) throw InvalidSpec("cube_box: level must be nonnegative");
  std::size_t d = c.m.size();
  std::vector<double> lo(d), hi(d);
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = std::ldexp(static_cast<double>(c.m[i]) - 0.5, -c.nu);
    hi[i] = std::ldexp(static_cast<double>(c.m[i]) + 0.5, -c.nu);
  }
  return Box(std::move(lo), std::move(hi));
}

enum class Region { NearOrigin, Intermediate, Far };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::NearOrigin: return "near_origin";
    case Region::Intermediate: return "intermediate";
    case Region::Far: return "far";
  }
  return "intermediate";
}

// Center-distance split: near when 2^{-nu}|m| <= eps, far when >= 1/eps.
// Monotone along m -> 2m at fixed nu.
inline Region classify_region(const Cube& c, double eps = 0.1) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidSpec("classify_region: eps must lie in (0,1)");
  double r = c.center_norm();
  if (r <= eps) return Region::NearOrigin;
  if (r >= 1.0 / eps) return Region::Far;
  return Region::Intermediate;
}

// ---------------------------------------------------------------------------
// Window enumeration
// ---------------------------------------------------------------------------

struct Window {
  int nu_max = 12;
  double radius_factor = 4.0;              // |m|_inf <= radius_factor * 2^nu ...
  std::optional<std::int64_t> radius_cap;  // ... clipped to this many lattice steps
  std::optional<Region> filter;
  double region_eps = 0.1;
  std::int64_t budget = 1'000'000;

  // Dense-part defaults keep the full cover |x| <= 4 in d=1 and clip the
  // per-level radius in higher dimensions where the cube count explodes.
  static Window defaults(int d) {
    Window w;
    if (d <= 1) {
      w.nu_max = 12;
    } else if (d == 2) {
      w.nu_max = 8;
      w.radius_cap = 96;
    } else {
      w.nu_max = 6;
      w.radius_cap = 12;
    }
    return w;
  }

  std::int64_t radius_at(int nu) const {
    double r = radius_factor * std::ldexp(1.0, nu);
    auto rad = static_cast<std::int64_t>(std::floor(r));
    if (radius_cap) rad = std::min(rad, *radius_cap);
    return std::max<std::int64_t>(rad, 0);
  }
};

namespace detail {

inline bool next_lex(std::vector<std::int64_t>& m, std::int64_t radius) {
  // Lexicographic successor over the box [-radius, radius]^d.
  for (std::size_t i = m.size(); i-- > 0;) {
    if (m[i] < radius) {
      ++m[i];
      for (std::size_t j = i + 1; j < m.size(); ++j) m[j] = -radius;
      return true;
    }
  }
  return false;
}

inline double ipow_count(std::int64_t per_axis, int d) {
  double c = 1.0;
  for (int i = 0; i < d; ++i) c *= static_cast<double>(per_axis);
  return c;
}

}  // namespace detail

// All (nu, m) with nu <= nu_max, |m|_inf <= radius(nu), optionally filtered
// by region; nu ascending, m lexicographic. The count is checked against the
// budget before allocation.
inline std::vector<Cube> enumerate_window(const Window& w, int d) {
  if (d < 1) throw InvalidSpec("enumerate_window: dimension must be >= 1");
  if (w.nu_max < 0) throw InvalidSpec("enumerate_window: nu_max must be >= 0");

  double total = 0.0;
  for (int nu = 0; nu <= w.nu_max; ++nu)
    total += detail::ipow_count(2 * w.radius_at(nu) + 1, d);
  if (total > static_cast<double>(w.budget))
    throw WindowTooLarge("window holds " + std::to_string(static_cast<long long>(total)) +
                         " cubes, budget " + std::to_string(w.budget));

  std::vector<Cube> out;
  out.reserve(static_cast<std::size_t>(total));
  for (int nu = 0; nu <= w.nu_max; ++nu) {
    std::int64_t radius = w.radius_at(nu);
    Cube c;
    c.nu = nu;
    c.m.assign(static_cast<std::size_t>(d), -radius);
    while (true) {
      if (!w.filter || classify_region(c, w.region_eps) == *w.filter) out.push_back(c);
      if (!detail::next_lex(c.m, radius)) break;
    }
  }
  return out;
}

// Geometric far-field ladder: m = +/- 2^j along each axis (plus the all-ones
// diagonal direction scaled by 2^j) at the coarse levels. Probes the far
// regime that dense enumeration cannot reach.
inline std::vector<Cube> far_ladder_cubes(int d, int j_max = 20, std::span<const int> levels = {}) {
  static constexpr int kDefaultLevels[] = {0, 1, 2};
  if (levels.empty()) levels = kDefaultLevels;
  std::vector<Cube> out;
  for (int nu : levels) {
    for (int j = 0; j <= j_max; ++j) {
      std::int64_t step = std::int64_t{1} << j;
      for (int axis = 0; axis < d; ++axis) {
        for (int sgn : {+1, -1}) {
          Cube c;
          c.nu = nu;
          c.m.assign(static_cast<std::size_t>(d), 0);
          c.m[static_cast<std::size_t>(axis)] = sgn * step;
          out.push_back(std::move(c));
        }
      }
      if (d > 1) {
        Cube c;
        c.nu = nu;
        c.m.assign(static_cast<std::size_t>(d), step);
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Log-slope fitting
// ---------------------------------------------------------------------------

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS in log2 space
  int n = 0;
};

// Least-squares line through (x_i, y_i) where the ordinates are already in
// log2 space. Shared by fit_log_slope and callers that carry log2 values
// natively (avoiding exp2/log2 round trips and overflow).
inline SlopeFit fit_linear(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidSpec("fit_linear: mismatched sample arrays");
  if (xs.size() < 3) throw InvalidSpec("fit_linear: need at least 3 samples");
  double x0 = xs[0];
  bool degenerate = true;
  for (double x : xs)
    if (x != x0) {
      degenerate = false;
      break;
    }
  if (degenerate) throw DegenerateAbscissa("fit_linear: all abscissae equal");

  SlopeFit f;
  f.n = static_cast<int>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= f.n;
  my /= f.n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double e = ys[i] - (f.slope * xs[i] + f.intercept);
    rss += e * e;
  }
  f.residual = std::sqrt(rss / f.n);
  return f;
}

// Least-squares line through (x_i, log2 y_i). Values must be positive and at
// least three samples are required for a meaningful residual.
inline SlopeFit fit_log_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidSpec("fit_log_slope: mismatched sample arrays");
  std::vector<double> ly(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!(ys[i] > 0.0)) throw InvalidSpec("fit_log_slope: values must be positive");
    ly[i] = std::log2(ys[i]);
  }
  return fit_linear(xs, ly);
}

inline SlopeFit fit_log_slope(std::span<const std::pair<double, double>> samples) {
  std::vector<double> xs(samples.size()), ys(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    xs[i] = samples[i].first;
    ys[i] = samples[i].second;
  }
  return fit_log_slope(xs, ys);
}

}  // namespace embedkit::dyadic

#pragma once

// Empirical norm oracle on periodic grids: discrete Littlewood-Paley
// decomposition via the FFT, weighted Besov / Triebel-Lizorkin /
// Bessel-potential / Sobolev norms of sampled functions, frequency-localized
// witness atoms whose norm ratios track the dyadic cube criterion, and
// Gagliardo-Nirenberg interpolation checks.
//
// The ambient model of R^d is the periodic box [-L, L)^d with N samples per
// axis. Test fields are rapidly decaying bumps with negligible mass near the
// boundary; a periodization monitor attaches a warning when more than a 1e-6
// fraction of the field's energy sits in the outer 10% shell. The discrete
// norms fix one representative of an equivalence class of norms, so every
// quantitative claim made with them is a ratio or slope claim, never an
// absolute-value claim.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "criteria.hpp"
#include "dyadic.hpp"
#include "fft.hpp"
#include "weights.hpp"

namespace embedkit::oracle {

using fft::cplx;

// ---------------------------------------------------------------------------
// Grid and fields
// ---------------------------------------------------------------------------

struct Grid {
  int d = 1;        // dimension (1 or 2)
  double L = 8.0;   // half-width: the field lives on [-L, L)^d, periodic
  int N = 1 << 14;  // samples per axis, power of two

  void validate() const {
    if (d != 1 && d != 2) throw UnsupportedQuery("Grid: only d = 1 and d = 2 are supported");
    if (!(L > 0.0) || !std::isfinite(L)) throw InvalidSpec("Grid: L must be positive and finite");
    if (N < 2 || (N & (N - 1)) != 0) throw InvalidSpec("Grid: N must be a power of two >= 2");
  }

  // Default resolutions: generous in 1d, memory-conscious in 2d.
  static Grid standard(int d) {
    if (d == 1) return Grid{1, 8.0, 1 << 14};
    if (d == 2) return Grid{2, 8.0, 1 << 10};
    throw UnsupportedQuery("Grid: only d = 1 and d = 2 are supported");
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int i = 0; i < d; ++i) s *= static_cast<std::size_t>(N);
    return s;
  }

  double dx() const { return 2.0 * L / N; }
  double cell_volume() const { return std::pow(dx(), d); }

  // Node coordinate along one axis: x_i = -L + 2L i / N.
  double coord(int i) const { return -L + dx() * i; }

  // DFT bins wrap: bin k carries the signed integer frequency index
  // j in {-N/2 .. N/2-1}, and the physical frequency xi_j = (pi/L) j.
  int signed_index(int k) const { return k < N / 2 ? k : k - N; }
  double freq1(int k) const { return (M_PI / L) * signed_index(k); }
  double nyquist() const { return M_PI * N / (2.0 * L); }

  void node(std::size_t flat, double* x) const {
    if (d == 1) {
      x[0] = coord(static_cast<int>(flat));
    } else {
      x[0] = coord(static_cast<int>(flat / static_cast<std::size_t>(N)));
      x[1] = coord(static_cast<int>(flat % static_cast<std::size_t>(N)));
    }
  }

  void freq(std::size_t flat, double* xi) const {
    if (d == 1) {
      xi[0] = freq1(static_cast<int>(flat));
    } else {
      xi[0] = freq1(static_cast<int>(flat / static_cast<std::size_t>(N)));
      xi[1] = freq1(static_cast<int>(flat % static_cast<std::size_t>(N)));
    }
  }

  double freq_abs(std::size_t flat) const {
    double xi[2];
    freq(flat, xi);
    return d == 1 ? std::abs(xi[0]) : std::sqrt(xi[0] * xi[0] + xi[1] * xi[1]);
  }

  bool operator==(const Grid& o) const { return d == o.d && L == o.L && N == o.N; }
};

struct GridField {
  Grid grid;
  std::vector<cplx> values;  // row-major samples

  static GridField zeros(const Grid& g) {
    g.validate();
    return GridField{g, std::vector<cplx>(g.size())};
  }

  void validate() const {
    grid.validate();
    if (values.size() != grid.size())
      throw InvalidSpec("GridField: sample count does not match the grid");
    for (const cplx& v : values)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw InvalidSpec("GridField: samples must be finite");
  }
};

// ---------------------------------------------------------------------------
// Generator profile and Littlewood-Paley symbols
// ---------------------------------------------------------------------------

// Radial generator symbol: 1 on the unit ball, 0 outside radius 3/2, joined
// by the exponential smoothstep h(t) = e(1-t) / (e(1-t) + e(t)) with
// e(t) = exp(-1/t) extended by 0 — smooth, monotone, and flat at both ends.
struct GeneratorProfile {
  static double ramp(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

  double operator()(double r) const {
    const double t = 2.0 * (r - 1.0);  // [1, 3/2] -> [0, 1]
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    const double a = ramp(1.0 - t);
    const double b = ramp(t);
    return a / (a + b);
  }
};

// Largest level K such that the outermost symbol support (3/2) 2^K still
// fits under the grid's Nyquist frequency pi N / (2L).
inline int max_lp_level(const Grid& g) {
  g.validate();
  const double nyq = g.nyquist();
  if (3.0 > nyq)
    throw ResolutionTooLow("grid resolves frequencies only up to " + std::to_string(nyq) +
                           "; even level 1 needs 3");
  int K = 1;
  while (1.5 * std::exp2(static_cast<double>(K + 1)) <= nyq) ++K;
  return K;
}

inline void require_lp_level(const Grid& g, int K) {
  if (K < 1) throw InvalidSpec("littlewood-paley symbols: K must be >= 1");
  const double need = 1.5 * std::exp2(static_cast<double>(K));
  const double nyq = g.nyquist();
  if (need > nyq)
    throw ResolutionTooLow("level " + std::to_string(K) + " needs frequencies up to " +
                           std::to_string(need) + " but the grid resolves only up to " +
                           std::to_string(nyq));
}

// Symbol of block k at radius r = |xi|:
//   k = 0: the generator itself;
//   k >= 1: phi_hat(2^{-k} xi) - phi_hat(2^{-k+1} xi), supported on the
//           annulus 2^{k-1} <= |xi| <= 3 * 2^{k-1}.
// Summing blocks 0..K telescopes to phi_hat(2^{-K} xi).
inline double lp_symbol(const GeneratorProfile& prof, int k, double r) {
  if (k < 0) throw InvalidSpec("lp_symbol: block index must be nonnegative");
  if (k == 0) return prof(r);
  return prof(std::ldexp(r, -k)) - prof(std::ldexp(r, -k + 1));
}

// All symbols k = 0..K sampled on the grid's frequency lattice.
inline std::vector<std::vector<double>> build_lp_symbols(const GeneratorProfile& prof, int K,
                                                         const Grid& g) {
  require_lp_level(g, K);
  const std::size_t n = g.size();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(K) + 1);
  for (auto& s : out) s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.freq_abs(i);
    for (int k = 0; k <= K; ++k) out[static_cast<std::size_t>(k)][i] = lp_symbol(prof, k, r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transforms and multipliers
// ---------------------------------------------------------------------------

inline std::vector<cplx> forward_spectrum(const GridField& f) {
  std::vector<cplx> spec = f.values;
  fft::transform_nd(spec, f.grid.d, static_cast<std::size_t>(f.grid.N), false);
  return spec;
}

inline GridField from_spectrum(const Grid& g, std::vector<cplx> spec) {
  fft::transform_nd(spec, g.d, static_cast<std::size_t>(g.N), true);
  return GridField{g, std::move(spec)};
}

// Samples of x -> sum_j c_j exp(i xi_j . x) at the grid nodes. The nodes
// start at -L, not 0, so each coefficient picks up the corner phase
// exp(-i xi_j L) = (-1)^j per axis before the inverse transform.
inline GridField field_from_coefficients(const Grid& g, std::vector<cplx> coeffs) {
  if (coeffs.size() != g.size())
    throw InvalidSpec("field_from_coefficients: coefficient count does not match the grid");
  const std::size_t N = static_cast<std::size_t>(g.N);
  const double total = static_cast<double>(g.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    std::size_t parity = 0;
    if (g.d == 1) {
      parity = i & 1;
    } else {
      parity = (i / N + i % N) & 1;
    }
    coeffs[i] *= parity ? -total : total;
  }
  return from_spectrum(g, std::move(coeffs));
}

// (1 - Laplacian)^{-s/2}: multiply the spectrum by (1 + |xi|^2)^{-s/2}.
// s = 0 returns the input unchanged (identity, exactly). Negative s sharpens.
inline GridField bessel_potential(const GridField& f, double s) {
  f.validate();
  if (s == 0.0) return f;
  std::vector<cplx> spec = forward_spectrum(f);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double r = f.grid.freq_abs(i);
    spec[i] *= std::pow(1.0 + r * r, -0.5 * s);
  }
  return from_spectrum(f.grid, std::move(spec));
}

// Blocks phi_k * f for k = 0..K, each computed as inverse transform of the
// symbol-multiplied spectrum.
inline std::vector<GridField> lp_blocks(const GridField& f, int K,
                                        const GeneratorProfile& prof = {}) {
  f.validate();
  require_lp_level(f.grid, K);
  const std::vector<cplx> fhat = forward_spectrum(f);
  const std::size_t n = f.grid.size();
  std::vector<GridField> out;
  out.reserve(static_cast<std::size_t>(K) + 1);
  std::vector<cplx> spec(n);
  for (int k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < n; ++i) spec[i] = fhat[i] * lp_symbol(prof, k, f.grid.freq_abs(i));
    out.push_back(from_spectrum(f.grid, spec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weighted Lebesgue norms on the grid
// ---------------------------------------------------------------------------

// Weight samples at the grid nodes. Nodes on the singular set (and nodes
// where pointwise evaluation blows up) get the cell-averaged weight: the
// measure of the centered grid cell divided by the cell volume.
inline std::vector<double> weight_node_values(const Grid& g, const weights::Weight& w,
                                              const quad::Options& qopt = {}) {
  g.validate();
  if (w.dim() != g.d) throw InvalidSpec("weighted norm: weight dimension mismatch");
  const std::size_t n = g.size();
  std::vector<double> out(n);
  const double half = 0.5 * g.dx();
  double x[2];
  for (std::size_t i = 0; i < n; ++i) {
    g.node(i, x);
    std::span<const double> pt(x, static_cast<std::size_t>(g.d));
    double v = 0.0;
    bool averaged = w.on_singular_locus(pt, 1e-12);
    if (!averaged) {
      try {
        v = w(pt);
        if (!std::isfinite(v)) averaged = true;
      } catch (const SingularPoint&) {
        averaged = true;
      }
    }
    if (averaged) {
      std::vector<double> lo(pt.begin(), pt.end()), hi(pt.begin(), pt.end());
      for (int a = 0; a < g.d; ++a) {
        lo[static_cast<std::size_t>(a)] -= half;
        hi[static_cast<std::size_t>(a)] += half;
      }
      Box cell(std::move(lo), std::move(hi));
      v = weights::cube_measure(w, cell, qopt).value / g.cell_volume();
    }
    out[i] = v;
  }
  return out;
}

namespace detail {

inline double weighted_lp(std::span<const cplx> vals, double p, std::span<const double> wv,
                          double cell_volume) {
  NeumaierSum s;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double a = std::abs(vals[i]);
    if (a != 0.0) s.add(std::pow(a, p) * wv[i]);
  }
  return std::pow(s.value() * cell_volume, 1.0 / p);
}

inline double weighted_lp(std::span<const double> vals, double p, std::span<const double> wv,
                          double cell_volume) {
  NeumaierSum s;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i] != 0.0) s.add(std::pow(vals[i], p) * wv[i]);
  }
  return std::pow(s.value() * cell_volume, 1.0 / p);
}

}  // namespace detail

// Riemann-sum L^p(w) norm: (sum |f(x_i)|^p w(x_i) dx^d)^{1/p}, with
// cell-averaged weights at singular nodes. p may lie anywhere in (0, inf);
// below 1 this is the usual quasi-norm.
inline double weighted_lp_norm(const GridField& f, double p, const weights::Weight& w,
                               const quad::Options& qopt = {}) {
  f.validate();
  if (!(p > 0.0) || std::isinf(p)) throw InvalidSpec("weighted_lp_norm: p must lie in (0, inf)");
  const std::vector<double> wv = weight_node_values(f.grid, w, qopt);
  return detail::weighted_lp(std::span<const cplx>(f.values), p, wv, f.grid.cell_volume());
}

// Fraction of the field's energy (|f|^2) carried by nodes in the outer 10%
// shell of the box. Large values mean the periodic model is leaking.
inline double periodization_leak(const GridField& f) {
  const Grid& g = f.grid;
  double total = 0.0, shell = 0.0;
  double x[2];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double e = std::norm(f.values[i]);
    if (e == 0.0) continue;
    total += e;
    g.node(i, x);
    double m = std::abs(x[0]);
    if (g.d == 2) m = std::max(m, std::abs(x[1]));
    if (m >= 0.9 * g.L) shell += e;
  }
  return total > 0.0 ? shell / total : 0.0;
}

// ---------------------------------------------------------------------------
// Littlewood-Paley norms
// ---------------------------------------------------------------------------

struct NormResult {
  double value = 0.0;
  int K = 0;                   // highest block level used
  double tail_estimate = 0.0;  // log2 slope of the last block contributions
  std::vector<std::string> warnings;
};

namespace detail {

// l^q of a nonnegative sequence; q = inf takes the max (quasi-norm for q<1).
inline double sequence_lq(std::span<const double> a, double q) {
  if (std::isinf(q)) {
    double m = 0.0;
    for (double v : a) m = std::max(m, v);
    return m;
  }
  NeumaierSum s;
  for (double v : a) {
    if (v > 0.0) s.add(std::pow(v, q));
  }
  return std::pow(s.value(), 1.0 / q);
}

inline void attach_diagnostics(NormResult& r, std::span<const double> contrib,
                               const GridField& f) {
  const int K = r.K;
  // Blocks whose contribution sits within roundoff of zero say nothing about
  // the tail; judge decay only over blocks above a floor relative to the
  // peak contribution.
  double cmax = 0.0;
  for (double c : contrib) cmax = std::max(cmax, c);
  const double floor = 1e-12 * cmax;
  int last = -1;
  for (int k = K; k >= 0; --k) {
    if (contrib[static_cast<std::size_t>(k)] > floor) {
      last = k;
      break;
    }
  }
  // Tail slope over the last three significant levels.
  std::vector<double> xs, ys;
  for (int k = std::max(0, last - 2); k <= last; ++k) {
    const double c = contrib[static_cast<std::size_t>(k)];
    if (c > floor) {
      xs.push_back(static_cast<double>(k));
      ys.push_back(c);
    }
  }
  if (xs.size() >= 3) {
    try {
      r.tail_estimate = dyadic::fit_log_slope(xs, ys).slope;
    } catch (const Error&) {
      r.tail_estimate = 0.0;
    }
  }
  if (last == K && K >= 1 &&
      contrib[static_cast<std::size_t>(K)] > contrib[static_cast<std::size_t>(K - 1)])
    r.warnings.push_back("tail_not_decaying: block contributions still grow at the last level");
  const double leak = periodization_leak(f);
  if (leak > 1e-6)
    r.warnings.push_back("periodization: " + std::to_string(leak) +
                         " of the field's energy sits in the outer 10% shell");
}

inline void check_lp_exponents(double p, double q) {
  if (!(p > 0.0) || std::isinf(p))
    throw InvalidSpec("littlewood-paley norm: p must lie in (0, inf)");
  if (!(q > 0.0)) throw InvalidSpec("littlewood-paley norm: q must lie in (0, inf]");
}

}  // namespace detail

// Besov norm: l^q over k of the weighted L^p norms of 2^{sk} (phi_k * f).
inline NormResult besov_norm(const GridField& f, double s, double p, double q,
                             const weights::Weight& w, int K = -1,
                             const GeneratorProfile& prof = {}, const quad::Options& qopt = {}) {
  f.validate();
  detail::check_lp_exponents(p, q);
  if (K < 0) K = max_lp_level(f.grid);
  require_lp_level(f.grid, K);
  const std::vector<double> wv = weight_node_values(f.grid, w, qopt);
  const std::vector<cplx> fhat = forward_spectrum(f);
  const std::size_t n = f.grid.size();
  const double cellvol = f.grid.cell_volume();

  std::vector<double> contrib(static_cast<std::size_t>(K) + 1);
  std::vector<cplx> spec(n);
  for (int k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < n; ++i) spec[i] = fhat[i] * lp_symbol(prof, k, f.grid.freq_abs(i));
    GridField blk = from_spectrum(f.grid, spec);
    contrib[static_cast<std::size_t>(k)] =
        std::exp2(s * k) * detail::weighted_lp(std::span<const cplx>(blk.values), p, wv, cellvol);
  }

  NormResult r;
  r.K = K;
  r.value = detail::sequence_lq(contrib, q);
  detail::attach_diagnostics(r, contrib, f);
  return r;
}

// Triebel-Lizorkin norm: weighted L^p of the pointwise l^q over k of
// 2^{sk} |phi_k * f|. q = inf takes the pointwise sup over blocks.
inline NormResult triebel_norm(const GridField& f, double s, double p, double q,
                               const weights::Weight& w, int K = -1,
                               const GeneratorProfile& prof = {}, const quad::Options& qopt = {}) {
  f.validate();
  detail::check_lp_exponents(p, q);
  if (K < 0) K = max_lp_level(f.grid);
  require_lp_level(f.grid, K);
  const std::vector<double> wv = weight_node_values(f.grid, w, qopt);
  const std::vector<cplx> fhat = forward_spectrum(f);
  const std::size_t n = f.grid.size();
  const double cellvol = f.grid.cell_volume();

  std::vector<double> acc(n, 0.0);  // running sum of (2^{sk}|block|)^q, or max for q = inf
  std::vector<double> contrib(static_cast<std::size_t>(K) + 1);
  std::vector<cplx> spec(n);
  const bool qinf = std::isinf(q);
  for (int k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < n; ++i) spec[i] = fhat[i] * lp_symbol(prof, k, f.grid.freq_abs(i));
    GridField blk = from_spectrum(f.grid, spec);
    const double scale = std::exp2(s * k);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = scale * std::abs(blk.values[i]);
      if (qinf)
        acc[i] = std::max(acc[i], a);
      else if (a != 0.0)
        acc[i] += std::pow(a, q);
    }
    contrib[static_cast<std::size_t>(k)] =
        scale * detail::weighted_lp(std::span<const cplx>(blk.values), p, wv, cellvol);
  }
  if (!qinf) {
    const double invq = 1.0 / q;
    for (double& v : acc) v = v > 0.0 ? std::pow(v, invq) : 0.0;
  }

  NormResult r;
  r.K = K;
  r.value = detail::weighted_lp(std::span<const double>(acc), p, wv, cellvol);
  detail::attach_diagnostics(r, contrib, f);
  return r;
}

// Bessel-potential norm: L^p(w) of (1 - Laplacian)^{s/2} f.
inline NormResult h_norm(const GridField& f, double s, double p, const weights::Weight& w,
                         const quad::Options& qopt = {}) {
  f.validate();
  if (!(p > 1.0) || std::isinf(p)) throw InvalidSpec("h_norm: requires 1 < p < inf");
  const GridField lifted = bessel_potential(f, -s);
  NormResult r;
  r.value = weighted_lp_norm(lifted, p, w, qopt);
  const double leak = periodization_leak(f);
  if (leak > 1e-6)
    r.warnings.push_back("periodization: " + std::to_string(leak) +
                         " of the field's energy sits in the outer 10% shell");
  return r;
}

// Sobolev norm. Integer s = m sums the L^p(w) norms of all spectral
// derivatives D^alpha f with |alpha| <= m; non-integer s is the
// Sobolev-Slobodetskii scale, which delegates to the Besov norm with q = p.
inline NormResult w_norm(const GridField& f, double s, double p, const weights::Weight& w,
                         const quad::Options& qopt = {}) {
  f.validate();
  if (!(p > 1.0) || std::isinf(p)) throw InvalidSpec("w_norm: requires 1 < p < inf");
  if (s < 0.0) throw InvalidSpec("w_norm: smoothness must be nonnegative");
  if (s != std::floor(s)) return besov_norm(f, s, p, p, w, -1, GeneratorProfile{}, qopt);

  const int m = static_cast<int>(s);
  const Grid& g = f.grid;
  const std::vector<double> wv = weight_node_values(g, w, qopt);
  const std::vector<cplx> fhat = forward_spectrum(f);
  const std::size_t n = g.size();
  const double cellvol = g.cell_volume();

  // Multi-indices alpha with |alpha| <= m (d <= 2).
  std::vector<std::vector<int>> alphas;
  if (g.d == 1) {
    for (int a = 0; a <= m; ++a) alphas.push_back({a});
  } else {
    for (int a = 0; a <= m; ++a)
      for (int b = 0; a + b <= m; ++b) alphas.push_back({a, b});
  }

  NeumaierSum total;
  std::vector<cplx> spec(n);
  double xi[2];
  for (const auto& alpha : alphas) {
    for (std::size_t i = 0; i < n; ++i) {
      g.freq(i, xi);
      cplx factor(1.0, 0.0);
      for (int axis = 0; axis < g.d; ++axis)
        for (int rep = 0; rep < alpha[static_cast<std::size_t>(axis)]; ++rep)
          factor *= cplx(0.0, xi[axis]);
      spec[i] = fhat[i] * factor;
    }
    GridField deriv = from_spectrum(g, spec);
    total.add(detail::weighted_lp(std::span<const cplx>(deriv.values), p, wv, cellvol));
  }

  NormResult r;
  r.value = total.value();
  const double leak = periodization_leak(f);
  if (leak > 1e-6)
    r.warnings.push_back("periodization: " + std::to_string(leak) +
                         " of the field's energy sits in the outer 10% shell");
  return r;
}

// Norm of f in the given space (dispatches on the scale).
inline NormResult space_norm(const GridField& f, const criteria::SpaceSpec& sp, int K = -1,
                             const GeneratorProfile& prof = {}, const quad::Options& qopt = {}) {
  switch (sp.scale) {
    case criteria::Scale::Besov:
      return besov_norm(f, sp.s, sp.p, sp.q, sp.weight, K, prof, qopt);
    case criteria::Scale::TriebelLizorkin:
      return triebel_norm(f, sp.s, sp.p, sp.q, sp.weight, K, prof, qopt);
    case criteria::Scale::BesselPotential:
      return h_norm(f, sp.s, sp.p, sp.weight, qopt);
    case criteria::Scale::SobolevSlobodetskii:
      return w_norm(f, sp.s, sp.p, sp.weight, qopt);
  }
  throw UnsupportedQuery("space_norm: unknown scale");
}

// ---------------------------------------------------------------------------
// Synthetic fields
// ---------------------------------------------------------------------------

// Pure exponential exp(i xi_j . x) at the integer frequency index j
// (per-axis, each in [-N/2, N/2)), sampled exactly.
inline GridField make_tone(const Grid& g, std::span<const int> j, cplx amplitude = cplx(1.0)) {
  g.validate();
  if (static_cast<int>(j.size()) != g.d) throw InvalidSpec("make_tone: index dimension mismatch");
  for (int ji : j)
    if (ji < -g.N / 2 || ji >= g.N / 2)
      throw InvalidSpec("make_tone: frequency index outside [-N/2, N/2)");
  GridField f = GridField::zeros(g);
  double x[2];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    g.node(i, x);
    double phase = 0.0;
    for (int a = 0; a < g.d; ++a) phase += (M_PI / g.L) * j[static_cast<std::size_t>(a)] * x[a];
    f.values[i] = amplitude * std::polar(1.0, phase);
  }
  return f;
}

inline GridField make_gaussian(const Grid& g, std::span<const double> center, double sigma,
                               cplx amplitude = cplx(1.0)) {
  g.validate();
  if (static_cast<int>(center.size()) != g.d)
    throw InvalidSpec("make_gaussian: center dimension mismatch");
  if (!(sigma > 0.0)) throw InvalidSpec("make_gaussian: sigma must be positive");
  GridField f = GridField::zeros(g);
  double x[2];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    g.node(i, x);
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) {
      const double dxa = x[a] - center[static_cast<std::size_t>(a)];
      r2 += dxa * dxa;
    }
    f.values[i] = amplitude * std::exp(-0.5 * r2 / (sigma * sigma));
  }
  return f;
}

// Smooth approximation of the indicator of `box`: product over axes of two
// smoothsteps rising/falling over `width`, each centered on a box face so
// the mass lost inside cancels the mass gained outside to first order.
inline GridField plateau_bump(const Grid& g, const Box& box, double width) {
  g.validate();
  if (box.dim() != g.d) throw InvalidSpec("plateau_bump: box dimension mismatch");
  if (!(width > 0.0)) throw InvalidSpec("plateau_bump: width must be positive");
  auto rise = [](double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = GeneratorProfile::ramp(t);
    const double b = GeneratorProfile::ramp(1.0 - t);
    return a / (a + b);
  };
  GridField f = GridField::zeros(g);
  double x[2];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    g.node(i, x);
    double v = 1.0;
    for (int a = 0; a < g.d; ++a) {
      v *= rise((x[a] - box.lo[static_cast<std::size_t>(a)]) / width + 0.5) *
           rise((box.hi[static_cast<std::size_t>(a)] - x[a]) / width + 0.5);
      if (v == 0.0) break;
    }
    f.values[i] = v;
  }
  return f;
}

// Frequency-localized witness atom psi_nu(x - 2^{-nu} m): a smooth radial
// spectral bump supported in the annulus [3/2, 2] * 2^nu for nu >= 1 (the
// region where exactly one block symbol equals 1), or in the unit ball for
// nu = 0, translated to the dyadic lattice point 2^{-nu} m and peak-
// normalized so max |psi| = 1 on the grid.
inline GridField make_atom(const Grid& g, int nu, std::span<const int> m,
                           const GeneratorProfile& prof = {}) {
  (void)prof;  // the atom bump is fixed; the profile parameter keeps call sites uniform
  g.validate();
  if (nu < 0) throw InvalidSpec("make_atom: level must be nonnegative");
  if (static_cast<int>(m.size()) != g.d) throw InvalidSpec("make_atom: center dimension mismatch");
  if (3.0 * std::exp2(static_cast<double>(nu)) > g.nyquist())
    throw ResolutionTooLow("atom at level " + std::to_string(nu) +
                           " needs frequencies up to " +
                           std::to_string(3.0 * std::exp2(static_cast<double>(nu))) +
                           " but the grid resolves only up to " + std::to_string(g.nyquist()));
  double c[2] = {0.0, 0.0};
  double cnorm2 = 0.0;
  for (int a = 0; a < g.d; ++a) {
    c[a] = std::ldexp(static_cast<double>(m[static_cast<std::size_t>(a)]), -nu);
    cnorm2 += c[a] * c[a];
  }
  if (std::sqrt(cnorm2) > 0.5 * g.L)
    throw AtomOutsideDomain("atom center at distance " + std::to_string(std::sqrt(cnorm2)) +
                            " exceeds half the domain half-width " + std::to_string(0.5 * g.L));

  // Interior C-infinity bump on (0,1), peaking at 1/2 with value 1.
  auto bump01 = [](double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return std::exp(4.0 - 1.0 / (u * (1.0 - u)));
  };
  auto taper = [](double r) {  // 1 at r=0, 0 at r>=1, smooth
    if (r <= 0.0) return 1.0;
    if (r >= 1.0) return 0.0;
    const double a = GeneratorProfile::ramp(1.0 - r);
    const double b = GeneratorProfile::ramp(r);
    return a / (a + b);
  };

  const double base = std::exp2(static_cast<double>(nu));
  std::vector<cplx> spec(g.size());
  double xi[2];
  for (std::size_t i = 0; i < spec.size(); ++i) {
    g.freq(i, xi);
    const double r = g.d == 1 ? std::abs(xi[0]) : std::sqrt(xi[0] * xi[0] + xi[1] * xi[1]);
    double amp;
    if (nu == 0) {
      amp = taper(r);
    } else {
      amp = bump01((r - 1.5 * base) / (0.5 * base));
    }
    if (amp == 0.0) {
      spec[i] = cplx(0.0);
      continue;
    }
    double phase = 0.0;
    for (int a = 0; a < g.d; ++a) phase += xi[a] * c[a];
    spec[i] = amp * std::polar(1.0, -phase);
  }
  GridField f = field_from_coefficients(g, std::move(spec));
  double peak = 0.0;
  for (const cplx& v : f.values) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw ResolutionTooLow("atom spectrum vanished on this grid");
  const double inv = 1.0 / peak;
  for (cplx& v : f.values) v *= inv;
  return f;
}

// ---------------------------------------------------------------------------
// Random band-limited fields
// ---------------------------------------------------------------------------

struct RandomFieldOptions {
  double band = 8.0;      // frequency radius carrying random energy
  double envelope = 0.0;  // spatial Gaussian envelope sigma (0 -> L/5)
};

namespace detail {

// Gaussian deviates via explicit Box-Muller on canonical doubles: every step
// is pinned by the standard, so a seed reproduces bit-identically everywhere.
struct GaussianSource {
  std::mt19937_64 eng;
  bool have_spare = false;
  double spare = 0.0;

  explicit GaussianSource(std::uint64_t seed) : eng(seed) {}

  double canonical() {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;  // [0, 1)
  }

  double operator()() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    double u1 = canonical();
    while (u1 == 0.0) u1 = canonical();
    const double u2 = canonical();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * M_PI * u2);
    have_spare = true;
    return r * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace detail

// Random band-limited bump: Gaussian spectral coefficients on |xi| <= band
// (damped toward the band edge), localized in space by a Gaussian envelope
// so the periodization leak stays negligible, peak-normalized to 1.
inline GridField random_bandlimited(const Grid& g, std::uint64_t seed,
                                    const RandomFieldOptions& opt = {}) {
  g.validate();
  if (!(opt.band > 0.0)) throw InvalidSpec("random_bandlimited: band must be positive");
  detail::GaussianSource gauss(seed);
  std::vector<cplx> spec(g.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double r = g.freq_abs(i);
    if (r > opt.band) continue;
    const double damp = std::exp(-(r / opt.band) * (r / opt.band));
    spec[i] = cplx(gauss(), gauss()) * damp;
  }
  GridField f = field_from_coefficients(g, std::move(spec));
  const double sigma = opt.envelope > 0.0 ? opt.envelope : g.L / 5.0;
  double x[2];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    g.node(i, x);
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) r2 += x[a] * x[a];
    f.values[i] *= std::exp(-0.5 * r2 / (sigma * sigma));
  }
  double peak = 0.0;
  for (const cplx& v : f.values) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double inv = 1.0 / peak;
    for (cplx& v : f.values) v *= inv;
  }
  return f;
}

// Member `index` of the family grown from `seed`. Seeds are derived per
// index, so extending the family never changes earlier members.
inline GridField family_field(const Grid& g, std::uint64_t seed, int index,
                              const RandomFieldOptions& opt = {}) {
  if (index < 0) throw InvalidSpec("family_field: index must be nonnegative");
  const std::uint64_t derived =
      seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
  return random_bandlimited(g, derived, opt);
}

// ---------------------------------------------------------------------------
// Embedding ratio probe
// ---------------------------------------------------------------------------

enum class ProbeConclusion { ConsistentWithHolds, ConsistentWithFails };

inline const char* to_string(ProbeConclusion c) {
  return c == ProbeConclusion::ConsistentWithHolds ? "consistent_with_holds"
                                                   : "consistent_with_fails";
}

struct ProbeSample {
  int nu = 0;
  std::vector<std::int64_t> m;
  double source_norm = 0.0;
  double target_norm = 0.0;
  double ratio = 0.0;
  double term = 0.0;  // analytic cube-criterion term on the matching cube
};

struct ProbeLine {
  std::string name;
  std::vector<ProbeSample> samples;
  dyadic::SlopeFit measured;  // log2 ratio vs nu
  dyadic::SlopeFit analytic;  // log2 term vs nu
  double slope_gap = kNaN;
};

struct ProbeOptions {
  Grid grid;                     // grid.d == 0 selects the standard grid for the query
  int nu_min = 2;
  int nu_max = 6;
  double fixed_position = 0.75;  // physical center of the off-origin line (axis 0)
  double far_position = 0.0;     // 0 -> L/2, the farthest representable center
  double growth_threshold = 0.05;
  GeneratorProfile profile;
  quad::Options quad;

  ProbeOptions() { grid.d = 0; }
};

struct ProbeReport {
  Grid grid;
  double max_ratio = 0.0;
  std::vector<ProbeLine> lines;
  ProbeConclusion conclusion = ProbeConclusion::ConsistentWithHolds;
  std::vector<std::string> warnings;
};

// For each witness atom, the ratio target-norm / source-norm estimates the
// cube-criterion term on the matching dyadic cube. Three probe lines are
// walked over nu: atoms at the origin, at a fixed generic position, and at
// the far edge of the representable domain. Each measured log2-ratio slope
// is compared against the analytic slope of the cube term on the same cubes;
// a clearly positive measured slope on any line flags the query as
// ConsistentWithFails.
inline ProbeReport embedding_ratio_probe(const criteria::EmbeddingQuery& q,
                                         const ProbeOptions& opt = {}) {
  q.validate();
  const int d = q.dim();
  Grid g = opt.grid;
  if (g.d == 0) g = Grid::standard(d);
  g.validate();
  if (g.d != d) throw InvalidSpec("embedding_ratio_probe: grid dimension mismatch");
  if (opt.nu_min < 0 || opt.nu_max < opt.nu_min)
    throw InvalidSpec("embedding_ratio_probe: need 0 <= nu_min <= nu_max");

  const double far_pos = opt.far_position > 0.0 ? opt.far_position : 0.5 * g.L;
  struct LineSpec {
    std::string name;
    double position;  // physical center along axis 0
  };
  const LineSpec line_specs[3] = {
      {"origin", 0.0}, {"fixed_position", opt.fixed_position}, {"far", far_pos}};

  ProbeReport rep;
  rep.grid = g;
  double max_measured_slope = -kInf;

  for (const LineSpec& ls : line_specs) {
    ProbeLine line;
    line.name = ls.name;
    for (int nu = opt.nu_min; nu <= opt.nu_max; ++nu) {
      ProbeSample smp;
      smp.nu = nu;
      smp.m.assign(static_cast<std::size_t>(d), 0);
      smp.m[0] = std::llround(ls.position * std::exp2(static_cast<double>(nu)));
      std::vector<int> mi(smp.m.begin(), smp.m.end());
      GridField atom = make_atom(g, nu, mi, opt.profile);
      NormResult src = space_norm(atom, q.source, -1, opt.profile, opt.quad);
      NormResult tgt = space_norm(atom, q.target, -1, opt.profile, opt.quad);
      for (const auto& wmsg : src.warnings) rep.warnings.push_back(ls.name + "/source: " + wmsg);
      for (const auto& wmsg : tgt.warnings) rep.warnings.push_back(ls.name + "/target: " + wmsg);
      smp.source_norm = src.value;
      smp.target_norm = tgt.value;
      if (!(src.value > 0.0)) {
        rep.warnings.push_back(ls.name + ": source norm vanished at level " + std::to_string(nu));
        continue;
      }
      smp.ratio = tgt.value / src.value;
      dyadic::Cube cube{nu, smp.m};
      smp.term = criteria::condition_c_term(q, cube, opt.quad);
      line.samples.push_back(std::move(smp));
      rep.max_ratio = std::max(rep.max_ratio, line.samples.back().ratio);
    }

    std::vector<double> nus, ratios, terms;
    for (const ProbeSample& smp : line.samples) {
      if (smp.ratio > 0.0 && std::isfinite(smp.ratio) && smp.term > 0.0 &&
          std::isfinite(smp.term)) {
        nus.push_back(static_cast<double>(smp.nu));
        ratios.push_back(smp.ratio);
        terms.push_back(smp.term);
      }
    }
    if (nus.size() >= 3) {
      line.measured = dyadic::fit_log_slope(nus, ratios);
      line.analytic = dyadic::fit_log_slope(nus, terms);
      line.slope_gap = std::abs(line.measured.slope - line.analytic.slope);
      max_measured_slope = std::max(max_measured_slope, line.measured.slope);
    } else {
      rep.warnings.push_back(ls.name + ": too few usable samples for a slope fit");
    }
    rep.lines.push_back(std::move(line));
  }

  rep.conclusion = max_measured_slope > opt.growth_threshold
                       ? ProbeConclusion::ConsistentWithFails
                       : ProbeConclusion::ConsistentWithHolds;
  return rep;
}

// ---------------------------------------------------------------------------
// Gagliardo-Nirenberg interpolation check
// ---------------------------------------------------------------------------

struct GnSpec {
  double theta = 0.5;
  double s0 = 1.0, p0 = 2.0, q0 = 2.0;
  weights::Weight w0 = weights::Weight::constant(1);
  double s1 = 0.0, p1 = 2.0, q1 = 2.0;
  weights::Weight w1 = weights::Weight::constant(1);
  int K = -1;
  GeneratorProfile profile;
  quad::Options quad;
};

struct GnInterpolated {
  double s = 0.0;
  double p = 2.0;
  double q = 2.0;
  weights::Weight w = weights::Weight::constant(1);
};

// Interpolated parameters: s is the affine mix, 1/p and 1/q mix
// harmonically, and the weight is w0^{(1-theta) p/p0} w1^{theta p/p1}.
inline GnInterpolated gn_interpolate(const GnSpec& spec) {
  if (!(spec.theta > 0.0 && spec.theta < 1.0))
    throw InvalidSpec("gn_check: theta must lie in (0, 1)");
  if (spec.w0.dim() != spec.w1.dim()) throw InvalidSpec("gn_check: weight dimension mismatch");
  const double th = spec.theta;
  GnInterpolated out;
  out.s = (1.0 - th) * spec.s0 + th * spec.s1;
  const double ip = (1.0 - th) * reciprocal(spec.p0) + th * reciprocal(spec.p1);
  out.p = ip > 0.0 ? 1.0 / ip : kInf;
  const double iq = (1.0 - th) * reciprocal(spec.q0) + th * reciprocal(spec.q1);
  out.q = iq > 0.0 ? 1.0 / iq : kInf;
  out.w = weights::power_product(spec.w0, (1.0 - th) * out.p / spec.p0, spec.w1,
                                 th * out.p / spec.p1);
  return out;
}

struct GnResult {
  double ratio = 0.0;
  double numerator = 0.0;
  double denominator0 = 0.0;
  double denominator1 = 0.0;
  double s = 0.0, p = 0.0, q = 0.0;  // interpolated exponents
};

// r(f) = |f|_{s,p,q,w} / (|f|_{s0,p0,q0,w0}^{1-theta} |f|_{s1,p1,q1,w1}^{theta})
// in the Triebel-Lizorkin scale at the interpolated parameters.
inline GnResult gn_check(const GridField& f, const GnSpec& spec) {
  const GnInterpolated mix = gn_interpolate(spec);
  GnResult r;
  r.s = mix.s;
  r.p = mix.p;
  r.q = mix.q;
  r.numerator = triebel_norm(f, mix.s, mix.p, mix.q, mix.w, spec.K, spec.profile, spec.quad).value;
  r.denominator0 =
      triebel_norm(f, spec.s0, spec.p0, spec.q0, spec.w0, spec.K, spec.profile, spec.quad).value;
  r.denominator1 =
      triebel_norm(f, spec.s1, spec.p1, spec.q1, spec.w1, spec.K, spec.profile, spec.quad).value;
  if (!(r.denominator0 > 0.0) || !(r.denominator1 > 0.0))
    throw DivisionByZero("gn_check: a denominator norm is zero (zero field?)");
  r.ratio =
      r.numerator / (std::pow(r.denominator0, 1.0 - spec.theta) * std::pow(r.denominator1, spec.theta));
  return r;
}

struct GnBatchReport {
  std::vector<GnResult> results;  // ordered by family index
  double max_ratio = 0.0;
  std::uint64_t seed = 0;
};

// Max over a seeded family of random band-limited fields. Fields are derived
// per index, so the first `count` members never change when `count` grows.
inline GnBatchReport gn_batch(const Grid& g, const GnSpec& spec, int count, std::uint64_t seed,
                              const RandomFieldOptions& fopt = {}) {
  if (count < 1) throw InvalidSpec("gn_batch: count must be positive");
  GnBatchReport rep;
  rep.seed = seed;
  rep.results.resize(static_cast<std::size_t>(count));
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    GridField f = family_field(g, seed, static_cast<int>(i), fopt);
    rep.results[i] = gn_check(f, spec);
  });
  for (const GnResult& r : rep.results) rep.max_ratio = std::max(rep.max_ratio, r.ratio);
  return rep;
}

// ---------------------------------------------------------------------------
// Field I/O
// ---------------------------------------------------------------------------

// Binary layout (native byte order):
//   char[8]  magic "EKFIELD1"
//   int32    d
//   int32    N
//   float64  L
//   int32    precision (64 -> pairs of float32, 128 -> pairs of float64)
//   payload  N^d complex values, row-major
inline void write_field(const std::string& path, const GridField& f,
                        bool single_precision = false) {
  f.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_field: cannot open " + path);
  const char magic[8] = {'E', 'K', 'F', 'I', 'E', 'L', 'D', '1'};
  out.write(magic, 8);
  const std::int32_t d = f.grid.d, N = f.grid.N;
  const std::int32_t prec = single_precision ? 64 : 128;
  const double L = f.grid.L;
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(&N), 4);
  out.write(reinterpret_cast<const char*>(&L), 8);
  out.write(reinterpret_cast<const char*>(&prec), 4);
  if (single_precision) {
    for (const cplx& v : f.values) {
      const float re = static_cast<float>(v.real()), im = static_cast<float>(v.imag());
      out.write(reinterpret_cast<const char*>(&re), 4);
      out.write(reinterpret_cast<const char*>(&im), 4);
    }
  } else {
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(cplx)));
  }
  if (!out) throw Error("write_field: write failed for " + path);
}

inline GridField read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_field: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "EKFIELD1", 8) != 0)
    throw Error("read_field: bad magic in " + path);
  std::int32_t d = 0, N = 0, prec = 0;
  double L = 0.0;
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&N), 4);
  in.read(reinterpret_cast<char*>(&L), 8);
  in.read(reinterpret_cast<char*>(&prec), 4);
  if (!in) throw Error("read_field: truncated header in " + path);
  GridField f;
  f.grid = Grid{static_cast<int>(d), L, static_cast<int>(N)};
  f.grid.validate();
  f.values.resize(f.grid.size());
  if (prec == 64) {
    for (cplx& v : f.values) {
      float re = 0.0f, im = 0.0f;
      in.read(reinterpret_cast<char*>(&re), 4);
      in.read(reinterpret_cast<char*>(&im), 4);
      v = cplx(re, im);
    }
  } else if (prec == 128) {
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(cplx)));
  } else {
    throw Error("read_field: unknown precision flag in " + path);
  }
  if (!in) throw Error("read_field: truncated payload in " + path);
  f.validate();
  return f;
}

}  // namespace embedkit::oracle

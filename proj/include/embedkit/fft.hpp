#pragma once

// Iterative radix-2 fast Fourier transforms for 1d and 2d arrays of
// power-of-two size, with per-thread twiddle caches. Conventions:
//
//   forward:  F[k] = sum_i f[i] * exp(-2*pi*I*i*k/N)
//   inverse:  f[i] = (1/N) * sum_k F[k] * exp(+2*pi*I*i*k/N)
//
// so inverse(forward(f)) == f up to roundoff. Twiddles are tabulated once
// per transform length with std::polar (no recurrence accumulation), keeping
// the roundtrip error at the 1e-15 level needed by the spectral identities
// the norm oracle asserts.

#include <complex>
#include <map>
#include <span>
#include <vector>

#include "common.hpp"

namespace embedkit::fft {

using cplx = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// e^{-2*pi*I*k/n} for k = 0..n/2-1, cached per thread so concurrent batch
// runs never share mutable state.
inline const std::vector<cplx>& twiddles(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<cplx>> cache;
  auto& t = cache[n];
  if (t.empty()) {
    t.resize(n / 2);
    const double step = -2.0 * M_PI / static_cast<double>(n);
    for (std::size_t k = 0; k < n / 2; ++k)
      t[k] = std::polar(1.0, step * static_cast<double>(k));
  }
  return t;
}

}  // namespace detail

// In-place transform of a power-of-two-length array.
inline void transform(std::span<cplx> a, bool inverse) {
  const std::size_t n = a.size();
  if (!detail::is_pow2(n)) throw InvalidSpec("fft: length must be a power of two");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const auto& tw = detail::twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx w = tw[k * stride];
        if (inverse) w = std::conj(w);
        cplx u = a[i + k];
        cplx v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }

  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= scale;
  }
}

// Transform along every axis of a row-major array with `rows` rows of
// `cols` entries each (rows == 1 gives the plain 1d transform). Columns are
// gathered into a scratch buffer so each 1d pass runs on contiguous data.
inline void transform_2d(std::span<cplx> a, std::size_t rows, std::size_t cols, bool inverse) {
  if (a.size() != rows * cols) throw InvalidSpec("fft: array size does not match rows*cols");
  for (std::size_t r = 0; r < rows; ++r) transform(a.subspan(r * cols, cols), inverse);
  if (rows == 1) return;
  std::vector<cplx> col(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) col[r] = a[r * cols + c];
    transform(col, inverse);
    for (std::size_t r = 0; r < rows; ++r) a[r * cols + c] = col[r];
  }
}

// d-dimensional transform (d = 1 or 2) of an N^d row-major array.
inline void transform_nd(std::span<cplx> a, int d, std::size_t n_per_axis, bool inverse) {
  if (d == 1) {
    if (a.size() != n_per_axis) throw InvalidSpec("fft: array size does not match N");
    transform(a, inverse);
  } else if (d == 2) {
    transform_2d(a, n_per_axis, n_per_axis, inverse);
  } else {
    throw UnsupportedQuery("fft: only 1d and 2d transforms are provided");
  }
}

}  // namespace embedkit::fft

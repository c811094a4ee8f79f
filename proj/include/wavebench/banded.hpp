#pragma once

// Symmetric positive definite banded matrices with an in-place LDL^T
// factorization. The smoother's KKT systems are pentadiagonal (half
// bandwidth 2), so factor and solve are O(n).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace wavebench::linalg {

template <std::size_t HalfBandwidth>
class BandedSymmetric {
 public:
  static constexpr std::size_t kBand = HalfBandwidth;

  BandedSymmetric() = default;
  explicit BandedSymmetric(std::size_t n) { Resize(n); }

  void Resize(std::size_t n) {
    n_ = n;
    for (auto& b : bands_) b.assign(n, 0.0);
  }

  void SetZero() {
    for (auto& b : bands_) std::fill(b.begin(), b.end(), 0.0);
  }

  std::size_t size() const { return n_; }

  /// Entry (i, i + d) for 0 <= d <= kBand.
  double& Band(std::size_t d, std::size_t i) { return bands_[d][i]; }
  double Band(std::size_t d, std::size_t i) const { return bands_[d][i]; }

  /// Adds v to (i, j) and, implicitly, (j, i). |i - j| must be within the band.
  void Add(std::size_t i, std::size_t j, double v) {
    if (i > j) std::swap(i, j);
    bands_[j - i][i] += v;
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return j - i <= kBand ? bands_[j - i][i] : 0.0;
  }

  void AddDiagonal(double v) {
    for (double& d : bands_[0]) d += v;
  }

  /// y = M x
  void Multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = bands_[0][i] * x[i];
      for (std::size_t d = 1; d <= kBand; ++d) {
        if (i + d < n_) acc += bands_[d][i] * x[i + d];
        if (i >= d) acc += bands_[d][i - d] * x[i - d];
      }
      y[i] = acc;
    }
  }

 private:
  std::size_t n_ = 0;
  std::array<std::vector<double>, kBand + 1> bands_;
};

/// LDL^T of a banded SPD matrix; L is unit lower banded.
template <std::size_t HalfBandwidth>
class BandedLdlt {
 public:
  /// Returns false when a pivot is not positive (matrix not SPD).
  bool Compute(const BandedSymmetric<HalfBandwidth>& m) {
    const std::size_t n = m.size();
    n_ = n;
    d_.assign(n, 0.0);
    for (auto& l : l_) l.assign(n, 0.0);
    constexpr std::size_t kB = HalfBandwidth;
    // l_[d][j] holds L(j + d, j).
    for (std::size_t j = 0; j < n; ++j) {
      double dj = m.Band(0, j);
      for (std::size_t k = 1; k <= kB && k <= j; ++k) {
        const double ljk = l_[k][j - k];
        dj -= ljk * ljk * d_[j - k];
      }
      if (!(dj > 0.0) || !std::isfinite(dj)) return false;
      d_[j] = dj;
      for (std::size_t d = 1; d <= kB && j + d < n; ++d) {
        const std::size_t i = j + d;
        double v = m.Band(d, j);
        // subtract sum_k L(i, k) D(k) L(j, k) over k < j within band of both
        for (std::size_t s = 1; s + d <= kB && s <= j; ++s) {
          const std::size_t k = j - s;
          v -= l_[d + s][k] * d_[k] * l_[s][k];
        }
        l_[d][j] = v / dj;
      }
    }
    return true;
  }

  /// Solves M x = b in place.
  void Solve(std::span<double> x) const {
    constexpr std::size_t kB = HalfBandwidth;
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = x[i];
      for (std::size_t d = 1; d <= kB && d <= i; ++d) acc -= l_[d][i - d] * x[i - d];
      x[i] = acc;
    }
    for (std::size_t i = 0; i < n_; ++i) x[i] /= d_[i];
    for (std::size_t i = n_; i-- > 0;) {
      double acc = x[i];
      for (std::size_t d = 1; d <= kB && i + d < n_; ++d) acc -= l_[d][i] * x[i + d];
      x[i] = acc;
    }
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
  std::array<std::vector<double>, HalfBandwidth + 1> l_;
};

}  // namespace wavebench::linalg

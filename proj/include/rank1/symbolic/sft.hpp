#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rank1/core/error.hpp"

namespace rank1::symbolic {

/// Subshift of finite type given by a square 0/1 transition matrix.
class Sft {
 public:
  Sft() = default;
  explicit Sft(std::vector<std::vector<int>> a) : a_(std::move(a)) {
    const std::size_t m = a_.size();
    if (m == 0) fail(ErrorCode::InvalidConfig, "transition matrix is empty");
    for (const auto& row : a_) {
      if (row.size() != m) fail(ErrorCode::InvalidConfig, "transition matrix must be square");
      for (int v : row)
        if (v != 0 && v != 1) fail(ErrorCode::InvalidConfig, "transition entries must be 0 or 1");
    }
  }

  static Sft full_shift(std::size_t m) { return Sft(std::vector<std::vector<int>>(m, std::vector<int>(m, 1))); }
  static Sft golden_mean() { return Sft({{1, 1}, {1, 0}}); }
  /// Single periodic orbit 0 -> 1 -> ... -> m-1 -> 0.
  static Sft cycle(std::size_t m) {
    std::vector<std::vector<int>> a(m, std::vector<int>(m, 0));
    for (std::size_t i = 0; i < m; ++i) a[i][(i + 1) % m] = 1;
    return Sft(std::move(a));
  }

  std::size_t size() const { return a_.size(); }
  bool edge(std::size_t i, std::size_t j) const { return a_[i][j] != 0; }
  const std::vector<std::vector<int>>& matrix() const { return a_; }

  /// Symbols that lie on a bi-infinite path: repeatedly drops symbols with
  /// no successor or no predecessor among those kept.
  std::vector<std::size_t> retained_symbols() const {
    const std::size_t m = size();
    std::vector<bool> keep(m, true);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < m; ++i) {
        if (!keep[i]) continue;
        bool out = false, in = false;
        for (std::size_t j = 0; j < m; ++j) {
          if (!keep[j]) continue;
          out = out || edge(i, j);
          in = in || edge(j, i);
        }
        if (!out || !in) {
          keep[i] = false;
          changed = true;
        }
      }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m; ++i)
      if (keep[i]) out.push_back(i);
    return out;
  }

  /// Strongly connected components that carry at least one cycle, each
  /// sorted, ordered by smallest symbol (Tarjan).
  std::vector<std::vector<std::size_t>> components() const {
    const std::size_t m = size();
    std::vector<int> index(m, -1), low(m, 0);
    std::vector<bool> on_stack(m, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> comps;
    int counter = 0;
    std::function<void(std::size_t)> visit = [&](std::size_t v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = true;
      for (std::size_t w = 0; w < m; ++w) {
        if (!edge(v, w)) continue;
        if (index[w] < 0) {
          visit(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      }
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        if (comp.size() > 1 || edge(comp[0], comp[0])) comps.push_back(std::move(comp));
      }
    };
    for (std::size_t v = 0; v < m; ++v)
      if (index[v] < 0) visit(v);
    std::sort(comps.begin(), comps.end());
    return comps;
  }

  bool strongly_connected() const {
    auto c = components();
    return c.size() == 1 && c[0].size() == size();
  }

  /// Sub-shift on the given symbols (in the given order).
  Sft restrict_to(const std::vector<std::size_t>& symbols) const {
    std::vector<std::vector<int>> a(symbols.size(), std::vector<int>(symbols.size(), 0));
    for (std::size_t i = 0; i < symbols.size(); ++i)
      for (std::size_t j = 0; j < symbols.size(); ++j) a[i][j] = a_[symbols[i]][symbols[j]];
    return Sft(std::move(a));
  }

  /// Same alphabet with one transition removed.
  Sft without_edge(std::size_t i, std::size_t j) const {
    auto a = a_;
    a[i][j] = 0;
    return Sft(std::move(a));
  }

 private:
  std::vector<std::vector<int>> a_;
};

struct PowerOptions {
  /// Stop once log(upper / lower) of the Collatz-Wielandt bounds is below this.
  double tol = 1e-12;
  std::size_t max_iter = 1'000'000;
};

struct DiscretePressure {
  double value = -std::numeric_limits<double>::infinity();
  /// Component attaining the maximum, as symbols of the input sft.
  std::vector<std::size_t> component;
  std::size_t component_count = 0;
  std::size_t iterations = 0;
};

namespace detail {

/// Osborne balancing: a diagonal similarity that equalizes off-diagonal row
/// and column sums. Keeps power iteration fast when weights span many
/// orders of magnitude.
inline void balance(std::vector<std::vector<double>>& M, int sweeps = 200) {
  const std::size_t n = M.size();
  for (int s = 0; s < sweeps; ++s) {
    bool done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        r += M[i][j];
        c += M[j][i];
      }
      if (r <= 0.0 || c <= 0.0) continue;
      const double f = std::sqrt(c / r);
      if (std::abs(std::log(f)) > 1e-3) done = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        M[i][j] *= f;
        M[j][i] /= f;
      }
    }
    if (done) break;
  }
}

/// log of the spectral radius of an irreducible nonnegative matrix M given
/// densely, via power iteration on M + sI (primitive for s > 0).
inline double log_spectral_radius(std::vector<std::vector<double>> M, const PowerOptions& opts,
                                  std::size_t& iterations) {
  balance(M);
  const std::size_t n = M.size();
  std::vector<double> x(n, 1.0), y(n);
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += M[i][j] * v[j];
      out[i] = s;
    }
  };
  apply(x, y);
  double shift = *std::min_element(y.begin(), y.end());
  if (!(shift > 0.0)) shift = 1e-300;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    apply(x, y);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = y[i] / x[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    iterations = it + 1;
    if (lo > 0.0 && std::log(hi / lo) <= opts.tol) return std::log(0.5 * (lo + hi));
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += shift * x[i];
      norm = std::max(norm, y[i]);
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = std::max(y[i] / norm, 1e-300);
  }
  fail(ErrorCode::ConvergenceFailure, "power iteration did not converge");
}

}  // namespace detail

/// Topological pressure of the locally constant potential `weights` (one
/// value per symbol, attached to the entered symbol): log of the leading
/// eigenvalue of A_ij exp(w_j). Reducible shifts take the maximum over
/// components carrying cycles.
inline DiscretePressure discrete_pressure_report(const Sft& sft, const std::vector<double>& weights,
                                                 const PowerOptions& opts = {}) {
  if (weights.size() != sft.size()) fail(ErrorCode::DomainError, "one weight per symbol required");
  for (double w : weights)
    if (!std::isfinite(w)) fail(ErrorCode::DomainError, "weights must be finite");
  DiscretePressure out;
  auto comps = sft.components();
  out.component_count = comps.size();
  for (const auto& comp : comps) {
    double wmax = -std::numeric_limits<double>::infinity();
    for (auto s : comp) wmax = std::max(wmax, weights[s]);
    std::vector<std::vector<double>> M(comp.size(), std::vector<double>(comp.size(), 0.0));
    for (std::size_t i = 0; i < comp.size(); ++i)
      for (std::size_t j = 0; j < comp.size(); ++j)
        if (sft.edge(comp[i], comp[j])) M[i][j] = std::exp(std::max(weights[comp[j]] - wmax, -600.0));
    std::size_t iters = 0;
    double p = detail::log_spectral_radius(M, opts, iters) + wmax;
    out.iterations += iters;
    if (p > out.value) {
      out.value = p;
      out.component = comp;
    }
  }
  return out;
}

inline double discrete_pressure(const Sft& sft, const std::vector<double>& weights,
                                const PowerOptions& opts = {}) {
  return discrete_pressure_report(sft, weights, opts).value;
}

}  // namespace rank1::symbolic

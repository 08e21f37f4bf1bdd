#pragma once

// Closed-form spectra of flat tori, antisymmetric spectra on the double and
// quadruple coverings, strip transition values, and nodal label fields of
// explicit trigonometric eigenfunctions.

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "torpart/common.hpp"
#include "torpart/grid.hpp"

namespace torpart {

struct Mode {
  int m = 0;
  int n = 0;
  bool operator==(const Mode&) const = default;
};

/// One distinct eigenvalue together with the real eigenfunctions behind it.
struct SpectralLine {
  double value = 0.0;
  int multiplicity = 0;
  std::vector<Mode> modes;
  std::vector<int> mode_multiplicity;  // real eigenfunctions contributed per mode
};

/// lambda_{m,n} = 4 pi^2 (m^2/a^2 + n^2/b^2).
inline double eigenvalue_mn(const TorusGeometry& geom, int m, int n) {
  if (m < 0 || n < 0) throw InvalidArgument("mode indices must be nonnegative");
  const double mx = static_cast<double>(m) / geom.a;
  const double ny = static_cast<double>(n) / geom.b;
  return 4.0 * kPi2 * (mx * mx + ny * ny);
}

/// Number of real eigenfunctions (cos/sin products) carried by mode (m,n), m,n >= 0.
inline int real_mode_multiplicity(int m, int n) {
  if (m == 0 && n == 0) return 1;
  if (m == 0 || n == 0) return 2;
  return 4;
}

inline bool same_eigenvalue(double x, double y) {
  return std::abs(x - y) <= 1e-12 * (1.0 + std::max(std::abs(x), std::abs(y)));
}

namespace detail {

struct WeightedMode {
  double value;
  Mode mode;
  int mult;
};

inline std::vector<SpectralLine> merge_lines(std::vector<WeightedMode> modes) {
  std::sort(modes.begin(), modes.end(), [](const WeightedMode& l, const WeightedMode& r) {
    if (l.value != r.value) return l.value < r.value;
    if (l.mode.m != r.mode.m) return l.mode.m < r.mode.m;
    return l.mode.n < r.mode.n;
  });
  std::vector<SpectralLine> lines;
  for (const auto& wm : modes) {
    if (lines.empty() || !same_eigenvalue(lines.back().value, wm.value)) {
      lines.push_back({wm.value, 0, {}, {}});
    }
    auto& line = lines.back();
    line.multiplicity += wm.mult;
    line.modes.push_back(wm.mode);
    line.mode_multiplicity.push_back(wm.mult);
  }
  return lines;
}

// Lattice enumeration below a growing cutoff until `count` complete lines exist.
template <class Value, class Mult>
std::vector<SpectralLine> first_lines(int count, double cutoff0, double m_scale, double n_scale,
                                      int m_start, int m_step, Value&& value, Mult&& mult) {
  if (count < 1) throw InvalidArgument("spectrum count must be >= 1");
  double cutoff = cutoff0;
  for (;;) {
    std::vector<WeightedMode> modes;
    const int m_max = static_cast<int>(std::ceil(std::sqrt(cutoff) * m_scale)) + 1;
    const int n_max = static_cast<int>(std::ceil(std::sqrt(cutoff) * n_scale)) + 1;
    for (int m = m_start; m <= m_max; m += m_step)
      for (int n = 0; n <= n_max; ++n) {
        const double v = value(m, n);
        if (v <= cutoff) modes.push_back({v, {m, n}, mult(m, n)});
      }
    auto lines = merge_lines(std::move(modes));
    // The last line may be missing modes that coincide just above the cutoff.
    if (static_cast<int>(lines.size()) > count) {
      lines.resize(count);
      return lines;
    }
    cutoff *= 2.0;
  }
}

}  // namespace detail

/// First `count` distinct eigenvalues of T(a,b) with real multiplicities.
inline std::vector<SpectralLine> sorted_spectrum(const TorusGeometry& geom, int count) {
  geom.validate();
  const double base = 4.0 * kPi2 * std::max(1.0 / (geom.a * geom.a), 1.0 / (geom.b * geom.b));
  return detail::first_lines(
      count, base * (count + 1), geom.a / (2.0 * kPi), geom.b / (2.0 * kPi), 0, 1,
      [&](int m, int n) { return eigenvalue_mn(geom, m, n); },
      [](int m, int n) { return real_mode_multiplicity(m, n); });
}

/// The covering on which antisymmetry under sigma(x,y) = (x+1 mod 2, y) is taken.
enum class Covering {
  kDouble,     // T(2, b)
  kQuadruple,  // T(2, 2b)
};

inline double covering_width(Covering c, double b) { return c == Covering::kDouble ? b : 2.0 * b; }

/// Antisymmetric spectrum on T(2, w): pi^2 m^2 + 4 pi^2 n^2 / w^2, m odd.
inline std::vector<SpectralLine> antisym_spectrum(Covering covering, double b, int count) {
  if (!(b > 0.0)) throw InvalidArgument("b must be positive");
  const double w = covering_width(covering, b);
  auto value = [w](int m, int n) {
    const double nw = static_cast<double>(n) / w;
    return kPi2 * m * m + 4.0 * kPi2 * nw * nw;
  };
  auto mult = [](int, int n) { return n == 0 ? 2 : 4; };
  const double base = kPi2 * std::max(1.0, 4.0 / (w * w));
  return detail::first_lines(count, base * (count + 1), 1.0 / kPi, w / (2.0 * kPi), 1, 2, value,
                             mult);
}

/// k-th eigenvalue (1-based, counted with multiplicity) of a line list.
inline double nth_eigenvalue(const std::vector<SpectralLine>& lines, int k) {
  if (k < 1) throw InvalidArgument("eigenvalue index must be >= 1");
  int seen = 0;
  for (const auto& line : lines) {
    seen += line.multiplicity;
    if (seen >= k) return line.value;
  }
  throw InvalidArgument("line list too short for requested eigenvalue index");
}

/// lambda_k^{sigma,a}: k-th antisymmetric eigenvalue counted with multiplicity.
inline double antisym_eigenvalue(Covering covering, double b, int k) {
  return nth_eigenvalue(antisym_spectrum(covering, b, k), k);
}

struct TransitionValues {
  int k = 0;
  std::optional<double> even_value;       // b_k = 2/k
  std::optional<double> conjectured_odd;  // 2/sqrt(k^2-1)
  double strip_lower = 0.0;               // 1/k
  double strip_upper = 0.0;               // 1/sqrt(k^2-1)
};

inline TransitionValues transition_values(int k) {
  if (k < 3) throw InvalidArgument("transition values are defined for k >= 3");
  TransitionValues t;
  t.k = k;
  const double root = std::sqrt(static_cast<double>(k) * k - 1.0);
  if (k % 2 == 0)
    t.even_value = 2.0 / k;
  else
    t.conjectured_odd = 2.0 / root;
  t.strip_lower = 1.0 / k;
  t.strip_upper = 1.0 / root;
  return t;
}

/// Energy of the k vertical strips of T(a,b): k^2 pi^2 / a^2.
inline double strip_partition_energy(int k, double a) {
  if (k < 1 || !(a > 0.0)) throw InvalidArgument("strip energy needs k >= 1 and a > 0");
  return static_cast<double>(k) * k * kPi2 / (a * a);
}

enum class Trig { kCos, kSin };

/// coefficient * fx(2 pi m x / a) * fy(2 pi n y / b)
struct TrigTerm {
  double coefficient = 1.0;
  Trig kind_x = Trig::kCos;
  int m = 0;
  Trig kind_y = Trig::kCos;
  int n = 0;
};

using TrigExpression = std::vector<TrigTerm>;

inline double evaluate(const TrigExpression& expr, const TorusGeometry& geom, double x, double y) {
  double s = 0.0;
  for (const auto& t : expr) {
    const double ax = 2.0 * kPi * t.m * x / geom.a;
    const double ay = 2.0 * kPi * t.n * y / geom.b;
    const double fx = t.kind_x == Trig::kCos ? std::cos(ax) : std::sin(ax);
    const double fy = t.kind_y == Trig::kCos ? std::cos(ay) : std::sin(ay);
    s += t.coefficient * fx * fy;
  }
  return s;
}

/// Nodal label field: labels are the 4-connected (periodic) components of the
/// positive and negative sign sets. Points with |f| < 1e-12 max|f| join the
/// smallest label among their already-labelled neighbours, sweep by sweep.
inline LabelField nodal_labels(const TrigExpression& expr, const PeriodicGrid& grid) {
  const int n = grid.size();
  std::vector<double> f(n);
  double fmax = 0.0;
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      const int idx = grid.index(i, j);
      f[idx] = evaluate(expr, grid.geom(), grid.x(i), grid.y(j));
      fmax = std::max(fmax, std::abs(f[idx]));
    }
  if (fmax == 0.0) throw InvalidArgument("trigonometric expression vanishes on the grid");

  const double zero_tol = 1e-12 * fmax;
  std::vector<int> sign(n);
  for (int p = 0; p < n; ++p) sign[p] = std::abs(f[p]) < zero_tol ? 0 : (f[p] > 0 ? 1 : -1);

  auto comps = connected_components(
      grid, [&](int p) { return sign[p] != 0; }, [&](int p, int q) { return sign[p] == sign[q]; });

  LabelField out{grid, std::vector<int>(n, 0), comps.count};
  for (int p = 0; p < n; ++p)
    if (comps.id[p] >= 0) out.labels[p] = comps.id[p] + 1;

  for (bool pending = true; pending;) {
    pending = false;
    auto next = out.labels;
    bool progressed = false;
    for (int p = 0; p < n; ++p) {
      if (out.labels[p] != 0) continue;
      int best = 0;
      for (int q : grid.neighbors(p))
        if (out.labels[q] != 0 && (best == 0 || out.labels[q] < best)) best = out.labels[q];
      if (best != 0) {
        next[p] = best;
        progressed = true;
      } else {
        pending = true;
      }
    }
    out.labels = std::move(next);
    if (pending && !progressed) throw NumericalError("nodal zero set could not be absorbed");
  }
  return out;
}

}  // namespace torpart

#pragma once

/**
 * @file ode.hpp
 * @brief Adaptive Dormand-Prince 5(4) for second-order systems y'' = a(r, y, y').
 *
 * Accepted steps are stored as nodes carrying (y, y', y''); dense output is the
 * quintic Hermite interpolant through consecutive nodes, so the interpolated
 * second derivative is accurate enough to evaluate ODE residuals between nodes.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "radstab/errors.hpp"

namespace radstab::ode {

template <std::size_t M>
using Vec = std::array<double, M>;

template <std::size_t M>
struct Node {
  double r;
  Vec<M> y;
  Vec<M> v;  // y'
  Vec<M> a;  // y''
  // Low-order parts of y and y' from compensated accumulation.
  Vec<M> ylo{};
  Vec<M> vlo{};
};

template <std::size_t M>
struct Point {
  Vec<M> y;
  Vec<M> v;
  Vec<M> a;
};

namespace detail {

struct Basis {
  std::array<double, 6> h;    // weights of y0, h v0, h^2 a0, y1, h v1, h^2 a1
  std::array<double, 6> dh;   // d/dt
  std::array<double, 6> ddh;  // d2/dt2
};

inline Basis quintic_basis(double t) {
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  Basis b;
  b.h = {1 - 10 * t3 + 15 * t4 - 6 * t5,
         t - 6 * t3 + 8 * t4 - 3 * t5,
         0.5 * (t2 - 3 * t3 + 3 * t4 - t5),
         10 * t3 - 15 * t4 + 6 * t5,
         -4 * t3 + 7 * t4 - 3 * t5,
         0.5 * (t3 - 2 * t4 + t5)};
  b.dh = {-30 * t2 + 60 * t3 - 30 * t4,
          1 - 18 * t2 + 32 * t3 - 15 * t4,
          0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4),
          30 * t2 - 60 * t3 + 30 * t4,
          -12 * t2 + 28 * t3 - 15 * t4,
          0.5 * (3 * t2 - 8 * t3 + 5 * t4)};
  b.ddh = {-60 * t + 180 * t2 - 120 * t3,
           -36 * t + 96 * t2 - 60 * t3,
           0.5 * (2 - 18 * t + 36 * t2 - 20 * t3),
           60 * t - 180 * t2 + 120 * t3,
           -24 * t + 84 * t2 - 60 * t3,
           0.5 * (6 * t - 24 * t2 + 20 * t3)};
  return b;
}

}  // namespace detail

/// Accepted nodes plus quintic Hermite dense output.  Immutable once returned
/// by integrate().
///
/// The interpolant is assembled from node differences including the low-order
/// parts, so increments far below |y| (near r = 0, where u stays close to
/// alpha) survive rounding.
template <std::size_t M>
class Trajectory {
 public:
  const std::vector<Node<M>>& nodes() const noexcept { return nodes_; }
  bool empty() const noexcept { return nodes_.empty(); }
  double r_begin() const { return nodes_.front().r; }
  double r_end() const { return nodes_.back().r; }

  void push(const Node<M>& n) { nodes_.push_back(n); }
  void replace_last(const Node<M>& n) { nodes_.back() = n; }

  /// Index i with nodes[i].r <= r <= nodes[i+1].r.
  std::size_t segment(double r) const {
    if (nodes_.size() < 2 || r < r_begin() || r > r_end()) {
      std::ostringstream os;
      os.precision(17);
      os << "evaluation radius " << r << " outside [" << (nodes_.empty() ? 0.0 : r_begin()) << ", "
         << (nodes_.empty() ? 0.0 : r_end()) << "]";
      throw RangeError(os.str());
    }
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r,
                               [](double x, const Node<M>& n) { return x < n.r; });
    std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
    i = (i == 0) ? 0 : i - 1;
    return std::min(i, nodes_.size() - 2);
  }

  Point<M> at(double r) const { return interpolate(segment(r), r); }

  Point<M> interpolate(std::size_t i, double r) const {
    const Node<M>& n0 = nodes_[i];
    const Node<M>& n1 = nodes_[i + 1];
    if (r == n0.r) return node_point(n0);
    if (r == n1.r) return node_point(n1);
    const double h = n1.r - n0.r;
    const auto b = detail::quintic_basis((r - n0.r) / h);
    Point<M> p;
    for (std::size_t k = 0; k < M; ++k) {
      const double dy = (n1.y[k] - n0.y[k]) + (n1.ylo[k] - n0.ylo[k]);
      const double v0 = n0.v[k] + n0.vlo[k], v1 = n1.v[k] + n1.vlo[k];
      const std::array<double, 6> c = {0.0, h * v0, h * h * n0.a[k], dy, h * v1, h * h * n1.a[k]};
      double y = 0, d1 = 0, d2 = 0;
      for (int j = 1; j < 6; ++j) {
        y += b.h[j] * c[j];
        d1 += b.dh[j] * c[j];
        d2 += b.ddh[j] * c[j];
      }
      p.y[k] = n0.y[k] + (n0.ylo[k] + y);
      p.v[k] = d1 / h;
      p.a[k] = d2 / (h * h);
    }
    return p;
  }

 private:
  static Point<M> node_point(const Node<M>& n) {
    Point<M> p{n.y, n.v, n.a};
    for (std::size_t k = 0; k < M; ++k) {
      p.y[k] += n.ylo[k];
      p.v[k] += n.vlo[k];
    }
    return p;
  }

  std::vector<Node<M>> nodes_;
};

namespace detail {

// s + lo == a + b exactly.
inline void two_sum(double a, double b, double& s, double& lo) {
  s = a + b;
  const double bb = s - a;
  lo = (a - (s - bb)) + (b - bb);
}

}  // namespace detail

struct StepOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  /// atol for y' is atol * atol_v_factor (before the radial adjustment).
  double atol_v_factor = 1.0;
  std::size_t max_steps = 2'000'000;
  /// Apply atol to (r / radial_scale) y' instead of y' below r = radial_scale
  /// (radial coordinates only).
  bool radial = true;
  double radial_scale = 1.0;
};

/// Outcome of an on_step callback: keep going, or stop at radius `at` inside
/// the last accepted segment.
struct Control {
  bool stop = false;
  double at = 0.0;
};

/// Integrates y'' = accel(r, y, v) from `start` to r_end.
///
/// `relative[k]` marks components that are differences of nearby solutions;
/// their error scale also includes h |y'| so that a vanishing difference does
/// not force the step to zero.  on_step(traj) is called after every accepted
/// step and may request a stop inside the newest segment.
template <std::size_t M, class Accel, class OnStep>
Trajectory<M> integrate(Accel&& accel, Node<M> start, double r_end, double h0,
                        const StepOptions& opt, const std::array<bool, M>& relative,
                        OnStep&& on_step) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  Trajectory<M> traj;
  {
    Vec<M> y = start.y, v = start.v;
    for (std::size_t k = 0; k < M; ++k) {
      y[k] += start.ylo[k];
      v[k] += start.vlo[k];
    }
    start.a = accel(start.r, y, v);
  }
  traj.push(start);
  if (!(r_end > start.r)) return traj;

  Node<M> cur = start;
  double h = std::min(h0, r_end - cur.r);
  std::size_t steps = 0;

  using V = Vec<M>;
  // base + (lo + h * sum w_j k_j), the increment formed before meeting base.
  auto axpy = [](const V& base, const V& lo, double h,
                 std::initializer_list<std::pair<double, const V*>> terms) {
    V inc{};
    for (const auto& [w, vec] : terms)
      for (std::size_t k = 0; k < M; ++k) inc[k] += w * (*vec)[k];
    V out;
    for (std::size_t k = 0; k < M; ++k) out[k] = base[k] + (lo[k] + h * inc[k]);
    return out;
  };
  auto& f = accel;

  while (cur.r < r_end) {
    if (++steps > opt.max_steps) {
      throw AccuracyError("step budget exhausted before r = " + std::to_string(r_end), cur.r);
    }
    const double hmin = 1e-14 * std::max(std::abs(cur.r), 1e-300) + 1e-300;
    if (h < hmin) {
      std::ostringstream os;
      os.precision(17);
      os << "step size underflow at r = " << cur.r;
      throw StiffnessError(os.str(), cur.r);
    }
    bool last = false;
    if (cur.r + h >= r_end) {
      h = r_end - cur.r;
      last = true;
    }
    const double r = cur.r;
    // Stage k_j of the first-order system (y, v)' = (v, a).
    const V& ky1 = cur.v;
    const V& kv1 = cur.a;
    V y2 = axpy(cur.y, cur.ylo, h, {{a21, &ky1}});
    V v2 = axpy(cur.v, cur.vlo, h, {{a21, &kv1}});
    V ky2 = v2, kv2 = f(r + c2 * h, y2, v2);
    V y3 = axpy(cur.y, cur.ylo, h, {{a31, &ky1}, {a32, &ky2}});
    V v3 = axpy(cur.v, cur.vlo, h, {{a31, &kv1}, {a32, &kv2}});
    V ky3 = v3, kv3 = f(r + c3 * h, y3, v3);
    V y4 = axpy(cur.y, cur.ylo, h, {{a41, &ky1}, {a42, &ky2}, {a43, &ky3}});
    V v4 = axpy(cur.v, cur.vlo, h, {{a41, &kv1}, {a42, &kv2}, {a43, &kv3}});
    V ky4 = v4, kv4 = f(r + c4 * h, y4, v4);
    V y5 = axpy(cur.y, cur.ylo, h, {{a51, &ky1}, {a52, &ky2}, {a53, &ky3}, {a54, &ky4}});
    V v5 = axpy(cur.v, cur.vlo, h, {{a51, &kv1}, {a52, &kv2}, {a53, &kv3}, {a54, &kv4}});
    V ky5 = v5, kv5 = f(r + c5 * h, y5, v5);
    V y6 = axpy(cur.y, cur.ylo, h, {{a61, &ky1}, {a62, &ky2}, {a63, &ky3}, {a64, &ky4}, {a65, &ky5}});
    V v6 = axpy(cur.v, cur.vlo, h, {{a61, &kv1}, {a62, &kv2}, {a63, &kv3}, {a64, &kv4}, {a65, &kv5}});
    const double r_new = last ? r_end : r + h;
    V ky6 = v6, kv6 = f(r_new, y6, v6);
    Node<M> next{r_new, {}, {}, {}, {}, {}};
    for (std::size_t k = 0; k < M; ++k) {
      const double iy = b1 * ky1[k] + b3 * ky3[k] + b4 * ky4[k] + b5 * ky5[k] + b6 * ky6[k];
      const double iv = b1 * kv1[k] + b3 * kv3[k] + b4 * kv4[k] + b5 * kv5[k] + b6 * kv6[k];
      detail::two_sum(cur.y[k], cur.ylo[k] + h * iy, next.y[k], next.ylo[k]);
      detail::two_sum(cur.v[k], cur.vlo[k] + h * iv, next.v[k], next.vlo[k]);
    }
    V yn = next.y, vn = next.v;
    for (std::size_t k = 0; k < M; ++k) {
      yn[k] += next.ylo[k];
      vn[k] += next.vlo[k];
    }
    V an = f(r_new, yn, vn);
    next.a = an;
    const V& ky7 = vn;
    const V& kv7 = an;

    // An error e in y' enters a radial equation as (N-1) e / r, so below r = 1
    // the absolute tolerance applies to r y' rather than y'.
    const double atol_v = opt.atol * opt.atol_v_factor * (opt.radial ? std::min(1.0, r_new / opt.radial_scale) : 1.0);
    double sum = 0.0;
    bool finite = true;
    for (std::size_t k = 0; k < M; ++k) {
      const double ey = h * (e1 * ky1[k] + e3 * ky3[k] + e4 * ky4[k] + e5 * ky5[k] + e6 * ky6[k] +
                             e7 * ky7[k]);
      const double ev = h * (e1 * kv1[k] + e3 * kv3[k] + e4 * kv4[k] + e5 * kv5[k] + e6 * kv6[k] +
                             e7 * kv7[k]);
      double my = std::max(std::abs(cur.y[k]), std::abs(yn[k]));
      double mv = std::max(std::abs(cur.v[k]), std::abs(vn[k]));
      if (relative[k]) {
        my = std::max(my, h * std::max(std::abs(cur.v[k]), std::abs(vn[k])));
        mv = std::max(mv, h * std::max(std::abs(cur.a[k]), std::abs(an[k])));
      }
      const double sy = ey / (opt.atol + opt.rtol * my);
      const double sv = ev / (atol_v + opt.rtol * mv);
      sum += sy * sy + sv * sv;
      finite = finite && std::isfinite(yn[k]) && std::isfinite(vn[k]) && std::isfinite(an[k]);
    }
    const double err = finite ? std::sqrt(sum / (2.0 * M)) : 1e300;

    if (err <= 1.0) {
      cur = next;
      traj.push(cur);
      const Control c = on_step(static_cast<const Trajectory<M>&>(traj));
      if (c.stop) {
        if (c.at < traj.r_end()) {
          const Point<M> p = traj.interpolate(traj.nodes().size() - 2, c.at);
          traj.replace_last(Node<M>{c.at, p.y, p.v, accel(c.at, p.y, p.v), {}, {}});
        }
        return traj;
      }
      const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::clamp(fac, 0.2, 5.0);
    } else {
      const double fac = finite ? 0.9 * std::pow(err, -0.2) : 0.1;
      h *= std::clamp(fac, 0.1, 0.9);
    }
  }
  return traj;
}

/// Bisection for a sign change of g over [lo, hi] to an absolute width tol.
template <class G>
double bisect(G&& g, double lo, double hi, double tol) {
  double glo = g(lo);
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm > 0.0) == (glo > 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace radstab::ode

#include "radstab/nonlinearity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "radstab/errors.hpp"

namespace radstab {

namespace {

constexpr double kQuadTol = 1e-14;
constexpr double kTailCutFloor = 1e3;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// int_{ya}^{yb} e^y / f(e^y) dy on panels of unit width.
double log_panels(const Reaction& f, double ya, double yb) {
  if (yb <= ya) return 0.0;
  auto integrand = [&f](double y) {
    const double s = std::exp(y);
    return s / f.value(s);
  };
  double sum = 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil(yb - ya)));
  const double w = (yb - ya) / panels;
  for (int k = 0; k < panels; ++k) {
    const double a = ya + k * w;
    const double b = (k + 1 == panels) ? yb : a + w;
    sum += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, a, b, 12,
                                                                         kQuadTol);
  }
  return sum;
}

double log_slope(const Reaction& f, double s) { return s * f.derivative(s) / f.value(s); }

}  // namespace

// ---------------------------------------------------------------------------
// Reaction

double Reaction::difference(double u, double d) const {
  if (d == 0.0) return 0.0;
  if (std::abs(d) <= 1e-2 * std::abs(u)) {
    // 4-point Gauss-Legendre on f' over [u, u + d].
    static constexpr std::array<double, 4> x = {0.0694318442029737124, 0.3300094782075718676,
                                                0.6699905217924281324, 0.9305681557970262876};
    static constexpr std::array<double, 4> w = {0.1739274225687269287, 0.3260725774312730713,
                                                0.3260725774312730713, 0.1739274225687269287};
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) acc += w[i] * derivative(u + x[i] * d);
    return d * acc;
  }
  return value(u + d) - value(u);
}

// ---------------------------------------------------------------------------
// Tail quadrature

double tail_quadrature(const Reaction& f, double u) {
  const double ucut = std::max(10.0 * u, kTailCutFloor);
  const double y0 = std::log(u);
  const double ycut = std::log(ucut);
  double sum = log_panels(f, y0, ycut);

  // Tail in y = log s: integrand ~ exp(-(k-1) y) for f ~ s^k.
  double y = ycut;
  double k_prev = log_slope(f, std::exp(y));
  for (int panel = 0; panel < 4000; ++panel) {
    const double piece = log_panels(f, y, y + 1.0);
    sum += piece;
    y += 1.0;
    const double s = std::exp(y);
    const double k = log_slope(f, s);
    if (!(k > 1.0)) {
      throw HypothesisError("1/f is not integrable at infinity (log slope " + std::to_string(k) +
                            " at s = " + std::to_string(s) + ")");
    }
    if (piece < 1e-17 * sum) return sum;
    // Power-law remainder once the local exponent has settled.
    if (panel >= 2 && std::abs(k - k_prev) < 1e-12 * k) {
      return sum + s / ((k - 1.0) * f.value(s));
    }
    if (!std::isfinite(s) || s > 1e250) break;
    k_prev = k;
  }
  throw AccuracyError("tail quadrature for F did not converge", sum);
}

// ---------------------------------------------------------------------------
// F cache for custom families: cubic Hermite in (log u, log F) with exact
// slopes d log F / d log u = -u / (f F).

class TailCache {
 public:
  TailCache(const Reaction& f, double lo, double hi) : top_(hi) {
    std::vector<double> ys;
    const double ylo = std::log(lo), yhi = std::log(hi);
    const int n0 = static_cast<int>(std::ceil((yhi - ylo) / std::log(10.0) * 4));
    for (int i = 0; i <= n0; ++i) ys.push_back(ylo + (yhi - ylo) * i / n0);

    // F at coarse nodes, accumulated downward from the top.
    std::vector<double> Fs(ys.size());
    Fs.back() = tail_quadrature(f, hi);
    for (int i = static_cast<int>(ys.size()) - 2; i >= 0; --i)
      Fs[i] = Fs[i + 1] + log_panels(f, ys[i], ys[i + 1]);

    for (std::size_t i = 0; i + 1 < ys.size(); ++i) refine(f, ys[i], Fs[i], ys[i + 1], Fs[i + 1], 0);
    push(f, ys.back(), Fs.back());
  }

  bool covers(double u) const { return !y_.empty() && std::log(u) >= y_.front() && u <= top_; }

  double operator()(double u) const {
    const double y = std::log(u);
    auto it = std::upper_bound(y_.begin(), y_.end(), y);
    std::size_t i = (it == y_.begin()) ? 0 : static_cast<std::size_t>(it - y_.begin()) - 1;
    if (i + 1 >= y_.size()) i = y_.size() - 2;
    return std::exp(hermite(i, y));
  }

 private:
  void push(const Reaction& f, double y, double F) {
    const double u = std::exp(y);
    y_.push_back(y);
    z_.push_back(std::log(F));
    m_.push_back(-u / (f.value(u) * F));
  }

  double hermite(std::size_t i, double y) const {
    const double h = y_[i + 1] - y_[i];
    const double t = (y - y_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * z_[i] + (t3 - 2 * t2 + t) * h * m_[i] +
           (-2 * t3 + 3 * t2) * z_[i + 1] + (t3 - t2) * h * m_[i + 1];
  }

  static double hermite_pair(double ya, double za, double ma, double yb, double zb, double mb,
                             double y) {
    const double h = yb - ya;
    const double t = (y - ya) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * za + (t3 - 2 * t2 + t) * h * ma + (-2 * t3 + 3 * t2) * zb +
           (t3 - t2) * h * mb;
  }

  void refine(const Reaction& f, double ya, double Fa, double yb, double Fb, int depth) {
    const double ym = 0.5 * (ya + yb);
    const double Fm = Fb + log_panels(f, ym, yb);
    auto slope = [&f](double y, double F) {
      const double u = std::exp(y);
      return -u / (f.value(u) * F);
    };
    const double pred = hermite_pair(ya, std::log(Fa), slope(ya, Fa), yb, std::log(Fb),
                                     slope(yb, Fb), ym);
    if (depth < 30 && std::abs(std::exp(pred - std::log(Fm)) - 1.0) > 1e-10) {
      refine(f, ya, Fa, ym, Fm, depth + 1);
      refine(f, ym, Fm, yb, Fb, depth + 1);
      return;
    }
    push(f, ya, Fa);
  }

  double top_;
  std::vector<double> y_, z_, m_;
};

// ---------------------------------------------------------------------------
// NonlinearitySpec

NonlinearitySpec::NonlinearitySpec(Family family, double domain_floor)
    : family_(std::move(family)), floor_(domain_floor) {
  if (!(floor_ > 0.0)) throw DomainError("domain_floor must be positive");
  std::visit(overloaded{
                 [](const Power& f) {
                   if (!(f.p > 1.0)) throw DomainError("power: p must exceed 1");
                 },
                 [](const PowerSum& f) {
                   if (!(f.p1 > f.p2 && f.p2 > 1.0))
                     throw DomainError("power_sum: need p1 > p2 > 1");
                 },
                 [](const PowerRational& f) {
                   if (!(f.p2 == 0.0 ? f.p1 > 1.0 : (f.p2 > 0.0 && f.p1 > f.p2 + 1.0)))
                     throw DomainError("power_rational: need p1 > p2 + 1 (or p2 = 0, p1 > 1)");
                 },
                 [](const Custom& f) {
                   if (!f.f || !f.df || !f.ddf)
                     throw DomainError("custom: f, f' and f'' evaluators are required");
                 },
             },
             family_);
  if (const auto* c = std::get_if<Custom>(&family_); c && !c->F) {
    try {
      cache_ = std::make_shared<const TailCache>(*this, floor_, 1e12);
    } catch (const HypothesisError&) {
      // Non-integrable tail: leave uncached, check_hypotheses reports it and
      // eval_F raises on use.
    }
  }
}

NonlinearitySpec NonlinearitySpec::power(double p) { return NonlinearitySpec(Power{p}); }
NonlinearitySpec NonlinearitySpec::power_sum(double p1, double p2) {
  return NonlinearitySpec(PowerSum{p1, p2});
}
NonlinearitySpec NonlinearitySpec::power_rational(double p1, double p2) {
  return NonlinearitySpec(PowerRational{p1, p2});
}
NonlinearitySpec NonlinearitySpec::custom(Custom c, double domain_floor) {
  return NonlinearitySpec(std::move(c), domain_floor);
}

NonlinearitySpec NonlinearitySpec::with_inversion_range(double lo, double hi) const {
  if (!(lo > 0.0 && hi > lo)) throw DomainError("inversion range must satisfy 0 < lo < hi");
  NonlinearitySpec copy = *this;
  copy.range_ = {lo, hi};
  return copy;
}

std::string NonlinearitySpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const Power& f) { os << "u^" << f.p; },
                 [&](const PowerSum& f) { os << "u^" << f.p1 << " + u^" << f.p2; },
                 [&](const PowerRational& f) { os << "u^" << f.p1 << " / (1+u)^" << f.p2; },
                 [&](const Custom& f) { os << f.name; },
             },
             family_);
  return os.str();
}

bool NonlinearitySpec::closed_form_tail() const noexcept {
  if (std::holds_alternative<Power>(family_)) return true;
  if (const auto* r = std::get_if<PowerRational>(&family_)) return r->p2 == 0.0;
  if (const auto* c = std::get_if<Custom>(&family_)) return static_cast<bool>(c->F);
  return false;
}

double NonlinearitySpec::raw_value(double u) const {
  return std::visit(overloaded{
                        [u](const Power& f) { return std::pow(u, f.p); },
                        [u](const PowerSum& f) { return std::pow(u, f.p1) + std::pow(u, f.p2); },
                        [u](const PowerRational& f) {
                          if (u == 0.0) return 0.0;
                          return std::exp(f.p1 * std::log(u) - f.p2 * std::log1p(u));
                        },
                        [u](const Custom& f) { return f.f(u); },
                    },
                    family_);
}

double NonlinearitySpec::raw_derivative(double u) const {
  return std::visit(
      overloaded{
          [u](const Power& f) { return f.p * std::pow(u, f.p - 1.0); },
          [u](const PowerSum& f) {
            return f.p1 * std::pow(u, f.p1 - 1.0) + f.p2 * std::pow(u, f.p2 - 1.0);
          },
          [u](const PowerRational& f) {
            if (u == 0.0) return 0.0;
            // (p1 u^{p1-1} + (p1-p2) u^{p1}) / (1+u)^{p2+1}
            const double base = std::exp((f.p1 - 1.0) * std::log(u) - (f.p2 + 1.0) * std::log1p(u));
            return base * (f.p1 + (f.p1 - f.p2) * u);
          },
          [u](const Custom& f) { return f.df(u); },
      },
      family_);
}

double NonlinearitySpec::raw_second(double u) const {
  return std::visit(
      overloaded{
          [u](const Power& f) { return f.p * (f.p - 1.0) * std::pow(u, f.p - 2.0); },
          [u](const PowerSum& f) {
            return f.p1 * (f.p1 - 1.0) * std::pow(u, f.p1 - 2.0) +
                   f.p2 * (f.p2 - 1.0) * std::pow(u, f.p2 - 2.0);
          },
          [u](const PowerRational& f) {
            if (u == 0.0) return 0.0;
            const double a = f.p1 - f.p2;
            const double poly = a * (a - 1.0) * u * u + 2.0 * f.p1 * (a - 1.0) * u + f.p1 * (f.p1 - 1.0);
            return poly * std::exp((f.p1 - 2.0) * std::log(u) - (f.p2 + 2.0) * std::log1p(u));
          },
          [u](const Custom& f) { return f.ddf(u); },
      },
      family_);
}

double NonlinearitySpec::value(double u) const {
  if (u < 0.0) return -raw_value(-u);
  if (u == 0.0) return 0.0;
  return raw_value(u);
}

double NonlinearitySpec::derivative(double u) const { return raw_derivative(std::abs(u)); }

double NonlinearitySpec::second_derivative(double u) const {
  return u < 0.0 ? -raw_second(-u) : raw_second(u);
}

double NonlinearitySpec::difference(double u, double d) const {
  if (u > 0.0 && u + d > 0.0 && d != 0.0) {
    const double x = d / u;
    // Exact relative differences for the built-in families.
    if (const auto* f = std::get_if<Power>(&family_))
      return raw_value(u) * std::expm1(f->p * std::log1p(x));
    if (const auto* f = std::get_if<PowerRational>(&family_))
      return raw_value(u) * std::expm1(f->p1 * std::log1p(x) - f->p2 * std::log1p(d / (1.0 + u)));
    if (const auto* f = std::get_if<PowerSum>(&family_))
      return std::pow(u, f->p1) * std::expm1(f->p1 * std::log1p(x)) +
             std::pow(u, f->p2) * std::expm1(f->p2 * std::log1p(x));
  }
  return Reaction::difference(u, d);
}

double NonlinearitySpec::tail(double u) const {
  if (const auto* f = std::get_if<Power>(&family_)) return std::pow(u, 1.0 - f->p) / (f->p - 1.0);
  if (const auto* f = std::get_if<PowerRational>(&family_); f && f->p2 == 0.0)
    return std::pow(u, 1.0 - f->p1) / (f->p1 - 1.0);
  if (const auto* c = std::get_if<Custom>(&family_)) {
    if (c->F) return c->F(u);
    if (cache_ && cache_->covers(u)) return (*cache_)(u);
  }
  return tail_quadrature(*this, u);
}

// ---------------------------------------------------------------------------
// Operations

Derivatives eval_derivatives(const NonlinearitySpec& spec, double u) {
  if (!(u > 0.0)) throw DomainError("eval_derivatives: u must be positive");
  const Derivatives d{spec.value(u), spec.derivative(u), spec.second_derivative(u)};
  if (!(d.f > 0.0 && d.df > 0.0 && d.ddf > 0.0) || !std::isfinite(d.f) || !std::isfinite(d.df) ||
      !std::isfinite(d.ddf)) {
    std::ostringstream os;
    os.precision(17);
    os << "nonlinearity " << spec.describe() << " violates f, f', f'' > 0 at u = " << u;
    throw HypothesisError(os.str());
  }
  return d;
}

double eval_F(const NonlinearitySpec& spec, double u) {
  if (!(u > 0.0)) throw DomainError("eval_F: u must be positive");
  if (u < spec.domain_floor()) throw DomainError("eval_F: u below the trusted domain floor");
  return spec.tail(u);
}

double invert_F(const NonlinearitySpec& spec, double x) {
  if (!(x > 0.0)) throw DomainError("invert_F: x must be positive");
  const auto [lo, hi] = spec.inversion_range();
  const double Flo = spec.tail(lo), Fhi = spec.tail(hi);
  if (x > Flo || x < Fhi) {
    std::ostringstream os;
    os.precision(17);
    os << "invert_F: x = " << x << " outside [F(" << hi << "), F(" << lo << ")] = [" << Fhi << ", "
       << Flo << "]";
    throw RangeError(os.str());
  }
  if (x == Flo) return lo;
  if (x == Fhi) return hi;
  double p = 0.0;
  if (const auto* f = std::get_if<Power>(&spec.family())) p = f->p;
  if (const auto* f = std::get_if<PowerRational>(&spec.family()); f && f->p2 == 0.0) p = f->p1;
  if (p > 0.0) return std::pow((p - 1.0) * x, -1.0 / (p - 1.0));
  const double target = std::log(x);
  // Newton on y = log u for log F(e^y) - log x; d/dy log F = -u / (f F).
  auto fn = [&](double y) {
    const double u = std::exp(y);
    const double F = spec.tail(u);
    return std::make_pair(std::log(F) - target, -u / (spec.value(u) * F));
  };
  // Initial guess from log-linear interpolation between the bracket ends.
  const double ylo = std::log(lo), yhi = std::log(hi);
  const double t = (target - std::log(Flo)) / (std::log(Fhi) - std::log(Flo));
  const double guess = std::clamp(ylo + t * (yhi - ylo), ylo, yhi);
  std::uintmax_t iters = 200;
  const double y = boost::math::tools::newton_raphson_iterate(fn, guess, ylo, yhi, 50, iters);
  return std::exp(y);
}

double q_of(const NonlinearitySpec& spec, double u) {
  return eval_derivatives(spec, u).df * eval_F(spec, u);
}

double curvature_ratio(const NonlinearitySpec& spec, double u) {
  const auto d = eval_derivatives(spec, u);
  return d.df * d.df / (d.f * d.ddf);
}

std::vector<double> log_grid(double lo, double hi, int points_per_decade) {
  const double decades = std::log10(hi / lo);
  const int n = std::max(1, static_cast<int>(std::lround(decades * points_per_decade)));
  std::vector<double> g(n + 1);
  for (int i = 0; i <= n; ++i) g[i] = lo * std::pow(10.0, decades * i / n);
  g.front() = lo;
  g.back() = hi;
  return g;
}

namespace {

LimitEstimate limit_from(const NonlinearitySpec& spec, std::vector<double> grid,
                         const LimitOptions& opts) {
  LimitEstimate e;
  e.grid = std::move(grid);
  for (double u : e.grid) e.samples.push_back(q_of(spec, u));
  const auto [mn, mx] = std::minmax_element(e.samples.begin(), e.samples.end());
  const double mid = 0.5 * (*mn + *mx);
  e.uncertainty = *mx - *mn;
  if (mid > 0.0 && e.uncertainty < opts.agreement * mid) e.value = e.samples.back();
  return e;
}

}  // namespace

LimitEstimates estimate_limits(const NonlinearitySpec& spec, const LimitOptions& opts) {
  std::vector<double> low, high;
  for (int k = opts.window - 1; k >= 0; --k) low.push_back(spec.domain_floor() * std::pow(10.0, k));
  for (int k = opts.window - 1; k >= 0; --k) high.push_back(opts.cap / std::pow(10.0, k));
  return {limit_from(spec, std::move(low), opts), limit_from(spec, std::move(high), opts)};
}

CriticalExponents critical_exponents(int N) {
  if (N < 3) throw DomainError("critical_exponents: N must be at least 3");
  CriticalExponents e{N, (N + 2.0) / (N - 2.0), (N + 2.0) / 4.0, std::nullopt, std::nullopt};
  if (N >= 11) {
    const double root = std::sqrt(N - 1.0);
    e.p_JL = 1.0 + 4.0 / (N - 4.0 - 2.0 * root);
    e.q_JL = (N - 2.0 * root) / 4.0;
  }
  return e;
}

double jl_gate(int N, double q) { return q * (2.0 * N - 4.0 * q) - (N - 2.0) * (N - 2.0) / 4.0; }

HypothesisReport check_hypotheses(const NonlinearitySpec& spec, double cap, int points_per_decade) {
  HypothesisReport r;
  const auto grid = log_grid(spec.domain_floor(), cap, points_per_decade);
  auto fail = [&r](std::string msg) {
    r.pass = false;
    if (r.violations.size() < 16) r.violations.push_back(std::move(msg));
  };
  for (double u : grid) {
    const double f = spec.value(u), df = spec.derivative(u), ddf = spec.second_derivative(u);
    std::ostringstream at;
    at.precision(6);
    at << " at u = " << u;
    if (!(f > 0.0) || !std::isfinite(f)) fail("f <= 0" + at.str());
    if (!(df > 0.0) || !std::isfinite(df)) fail("f' <= 0" + at.str());
    if (!(ddf > 0.0) || !std::isfinite(ddf)) fail("f'' <= 0" + at.str());
  }
  const double top = grid.back(), below = top / 10.0;
  const double f_top = spec.value(top), f_below = spec.value(below);
  if (f_top > 0.0 && f_below > 0.0) {
    r.tail_slope = std::log10(f_top / f_below);
    r.tail_integrable = r.tail_slope > 1.0 + 1e-3;
  } else {
    r.tail_integrable = false;
  }
  if (!r.tail_integrable) {
    std::ostringstream os;
    os.precision(6);
    os << "1/f not integrable at infinity (log-log slope " << r.tail_slope << ")";
    fail(os.str());
  }
  return r;
}

}  // namespace radstab

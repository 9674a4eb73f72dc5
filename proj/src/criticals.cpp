#include "vrrw/criticals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vrrw/compensated_sum.hpp"
#include "vrrw/detail/gauss_legendre.hpp"
#include "vrrw/errors.hpp"

namespace vrrw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLn10 = std::log(10.0);
constexpr double kPanel = 1.0 / 16.0;
// Cells are only walked exactly below this x.
constexpr double kExactWalkLimit = 0x1p40;

struct LineFit {
  double slope = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  f.n = x.size();
  if (f.n < 3) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < f.n; ++i) mx += x[i], my += y[i];
  mx /= f.n;
  my /= f.n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  double rss = 0;
  for (std::size_t i = 0; i < f.n; ++i) {
    const double r = y[i] - my - f.slope * (x[i] - mx);
    rss += r * r;
  }
  f.se = std::sqrt(rss / static_cast<double>(f.n - 2) / sxx);
  return f;
}

// Two-sided ~95% band.
constexpr double kBand = 2.0;

}  // namespace

// ---------------------------------------------------------------------------
// Exact partials. On the cell [j, j+1) we have dx = w(j) dW, so with
// u = W(x) + alpha (resp. u = 2W(x) + beta, dx = w(j) du / 2) and y = W^{-1}(u)
// the integrand 1/w(y) integrates to w(j) dV(y) with V = int 1/w^2, and for
// J~ to dVtilde(y).

double exact_integral(const WeightModel& m, IntegralKind kind, double param, double a, double b,
                      std::uint64_t max_cells) {
  if (!(a >= 0.0) || !(b >= a)) throw DomainError("exact_integral requires 0 <= a <= b");
  if (kind == IntegralKind::kI && param < 0) throw DomainError("I_alpha requires alpha >= 0");
  const double w0 = m.w_at(0);
  const double factor = kind == IntegralKind::kI ? 1.0 : 0.5;
  auto u_of = [&](double x) {
    return kind == IntegralKind::kI ? m.W(x) + param : 2.0 * m.W(x) + param;
  };
  // Antiderivative in u, for u >= 0.
  auto F = [&](double u) {
    double y;
    try {
      y = m.Winv(u);
    } catch (const ResourceError&) {
      const double ys = m.Winv_log(u);
      return kind == IntegralKind::kJTilde ? m.Vtilde_at_log(ys) : m.V_at_log(ys);
    }
    return kind == IntegralKind::kJTilde ? m.Vtilde(y) : m.V(y);
  };

  CompensatedSum acc;
  double x = a;
  double u0 = u_of(x);
  double F0 = u0 > 0 ? F(u0) : 0.0;
  std::uint64_t cells = 0;
  while (x < b) {
    if (++cells > max_cells) {
      throw ResourceError("exact integration stopped at x = " + std::to_string(x) +
                              " after " + std::to_string(max_cells) + " cells",
                          acc.value());
    }
    const double j = std::floor(x);
    const double x1 = std::min(b, j + 1.0);
    const double wj = m.w_at(j);
    const double u1 = u_of(x1);
    double piece = 0.0;
    if (u0 < 0) piece += (std::min(u1, 0.0) - u0) / w0;
    double F1 = 0.0;
    if (u1 > 0) {
      F1 = F(u1);
      piece += F1 - (u0 > 0 ? F0 : 0.0);
    }
    acc += factor * wj * piece;
    x = x1;
    u0 = u1;
    F0 = F1;
  }
  return acc.value();
}

double partial_I(const WeightModel& m, double alpha, double T) {
  if (!(alpha > 0)) throw DomainError("partial_I requires alpha > 0");
  if (!(T > 0)) throw DomainError("partial_I requires T > 0");
  return exact_integral(m, IntegralKind::kI, alpha, 0.0, T);
}

double partial_J(const WeightModel& m, double beta, double T) {
  if (!(T > 0)) throw DomainError("partial_J requires T > 0");
  return exact_integral(m, IntegralKind::kJ, beta, 0.0, T);
}

double partial_J_tilde(const WeightModel& m, double beta, double T) {
  if (!(T > 0)) throw DomainError("partial_J_tilde requires T > 0");
  return exact_integral(m, IntegralKind::kJTilde, beta, 0.0, T);
}

double log_integrand_at_log(const WeightModel& m, IntegralKind kind, double param, double s) {
  const double Wx = m.W_at_log(s);
  const double u = kind == IntegralKind::kI ? Wx + param : 2.0 * Wx + param;
  if (u <= 0) return -std::log(m.w_at(0));
  const double ys = m.Winv_log(u);
  if (ys == kInf) return -kInf;
  if (kind != IntegralKind::kJTilde) return -m.log_w_at_log(ys);
  const double zs = m.Hinv_clamped_log(ys);
  return zs == -kInf ? -std::log(m.w_at(0)) : -m.log_w_at_log(zs);
}

// ---------------------------------------------------------------------------

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kFinite: return "Finite";
    case Verdict::kDivergent: return "Divergent";
    case Verdict::kInconclusive: return "Inconclusive";
  }
  return "?";
}

std::string to_string(CriticalParameter p) {
  switch (p) {
    case CriticalParameter::kAlphaC: return "AlphaC";
    case CriticalParameter::kBetaC: return "BetaC";
    case CriticalParameter::kBetaTildeC: return "BetaTildeC";
  }
  return "?";
}

std::string to_string(CriticalVerdict v) {
  switch (v) {
    case CriticalVerdict::kMinusInfinity: return "MinusInfinity";
    case CriticalVerdict::kPlusInfinity: return "PlusInfinity";
    case CriticalVerdict::kFiniteBracket: return "FiniteBracket";
    case CriticalVerdict::kUnknown: return "Unknown";
  }
  return "?";
}

std::string to_string(Boundedness b) {
  switch (b) {
    case Boundedness::kBounded: return "bounded";
    case Boundedness::kUnbounded: return "unbounded";
    case Boundedness::kInconclusive: return "inconclusive";
  }
  return "?";
}

nlohmann::json TailClassification::to_json() const {
  nlohmann::json j;
  j["verdict"] = to_string(verdict);
  j["reason"] = reason;
  j["origin"] = origin;
  j["approximate"] = approximate;
  auto& p = j["partials"] = nlohmann::json::array();
  for (const auto& [lt, v] : partials) {
    p.push_back({{"cutoff", std::exp(lt)}, {"log_cutoff", lt}, {"value", v}});
  }
  j["tail_slope"] = {{"exponent", slope.exponent}, {"lo", slope.lo}, {"hi", slope.hi},
                     {"points", slope.points}};
  if (slope.log_tier) {
    j["log_slope"] = {{"exponent", slope.log_exponent}, {"lo", slope.log_lo}, {"hi", slope.log_hi}};
  }
  return j;
}

TailClassification classify_tail(std::vector<Partial> partials,
                                 const std::function<double(double)>& log_g_at_log,
                                 const ClassifierOptions& opts) {
  TailClassification tc;
  tc.partials = std::move(partials);
  const auto& P = tc.partials;
  if (P.size() < 4) {
    tc.reason = "fewer than four cutoffs";
    return tc;
  }
  const std::size_t K = P.size() - 1;
  const double s_hi = P[K].log_cutoff;
  const double s_lo = P[K - 2].log_cutoff;

  std::vector<double> xs, ys;
  int vanished = 0;
  for (int i = 0; i < opts.fit_points; ++i) {
    const double s = s_lo + (s_hi - s_lo) * i / (opts.fit_points - 1);
    const double lg = log_g_at_log(s);
    if (lg == -kInf) {
      ++vanished;
      continue;
    }
    xs.push_back(s);
    ys.push_back(lg);
  }
  const double d_last = P[K].value - P[K - 1].value;
  const double d_prev = P[K - 1].value - P[K - 2].value;
  const bool saturating = d_last <= d_prev;

  if (xs.size() < 3) {
    if (vanished > 0) {
      tc.verdict = Verdict::kFinite;
      tc.reason = "integrand vanishes along the tail";
    } else {
      tc.reason = "too few tail points";
    }
    return tc;
  }
  const LineFit f = least_squares(xs, ys);
  tc.slope.exponent = -f.slope;
  tc.slope.lo = -f.slope - kBand * f.se;
  tc.slope.hi = -f.slope + kBand * f.se;
  tc.slope.points = f.n;

  const double m = opts.margin;
  if (tc.slope.lo > 1 + m) {
    if (saturating) {
      tc.verdict = Verdict::kFinite;
      tc.reason = "decay exponent above 1 and partials saturating";
    } else {
      tc.reason = "decay exponent above 1 but partial increments still growing";
    }
    return tc;
  }
  if (tc.slope.hi < 1 - m) {
    tc.verdict = Verdict::kDivergent;
    tc.reason = "decay exponent below 1";
    return tc;
  }

  // Exponent near 1: look at x g(x) against log x.
  std::vector<double> ls(xs.size()), r(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ls[i] = std::log(xs[i]);
    r[i] = ys[i] + xs[i];
  }
  const LineFit g = least_squares(ls, r);
  tc.slope.log_tier = true;
  tc.slope.log_exponent = -g.slope;
  tc.slope.log_lo = -g.slope - kBand * g.se;
  tc.slope.log_hi = -g.slope + kBand * g.se;
  if (tc.slope.log_hi < 1 - m) {
    tc.verdict = Verdict::kDivergent;
    tc.reason = "x g(x) bounded below on the logarithmic scale";
  } else if (tc.slope.log_lo > 1 + m && saturating) {
    tc.verdict = Verdict::kFinite;
    tc.reason = "x g(x) decays faster than 1/log x and partials saturating";
  } else {
    tc.reason = "decay exponent indistinguishable from 1";
  }
  return tc;
}

namespace {

// Accumulates int g over [x_a, x_b] by Gauss-Legendre in s = log x on panels
// of width kPanel, reporting the running value at each requested s.
std::vector<double> log_quadrature(const std::function<double(double)>& log_g, double s_a,
                                   const std::vector<double>& s_marks) {
  const auto& q = detail::gauss_legendre<10>();
  std::vector<double> out;
  CompensatedSum acc;
  double s = s_a;
  for (double mark : s_marks) {
    while (s < mark) {
      const double e = std::min(mark, s + kPanel);
      acc += q.integrate([&](double t) { return std::exp(log_g(t) + t); }, s, e);
      s = e;
    }
    out.push_back(acc.value());
  }
  return out;
}

}  // namespace

TailClassification classify_integral(const WeightModel& m, IntegralKind kind, double param,
                                     const ClassifierOptions& opts) {
  // While |param| is comparable to W(x) the integrand is still dominated by
  // the parameter, so the ladder starts where W(x) = 2 |param|.
  double s_origin = 0.0;
  if (param != 0) s_origin = std::max(0.0, m.Winv_log(2 * std::abs(param)));
  const double x_origin = s_origin == 0.0 ? 0.0 : std::exp(s_origin);
  auto log_g = [&](double s) { return log_integrand_at_log(m, kind, param, s); };

  std::vector<double> marks;
  for (int k = opts.k_min; k <= opts.k_max; ++k) marks.push_back(s_origin + k * kLn10);

  // Exact cells from the origin, then quadrature.
  double exact_value = 0.0;
  double s_switch = s_origin;
  if (x_origin < kExactWalkLimit) {
    const double x_end = std::min(x_origin + static_cast<double>(opts.exact_cells), std::exp(marks.back()));
    exact_value = exact_integral(m, kind, param, x_origin, x_end);
    s_switch = std::log(x_end);
  }
  std::vector<double> q_marks;
  for (double s : marks) q_marks.push_back(std::max(s, s_switch));
  const auto q = log_quadrature(log_g, s_switch, q_marks);

  std::vector<Partial> partials;
  bool approximate = false;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    double value;
    if (marks[i] <= s_switch) {
      value = exact_integral(m, kind, param, x_origin, std::exp(marks[i]));
    } else {
      value = exact_value + q[i];
      approximate = true;
    }
    partials.push_back({marks[i], value});
  }
  auto tc = classify_tail(std::move(partials), log_g, opts);
  tc.origin = x_origin;
  tc.approximate = approximate || m.used_tail_model();
  return tc;
}

SeriesTests series_tests(const WeightModel& m, const ClassifierOptions& opts) {
  auto run = [&](int p) {
    std::vector<Partial> partials;
    for (int k = opts.k_min; k <= opts.k_max; ++k) {
      const double N = std::pow(10.0, k);
      partials.push_back({k * kLn10, p == 1 ? m.W(N) : m.V(N)});
    }
    auto tc = classify_tail(std::move(partials), [&](double s) { return -p * m.log_w_at_log(s); }, opts);
    tc.approximate = m.used_tail_model();
    return tc;
  };
  SeriesTests st;
  st.recip = run(1);
  st.recip_sq = run(2);
  return st;
}

// ---------------------------------------------------------------------------

nlohmann::json CriticalEstimate::to_json() const {
  nlohmann::json j;
  j["parameter"] = to_string(parameter);
  j["verdict"] = to_string(verdict);
  if (verdict == CriticalVerdict::kFiniteBracket) j["bracket"] = {lo, hi};
  if (!inconsistency.empty()) j["inconsistency"] = inconsistency;
  auto& p = j["probes"] = nlohmann::json::array();
  for (const auto& [v, tc] : probes) {
    auto e = tc.to_json();
    e["value"] = v;
    p.push_back(std::move(e));
  }
  return j;
}

std::vector<double> default_probe_grid(CriticalParameter p) {
  std::vector<double> g;
  if (p == CriticalParameter::kAlphaC) {
    g.push_back(0.0);
    for (int k = -3; k <= 10; ++k) g.push_back(std::ldexp(1.0, k));
  } else {
    g.push_back(0.0);
    for (int k = 0; k <= 10; ++k) {
      g.push_back(std::ldexp(1.0, k));
      g.push_back(-std::ldexp(1.0, k));
    }
  }
  std::sort(g.begin(), g.end());
  return g;
}

CriticalEstimate estimate_critical(const WeightModel& m, CriticalParameter p,
                                   const ClassifierOptions& opts, std::vector<double> grid) {
  if (grid.empty()) grid = default_probe_grid(p);
  std::sort(grid.begin(), grid.end());
  const IntegralKind kind = p == CriticalParameter::kAlphaC   ? IntegralKind::kI
                            : p == CriticalParameter::kBetaC ? IntegralKind::kJ
                                                             : IntegralKind::kJTilde;
  CriticalEstimate est;
  est.parameter = p;
  for (double v : grid) {
    TailClassification tc;
    try {
      tc = classify_integral(m, kind, v, opts);
    } catch (const ResourceError& e) {
      tc.verdict = Verdict::kInconclusive;
      tc.reason = std::string("resource limit: ") + e.what();
    }
    est.probes.emplace_back(v, std::move(tc));
  }

  // The integrand is nonincreasing in the parameter, so verdicts should read
  // Divergent ... Finite from left to right.
  const auto& P = est.probes;
  std::ptrdiff_t last_div = -1, first_fin = -1;
  bool any_conclusive = false;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i].second.verdict == Verdict::kDivergent) last_div = static_cast<std::ptrdiff_t>(i);
    if (P[i].second.verdict == Verdict::kFinite && first_fin < 0) first_fin = static_cast<std::ptrdiff_t>(i);
    any_conclusive |= P[i].second.verdict != Verdict::kInconclusive;
  }
  if (!any_conclusive) return est;
  if (first_fin >= 0 && last_div >= 0) {
    if (last_div < first_fin) {
      est.verdict = CriticalVerdict::kFiniteBracket;
      est.lo = P[last_div].first;
      est.hi = P[first_fin].first;
    }
    return est;
  }
  if (last_div < 0 && P.front().second.verdict == Verdict::kFinite) {
    est.verdict = CriticalVerdict::kMinusInfinity;
  } else if (first_fin < 0 && P.back().second.verdict == Verdict::kDivergent) {
    est.verdict = CriticalVerdict::kPlusInfinity;
  }
  return est;
}

void apply_consistency_gate(CriticalEstimate& beta_c, const SeriesTests& series) {
  const bool finite_side = beta_c.verdict == CriticalVerdict::kMinusInfinity ||
                           beta_c.verdict == CriticalVerdict::kFiniteBracket;
  if (finite_side && series.recip_sq.verdict != Verdict::kFinite) {
    beta_c.inconsistency = "beta_c verdict " + to_string(beta_c.verdict) +
                           " but sum 1/w^2 classified " + to_string(series.recip_sq.verdict);
  } else {
    beta_c.inconsistency.clear();
  }
}

ScalingResidual check_scaling(const WeightSpec& spec, double lambda, double beta, double T) {
  if (!(lambda > 0)) throw DomainError("check_scaling requires lambda > 0");
  WeightModel scaled(spec.scaled(lambda));
  WeightModel base(spec);
  const double lhs = partial_J(scaled, beta, T);
  const double rhs = partial_J(base, lambda * beta, T) / lambda;
  return {std::abs(lhs - rhs), std::max(std::abs(lhs), std::abs(rhs))};
}

// ---------------------------------------------------------------------------

SublinearConditions check_sublinear_conditions(const WeightModel& m, const ClassifierOptions& opts) {
  SublinearConditions out;
  std::vector<double> log_n;
  for (int k = 1; k <= opts.k_max; ++k) log_n.push_back(k * kLn10);

  // Fits log ratio against log n over the upper half of the grid.
  auto judge = [&](const std::vector<double>& log_ratio, nlohmann::json& ev) {
    for (double v : log_ratio) {
      if (!std::isfinite(v)) {
        ev["slope"] = nullptr;
        return Boundedness::kUnbounded;
      }
    }
    const std::size_t half = log_n.size() / 2;
    std::vector<double> x(log_n.begin() + half, log_n.end()), y(log_ratio.begin() + half, log_ratio.end());
    const LineFit f = least_squares(x, y);
    ev["slope"] = {f.slope, f.slope - kBand * f.se, f.slope + kBand * f.se};
    if (f.slope + kBand * f.se < opts.margin) return Boundedness::kBounded;
    if (f.slope - kBand * f.se > opts.margin) return Boundedness::kUnbounded;
    return Boundedness::kInconclusive;
  };
  auto merge = [](const std::vector<Boundedness>& v) {
    if (std::find(v.begin(), v.end(), Boundedness::kUnbounded) != v.end()) return Boundedness::kUnbounded;
    if (std::all_of(v.begin(), v.end(), [](Boundedness b) { return b == Boundedness::kBounded; })) {
      return Boundedness::kBounded;
    }
    return Boundedness::kInconclusive;
  };

  std::vector<Boundedness> v13, v14;
  for (double alpha : {0.5, 1.0, 2.0}) {
    std::vector<double> lr;
    nlohmann::json ev;
    ev["alpha"] = alpha;
    for (double s : log_n) {
      const double ys = m.Winv_log(m.W_at_log(s) + alpha);
      lr.push_back(ys - s);
      ev["ratio"].push_back({std::exp(s), std::isfinite(ys) ? std::exp(ys - s) : kInf});
    }
    v13.push_back(judge(lr, ev));
    ev["verdict"] = to_string(v13.back());
    out.evidence["cond_13"].push_back(ev);
  }
  for (double c : {2.0, 4.0, 8.0}) {
    std::vector<double> lr;
    nlohmann::json ev;
    ev["c"] = c;
    for (double s : log_n) {
      const double r = m.log_w_at_log(s + std::log(c)) - m.log_w_at_log(s);
      lr.push_back(r);
      ev["ratio"].push_back({std::exp(s), std::exp(r)});
    }
    v14.push_back(judge(lr, ev));
    ev["verdict"] = to_string(v14.back());
    out.evidence["cond_14"].push_back(ev);
  }
  out.cond_13 = merge(v13);
  out.cond_14 = merge(v14);
  return out;
}

}  // namespace vrrw

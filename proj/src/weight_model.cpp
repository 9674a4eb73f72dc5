#include <algorithm>
#include <cmath>
#include <limits>

#include "vrrw/detail/gauss_legendre.hpp"
#include "vrrw/errors.hpp"
#include "vrrw/weights.hpp"

namespace vrrw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Past this point t is no longer an exact integer grid in double.
constexpr double kExactArg = 0x1p52;
const double kLogExactArg = std::log(kExactArg);
constexpr double kGridStep = 1.0 / 16.0;

const auto& quad() { return detail::gauss_legendre<10>(); }

}  // namespace

// ---------------------------------------------------------------------------
// PrefixTable

PrefixTable::PrefixTable(const WeightSpec& spec, std::uint64_t cap) : spec_(spec), cap_(cap) {
  if (cap_ < 2) throw ConfigError("prefix table cap must be at least 2");
  s1_.reserve((cap_ >> kChunkBits) + 2);
  s2_.reserve((cap_ >> kChunkBits) + 2);
  s1_.push_back(std::make_unique<double[]>(kChunk));
  s2_.push_back(std::make_unique<double[]>(kChunk));
  s1_[0][0] = 0.0;
  s2_[0][0] = 0.0;
  size_.store(1, std::memory_order_release);
  ensure(std::min<std::uint64_t>(cap_, 1024));
}

std::uint64_t PrefixTable::ensure(std::uint64_t m) {
  m = std::min(m, cap_);
  std::uint64_t size = size_.load(std::memory_order_acquire);
  if (m < size) return size - 1;
  if (frozen_) {
    throw ResourceError("prefix table is frozen at " + std::to_string(size - 1),
                        static_cast<double>(size - 1));
  }
  // Doubling growth, clamped to the cap.
  const std::uint64_t target = std::min(cap_, std::max(m, 2 * (size - 1)));
  for (std::uint64_t k = size - 1; k < target; ++k) {
    const std::uint64_t idx = k + 1;
    if ((idx >> kChunkBits) >= s1_.size()) {
      s1_.push_back(std::make_unique<double[]>(kChunk));
      s2_.push_back(std::make_unique<double[]>(kChunk));
    }
    const double inv = 1.0 / spec_(k);
    acc1_ += inv;
    acc2_ += inv * inv;
    s1_[idx >> kChunkBits][idx & (kChunk - 1)] = acc1_.value();
    s2_[idx >> kChunkBits][idx & (kChunk - 1)] = acc2_.value();
  }
  size_.store(target + 1, std::memory_order_release);
  return target;
}

template <class Getter>
std::uint64_t PrefixTable::locate(double u, Getter get) const {
  std::uint64_t lo = 0, hi = capacity();
  if (get(hi) <= u) return hi;
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (get(mid) <= u) lo = mid;
    else hi = mid;
  }
  return lo;
}

std::uint64_t PrefixTable::locate_s1(double u) const {
  return locate(u, [this](std::uint64_t m) { return s1(m); });
}

std::uint64_t PrefixTable::locate_s2(double u) const {
  return locate(u, [this](std::uint64_t m) { return s2(m); });
}

void PrefixTable::corrupt_s1_for_testing(std::uint64_t m, double value) {
  s1_[m >> kChunkBits][m & (kChunk - 1)] = value;
}

// ---------------------------------------------------------------------------
// Tail model: for t >= C (the table cap) the sums are replaced by
//   sum_{k=C}^{m-1} f(k) ~ int_C^m f + (f(C) - f(m))/2 + (f'(m) - f'(C))/12
// with f = 1/w_c (or 1/w_c^2), and the integral tabulated on a uniform grid in
// s = log t with 10-point Gauss-Legendre cells.

struct WeightModel::Tail {
  struct Channel {
    int power = 1;  // integrand exp(s - power * L(s))
    double base = 0.0;     // exact S[C]
    double offset = 0.0;   // f(C)/2 - f'(C)/12
    std::vector<double> cum{0.0};
    bool exhausted = false;
    bool converged = false;
    int flat_cells = 0;
  };

  const WeightModel* model;
  double C = 0.0;
  double s0 = 0.0;
  Channel ch[2];

  double L(double s) const { return model->spec().log_continuous_at_log(s); }

  double integrand(const Channel& c, double s) const {
    return std::exp(s - c.power * L(s));
  }

  // f(t)^p and its t-derivative at integer or real t (smooth extension).
  double fpow(const Channel& c, double t) const {
    return std::exp(-c.power * L(std::log(t)));
  }
  double fpow_deriv(const Channel& c, double t) const {
    const double s = std::log(t), d = 1e-5;
    const double dL = (L(s + d) - L(s - d)) / (2 * d);
    return -c.power * dL * fpow(c, t) / t;
  }

  void init(Channel& c, int power, double base) {
    c.power = power;
    c.base = base;
    c.offset = fpow(c, C) / 2 - fpow_deriv(c, C) / 12;
  }

  bool extend(Channel& c) {
    if (c.exhausted || c.converged) return false;
    const std::size_t j = c.cum.size() - 1;
    const double a = s0 + static_cast<double>(j) * kGridStep;
    if (a + kGridStep > model->options().max_log_arg) {
      c.exhausted = true;
      return false;
    }
    const double inc = quad().integrate([&](double s) { return integrand(c, s); }, a, a + kGridStep);
    const double next = c.cum.back() + inc;
    if (!std::isfinite(next)) {
      c.exhausted = true;
      return false;
    }
    c.cum.push_back(next);
    if (inc <= 1e-18 * (c.base + next)) {
      if (++c.flat_cells >= 32) c.converged = true;
    } else {
      c.flat_cells = 0;
    }
    return true;
  }

  double grid_end(const Channel& c) const {
    return s0 + static_cast<double>(c.cum.size() - 1) * kGridStep;
  }

  // int_C^{e^s} f^p.
  double G(Channel& c, double s) {
    if (s <= s0) return 0.0;
    const double rel = (s - s0) / kGridStep;
    const auto j = static_cast<std::size_t>(rel);
    while (c.cum.size() <= j + 1) {
      if (!extend(c)) {
        if (c.converged) return c.cum.back();
        throw ResourceError("tail model exhausted at log-argument " + std::to_string(grid_end(c)),
                            grid_end(c));
      }
    }
    const double a = s0 + static_cast<double>(j) * kGridStep;
    return c.cum[j] + quad().integrate([&](double x) { return integrand(c, x); }, a, s);
  }

  // Sum-with-floor value at log-argument s.
  double value_at_log(Channel& c, double s) {
    if (s < kLogExactArg) {
      const double t = std::exp(s);
      double m = std::floor(t);
      if (m < C) m = C;
      const double fm = fpow(c, m);
      return c.base + c.offset + G(c, std::log(m)) - fm / 2 + fpow_deriv(c, m) / 12 + (t - m) * fm;
    }
    return c.base + c.offset + G(c, s) - std::exp(-c.power * L(s)) / 2;
  }

  double sup(Channel& c) {
    while (extend(c)) {
    }
    if (c.converged || c.exhausted) return c.base + c.offset + c.cum.back();
    return c.base + c.offset + c.cum.back();
  }

  // Solves value_at_log(c, s) = u for s >= s0; returns +inf when u is past the
  // supremum of a convergent channel.
  double invert_log(Channel& c, double u) {
    // Find a grid cell whose right end reaches u.
    std::size_t j = 0;
    for (;;) {
      const std::size_t last = c.cum.size() - 1;
      if (c.base + c.offset + c.cum[last] > u) break;
      if (!extend(c)) {
        if (c.converged) return kInf;
        throw ResourceError("inverse exceeds tail model range (log-argument " +
                            std::to_string(grid_end(c)) + ")",
                            grid_end(c));
      }
    }
    {
      std::size_t lo = 0, hi = c.cum.size() - 1;
      while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (c.base + c.offset + c.cum[mid] <= u) lo = mid;
        else hi = mid;
      }
      j = lo;
    }
    double a = s0 + static_cast<double>(j) * kGridStep;
    double b = a + kGridStep;
    // One-cell slack on each side covers the -f/2 correction terms.
    a = std::max(s0, a - kGridStep);
    b = b + kGridStep;
    while (c.cum.size() <= j + 3 && extend(c)) {
    }
    auto F = [&](double s) { return value_at_log(c, s) - u; };
    double fa = F(a), fb = F(b);
    if (fa > 0) return a;
    if (fb < 0) b = grid_end(c), fb = F(b);
    double s = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
      const double fs = F(s);
      if (fs == 0) break;
      if (fs < 0) a = s;
      else b = s;
      const double deriv = integrand(c, s);
      double next = s - fs / deriv;
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - s) <= 1e-15 * std::max(1.0, std::abs(s)) || b - a <= 1e-15 * std::abs(b)) {
        s = next;
        break;
      }
      s = next;
    }
    if (s >= kLogExactArg) return s;
    // Snap onto the piecewise-linear structure between integer knots.
    double m = std::max(C, std::floor(std::exp(s)));
    auto at_int = [&](double k) { return value_at_log(c, std::log(k)); };
    while (m > C && at_int(m) > u) m -= 1;
    while (at_int(m + 1) <= u) m += 1;
    const double t = m + (u - at_int(m)) / fpow(c, m);
    return std::log(t);
  }
};

struct WeightModel::HKnots {
  std::vector<double> knot{0.0};  // knot[0] = 0, knot[m] = H(m)
  std::vector<double> acc{0.0};   // Vtilde(knot[m])
  bool complete = false;          // reached H(m) = +inf
  std::uint64_t cap = 0;

  bool tail_ready = false;
  double z0 = 0.0, s0 = 0.0;
  std::vector<double> cum{0.0};
};

// ---------------------------------------------------------------------------

WeightModel::WeightModel(WeightSpec spec, WeightModelOptions opts)
    : spec_(std::move(spec)), opts_(opts) {
  std::uint64_t cap = opts_.table_cap;
  if (auto n = spec_.table_size()) {
    if (spec_.tail_rule().kind == TailRule::Kind::kNone) cap = *n;
    else cap = std::max<std::uint64_t>(cap, *n);
  }
  table_ = std::make_unique<PrefixTable>(spec_, std::max<std::uint64_t>(cap, 2));
  hknots_ = std::make_unique<HKnots>();
  hknots_->cap = std::min<std::uint64_t>(opts_.table_cap, std::uint64_t{1} << 20);
}

WeightModel::~WeightModel() = default;

void WeightModel::freeze() {
  table_->freeze();
  frozen_ = true;
}

double WeightModel::exact_limit() const { return static_cast<double>(table_->cap()); }

WeightModel::Tail& WeightModel::tail() const {
  if (!tail_) {
    if (spec_.table_size() && spec_.tail_rule().kind == TailRule::Kind::kNone) {
      throw DomainError("tabulated weight has no tail rule; refusing to extrapolate past n = " +
                        std::to_string(*spec_.table_size() - 1));
    }
    if (frozen_) throw ResourceError("model is frozen; tail model not built", exact_limit());
    table_->ensure(table_->cap());
    auto t = std::make_unique<Tail>();
    t->model = this;
    t->C = exact_limit();
    t->s0 = std::log(t->C);
    t->init(t->ch[0], 1, table_->s1(table_->cap()));
    t->init(t->ch[1], 2, table_->s2(table_->cap()));
    tail_ = std::move(t);
  }
  used_tail_ = true;
  return *tail_;
}

double WeightModel::w_at(double t) const {
  if (t < kExactArg) return spec_(static_cast<std::uint64_t>(t));
  return std::exp(spec_.log_continuous_at_log(std::log(t)));
}

double WeightModel::log_w_at_log(double s) const {
  if (s < kLogExactArg) return std::log(spec_(static_cast<std::uint64_t>(std::exp(s))));
  return spec_.log_continuous_at_log(s);
}

static bool is_constant(const WeightSpec& s) { return s.family() == WeightFamily::kConstant; }

double WeightModel::W_table(double t) const {
  const auto m = static_cast<std::uint64_t>(t);
  table_->ensure(m);
  const double frac = t - static_cast<double>(m);
  return frac == 0.0 ? table_->s1(m) : table_->s1(m) + frac / spec_(m);
}

double WeightModel::V_table(double t) const {
  const auto m = static_cast<std::uint64_t>(t);
  table_->ensure(m);
  const double frac = t - static_cast<double>(m);
  if (frac == 0.0) return table_->s2(m);
  const double w = spec_(m);
  return table_->s2(m) + frac / (w * w);
}

double WeightModel::W(double t) const {
  if (!(t >= 0.0)) throw DomainError("W(t) requires t >= 0");
  if (is_constant(spec_)) return t / spec_(0);
  if (std::isinf(t)) return W_sup();
  if (t < exact_limit()) return W_table(t);
  return tail().value_at_log(tail().ch[0], std::log(t));
}

double WeightModel::W_at_log(double s) const {
  if (is_constant(spec_)) return std::exp(s) / spec_(0);
  if (s < std::log(exact_limit())) return W(std::exp(s));
  return tail().value_at_log(tail().ch[0], s);
}

double WeightModel::W_sup() const {
  if (!spec_.reciprocal_summable()) return kInf;
  return tail().sup(tail().ch[0]);
}

double WeightModel::Winv_log(double u) const {
  if (u <= 0.0) return -kInf;
  if (is_constant(spec_)) return std::log(u * spec_(0));
  if (u >= W_sup()) return kInf;
  // Grow the exact table until it brackets u or hits the cap.
  auto& tab = *table_;
  while (tab.s1(tab.capacity()) <= u && tab.capacity() < tab.cap()) {
    tab.ensure(2 * tab.capacity());
  }
  if (tab.s1(tab.capacity()) > u) {
    const std::uint64_t m = tab.locate_s1(u);
    const double t = static_cast<double>(m) + (u - tab.s1(m)) * spec_(m);
    return std::log(t);
  }
  return tail().invert_log(tail().ch[0], u);
}

double WeightModel::Winv(double u) const {
  if (u <= 0.0) return 0.0;
  if (is_constant(spec_)) return u * spec_(0);
  auto& tab = *table_;
  if (u < tab.s1(tab.capacity())) {
    const std::uint64_t m = tab.locate_s1(u);
    return static_cast<double>(m) + (u - tab.s1(m)) * spec_(m);
  }
  const double s = Winv_log(u);
  if (std::isinf(s)) return s > 0 ? kInf : 0.0;
  if (s > 709.0) {
    throw ResourceError("W^{-1}(u) overflows double (log = " + std::to_string(s) + ")", s);
  }
  if (s < kLogExactArg) {
    // Recompute from the exact table when the answer landed inside it.
    const double t = std::exp(s);
    if (t < exact_limit()) {
      const std::uint64_t m = tab.locate_s1(u);
      return static_cast<double>(m) + (u - tab.s1(m)) * spec_(m);
    }
    return t;
  }
  return std::exp(s);
}

double WeightModel::V(double t) const {
  if (!(t >= 0.0)) throw DomainError("V(t) requires t >= 0");
  if (is_constant(spec_)) return t / (spec_(0) * spec_(0));
  if (std::isinf(t)) {
    if (!spec_.reciprocal_summable()) return kInf;
    return tail().sup(tail().ch[1]);
  }
  if (t < exact_limit()) return V_table(t);
  return tail().value_at_log(tail().ch[1], std::log(t));
}

double WeightModel::V_at_log(double s) const {
  if (is_constant(spec_)) return std::exp(s) / (spec_(0) * spec_(0));
  if (s < std::log(exact_limit())) return V(std::exp(s));
  return tail().value_at_log(tail().ch[1], s);
}

// ---------------------------------------------------------------------------
// H(x) = x + W^{-1}(W(x) + 1)

double WeightModel::H(double x) const {
  if (!(x >= 0.0)) throw DomainError("H(x) requires x >= 0");
  if (std::isinf(x)) return kInf;
  return x + Winv(W(x) + 1.0);
}

double WeightModel::H_log(double log_x) const {
  if (log_x < kLogExactArg) return std::log(H(std::exp(log_x)));
  return detail::log_add_exp(log_x, Winv_log(W_at_log(log_x) + 1.0));
}

namespace {

// Bisection on a monotone function over [lo, hi], finished with one secant
// step. f(lo) <= y <= f(hi) is assumed.
template <class F>
double monotone_solve(F&& f, double y, double lo, double hi, double tol) {
  double flo = f(lo), fhi = f(hi);
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm <= y) lo = mid, flo = fm;
    else hi = mid, fhi = fm;
  }
  if (std::isfinite(fhi) && fhi > flo) {
    return std::clamp(lo + (y - flo) * (hi - lo) / (fhi - flo), lo, hi);
  }
  return lo;
}

}  // namespace

void WeightModel::grow_knots(double y) const {
  auto& k = *hknots_;
  auto grow = [&] {
    const std::size_t m = k.knot.size();
    const double hm = H(static_cast<double>(m));
    if (std::isinf(hm)) {
      k.complete = true;
      return;
    }
    const double prev = k.knot.back();
    k.acc.push_back(k.acc.back() + (W(hm) - W(prev)) / spec_(m - 1));
    k.knot.push_back(hm);
  };
  while (!k.complete && k.knot.back() <= y && k.knot.size() <= k.cap) {
    if (frozen_) throw ResourceError("model is frozen; H knots exhausted", k.knot.back());
    const std::size_t target = 2 * k.knot.size();
    while (!k.complete && k.knot.size() < target && k.knot.size() <= k.cap) grow();
  }
}

bool WeightModel::within_knots(double y) const {
  return hknots_->complete || y < hknots_->knot.back();
}

double WeightModel::Hinv_clamped(double y) const {
  if (std::isnan(y)) throw DomainError("H^{-1}(NaN)");
  const double h0 = H(0.0);
  if (y <= h0) return 0.0;
  auto& k = *hknots_;
  grow_knots(y);
  const double tol = opts_.hinv_rel_tol * std::max(1.0, y);
  if (within_knots(y)) {
    const auto it = std::upper_bound(k.knot.begin(), k.knot.end(), y);
    const auto M = static_cast<double>(std::distance(k.knot.begin(), it) - 1);
    double hi = M + 1.0;
    if (k.complete && it == k.knot.end()) {
      // H blows up inside [M, M+1): bracket below the blow-up point.
      const double ws = W_sup();
      hi = Winv(std::nextafter(ws - 1.0, -kInf));
      if (std::isinf(y)) return hi;
    }
    return monotone_solve([&](double x) { return H(x); }, y, M, hi, tol);
  }
  return std::exp(Hinv_clamped_log(std::log(y)));
}

double WeightModel::Hinv(double y) const {
  if (!(y >= H(0.0))) throw DomainError("H^{-1}(y) requires y >= H(0)");
  return Hinv_clamped(y);
}

double WeightModel::Hinv_clamped_log(double log_y) const {
  if (log_y < kLogExactArg) {
    const double y = std::exp(log_y);
    grow_knots(y);
    if (y <= H(0.0)) return -kInf;
    if (within_knots(y)) return std::log(Hinv_clamped(y));
  } else {
    grow_knots(kInf);
  }
  // Beyond the knot table: bisection on log x. H(x) >= x gives log y as an
  // upper bound; H(x) <= y at the last knot gives the lower one.
  const double lo = std::log(std::max(1.0, static_cast<double>(hknots_->knot.size() - 1)));
  return monotone_solve([&](double s) { return H_log(s); }, log_y, lo, log_y, 1e-15 * log_y);
}

double WeightModel::Vtilde(double y) const {
  if (y <= 0.0) return 0.0;
  if (std::isinf(y) && !spec_.reciprocal_summable()) return kInf;
  grow_knots(y);
  if (within_knots(y)) return vtilde_knots(y, W(y));
  return vtilde_tail(Hinv_clamped_log(std::log(y)));
}

double WeightModel::Vtilde_at_log(double log_y) const {
  if (log_y < kLogExactArg) return Vtilde(std::exp(log_y));
  grow_knots(kInf);
  if (hknots_->complete) return vtilde_knots(kInf, W_at_log(log_y));
  return vtilde_tail(Hinv_clamped_log(log_y));
}

double WeightModel::vtilde_knots(double y, double Wy) const {
  const auto& k = *hknots_;
  const auto it = std::upper_bound(k.knot.begin(), k.knot.end(), y);
  const auto M = static_cast<std::size_t>(std::distance(k.knot.begin(), it) - 1);
  return k.acc[M] + (Wy - W(k.knot[M])) / spec_(M);
}

// Past the knots, with v = H(zeta):
//   Vtilde(H(z)) = Vtilde(H(Mc)) + int_Mc^z H'(zeta) d zeta / (w(H(zeta)) w(zeta))
// where H' = 1 + w(Q)/w(zeta), Q = W^{-1}(W(zeta) + 1), and the floor in
// w(zeta) is replaced by the continuous weight at zeta - 1/2.
double WeightModel::vtilde_tail(double sz) const {
  auto& k = *hknots_;
  if (!k.tail_ready) {
    if (frozen_) throw ResourceError("model is frozen; J-tilde tail not built", k.knot.back());
    k.z0 = static_cast<double>(k.knot.size() - 1);
    k.s0 = std::log(k.z0);
    k.tail_ready = true;
  }
  const auto& sp = spec_;
  auto integrand = [&](double s) {
    const double logQ = Winv_log(W_at_log(s) + 1.0);
    if (std::isinf(logQ)) return 0.0;
    const double Ls = sp.log_continuous_at_log(s);
    const double logH = detail::log_add_exp(s, logQ);
    const double logHprime = std::log1p(std::exp(sp.log_continuous_at_log(logQ) - Ls));
    const double Lhalf = sp.log_continuous_at_log(s + std::log1p(-0.5 * std::exp(-s)));
    return std::exp(s + logHprime - sp.log_continuous_at_log(logH) - Lhalf);
  };
  const double rel = (sz - k.s0) / kGridStep;
  const auto j = static_cast<std::size_t>(std::max(0.0, rel));
  while (k.cum.size() <= j + 1) {
    const double a = k.s0 + static_cast<double>(k.cum.size() - 1) * kGridStep;
    k.cum.push_back(k.cum.back() + quad().integrate(integrand, a, a + kGridStep));
  }
  used_tail_ = true;
  const double a = k.s0 + static_cast<double>(j) * kGridStep;
  return k.acc.back() + k.cum[j] + quad().integrate(integrand, a, std::max(a, sz));
}

}  // namespace vrrw

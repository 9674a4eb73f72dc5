#pragma once

// Reference computations kept deliberately naive and separate from the
// library: long-double prefix sums, monotone pointer sweeps instead of
// binary searches, and midpoint Riemann sums instead of cell transforms.

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace vrrw {
class WeightSpec;
}

namespace vrrw::oracle {

class BruteWeight {
 public:
  BruteWeight(const WeightSpec& spec, std::uint64_t n_max);

  // Index size() stands for "past the table", which is only legitimate when
  // sum 1/w converges; there w is read as +inf.
  double w(std::uint64_t n) const {
    return n < w_.size() ? static_cast<double>(w_[n]) : std::numeric_limits<double>::infinity();
  }
  std::uint64_t size() const { return w_.size(); }

  long double W(long double t) const;
  // Largest m with S1[m] <= u (0 for u < 0).
  std::uint64_t floor_Winv(long double u) const;
  long double Winv(long double u) const;
  long double H(long double x) const;
  // floor(H^{-1}(y)) with H^{-1} clamped to 0 below H(0).
  std::uint64_t floor_Hinv(long double y) const;

 private:
  std::vector<long double> w_;
  std::vector<long double> s1_;
  bool summable_;
};

// Midpoint Riemann sums of the three integrands on [0, T] with step h.
double riemann_I(const BruteWeight& b, double alpha, double T, double h);
double riemann_J(const BruteWeight& b, double beta, double T, double h);
double riemann_J_tilde(const BruteWeight& b, double beta, double T, double h);

// J_beta on [0, T] by literal breakpoint enumeration: the integrand is
// 1/w(m) for x in [W^{-1}((S1[m] - beta)/2), W^{-1}((S1[m+1] - beta)/2)).
double breakpoint_J(const BruteWeight& b, double beta, double T);

// Plain partial sums of 1/w(n)^p for n < N.
long double partial_series(const WeightSpec& spec, int p, std::uint64_t N);

}  // namespace vrrw::oracle

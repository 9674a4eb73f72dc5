#pragma once

#include <cmath>

namespace vrrw {

// Neumaier's variant of Kahan summation: the correction term also captures
// the case where the addend is larger than the running sum.
class CompensatedSum {
 public:
  constexpr CompensatedSum() = default;
  constexpr explicit CompensatedSum(double v) : sum_(v) {}

  constexpr CompensatedSum& operator+=(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  constexpr CompensatedSum& operator-=(double x) { return *this += -x; }

  constexpr double value() const { return sum_ + comp_; }
  constexpr double raw_sum() const { return sum_; }
  constexpr double correction() const { return comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace vrrw

#pragma once

#include <cmath>

namespace pdmp {

/// Kahan-Babuska (Neumaier) running sum.
///
/// Unlike plain Kahan summation, the compensation stays correct when the
/// incoming term is larger than the running total, which happens early in a
/// stream whose terms grow like j^(2 d beta).
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double term) {
    const double t = sum_ + term;
    if (std::fabs(sum_) >= std::fabs(term)) {
      carry_ += (sum_ - t) + term;
    } else {
      carry_ += (term - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  double value() const { return sum_ + carry_; }
  double raw_sum() const { return sum_; }
  double carry() const { return carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace pdmp

#pragma once

#include <cmath>

namespace acprop_lab {

/// Compensated accumulator (Neumaier's variant of Kahan summation).
///
/// Unlike plain Kahan, the compensation stays correct when an addend is larger
/// in magnitude than the running sum, which happens at the start of
/// alternating series.
template <typename Value>
class KahanSum {
 public:
  KahanSum() = default;
  explicit KahanSum(Value initial) : sum_(initial) {}

  KahanSum& operator+=(Value value) {
    const Value t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  KahanSum& operator-=(Value value) { return *this += -value; }

  Value value() const { return sum_ + compensation_; }
  explicit operator Value() const { return value(); }

 private:
  Value sum_{0};
  Value compensation_{0};
};

}  // namespace acprop_lab

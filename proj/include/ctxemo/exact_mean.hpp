#pragma once

#include <cmath>

namespace ctxemo {

/// Weighted mean accumulated in double-double arithmetic and rounded once,
/// so the mean of identical values is that value and small-integer weighted
/// means round like the exact rational result.
class MeanAccumulator {
 public:
  void add(double x, double weight = 1.0) {
    // Exact product via fma, then two exact sums.
    const double p = weight * x;
    const double p_err = std::fma(weight, x, -p);
    add_dd(sum_hi_, sum_lo_, p, p_err);
    add_dd(weight_hi_, weight_lo_, weight, 0.0);
  }

  double mean() const {
    const double q1 = sum_hi_ / weight_hi_;
    const double p = q1 * weight_hi_;
    const double p_err = std::fma(q1, weight_hi_, -p);
    const double r = ((sum_hi_ - p) - p_err) + sum_lo_ - q1 * weight_lo_;
    return q1 + r / weight_hi_;
  }

  double total_weight() const { return weight_hi_ + weight_lo_; }

 private:
  static void add_dd(double& hi, double& lo, double x, double x_err) {
    const double s = hi + x;
    const double bb = s - hi;
    const double err = (hi - (s - bb)) + (x - bb);
    lo += err + x_err;
    hi = s + lo;
    lo -= hi - s;
  }

  double sum_hi_ = 0.0, sum_lo_ = 0.0;
  double weight_hi_ = 0.0, weight_lo_ = 0.0;
};

}  // namespace ctxemo

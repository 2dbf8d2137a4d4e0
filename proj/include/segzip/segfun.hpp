#ifndef SEGZIP_SEGFUN_HPP
#define SEGZIP_SEGFUN_HPP

namespace segzip {

// Segmentation function attached to the post-changepoint regime:
// hinge (t - psi)_+ or its square.
enum class SegmentationKind { Linear, Quadratic };

// Open interval (l1, l2) the changepoint is constrained to.
struct ChangepointBounds {
  double l1 = 0.0;
  double l2 = 1.0;

  bool valid() const;
  double width() const { return l2 - l1; }
};

// f(t, psi): 0 for t <= psi, else (t - psi) or (t - psi)^2.
double seg_value(SegmentationKind kind, double t, double psi);

// d f / d psi with a strict indicator at the kink (0 at t == psi):
// Linear -> -1{t > psi}; Quadratic -> -2 (t - psi) 1{t > psi}.
double seg_dpsi(SegmentationKind kind, double t, double psi);

// Bounded logistic changepoint transform psi(lambda) = l1 + (l2-l1) *
// inv_logit(lambda).  Strictly increasing; the image is kept inside the open
// interval (saturated values are nudged one ulp off the bounds).
double cp_from_lambda(double lambda, const ChangepointBounds& b);

// d psi / d lambda = (l2 - l1) e^lambda / (1 + e^lambda)^2.
double cp_derivative(double lambda, const ChangepointBounds& b);

// Inverse transform log((psi - l1) / (l2 - psi)); psi must lie strictly
// inside the interval.
double lambda_from_cp(double psi, const ChangepointBounds& b);

}  // namespace segzip

#endif

#include "segzip/segfun.hpp"

#include <cmath>
#include <stdexcept>

#include "segzip/zip.hpp"

namespace segzip {

bool ChangepointBounds::valid() const {
  return std::isfinite(l1) && std::isfinite(l2) && l1 < l2;
}

namespace {

void check(const ChangepointBounds& b) {
  if (!b.valid())
    throw std::domain_error("ChangepointBounds: need l1 < l2");
}

}  // namespace

double seg_value(SegmentationKind kind, double t, double psi) {
  const double d = t - psi;
  if (d <= 0.0) return 0.0;
  return kind == SegmentationKind::Linear ? d : d * d;
}

double seg_dpsi(SegmentationKind kind, double t, double psi) {
  const double d = t - psi;
  if (d <= 0.0) return 0.0;
  return kind == SegmentationKind::Linear ? -1.0 : -2.0 * d;
}

double cp_from_lambda(double lambda, const ChangepointBounds& b) {
  check(b);
  double psi = b.l1 + b.width() * inv_logit(lambda);
  // keep the image strictly inside (l1, l2) even when inv_logit saturates
  if (psi <= b.l1) psi = std::nextafter(b.l1, b.l2);
  if (psi >= b.l2) psi = std::nextafter(b.l2, b.l1);
  return psi;
}

double cp_derivative(double lambda, const ChangepointBounds& b) {
  check(b);
  return b.width() * inv_logit(lambda) * inv_logit(-lambda);
}

double lambda_from_cp(double psi, const ChangepointBounds& b) {
  check(b);
  if (!(psi > b.l1 && psi < b.l2))
    throw std::domain_error(
        "lambda_from_cp: psi must lie strictly inside (l1, l2)");
  return std::log(psi - b.l1) - std::log(b.l2 - psi);
}

}  // namespace segzip

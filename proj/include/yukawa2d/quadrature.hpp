#pragma once

#include <functional>
#include <string>
#include <vector>

namespace yukawa {

// Correction rule for periodic integrands with a log singularity at a grid
// node: trapezoid outside a band of half-width a spacings, plus `nodes`
// off-grid correction points at offsets v (weights u, both in units of h)
// mirrored on each side of the singularity. order = 0 is the punctured
// trapezoid; the caller reinstates the singular sample itself when the
// integrand has a finite limit there.
struct AlpertRule {
  int order = 0;
  int a = 1;
  int nodes = 0;
  std::vector<long double> v;
  std::vector<long double> u;
};

// order in {0, 2, 4, 8, 16}
const AlpertRule& alpert_rule(int order);

// Decimal forms of the same tables (48 digits) for order studies run in
// software arithmetic; the deep rules converge below any hardware float
// within their usable sample range. Empty for order 0.
struct AlpertRuleStrings {
  std::vector<std::string> v;
  std::vector<std::string> u;
};
const AlpertRuleStrings& alpert_rule_strings(int order);

// Integral over [0, 2pi) of a periodic integrand with a log singularity at
// node singular_index. Off-grid values come from offgrid(param) when given,
// otherwise from the trigonometric interpolant of the samples.
double integrate_log_singular(const std::vector<double>& samples,
                              int singular_index, const AlpertRule& rule,
                              const std::function<double(double)>* offgrid = nullptr);

// Extended-precision variant for order-verification studies near the double
// roundoff floor; the integrand is evaluated directly everywhere.
long double integrate_log_singular_ld(
    const std::function<long double(long double)>& f, int N, int singular_index,
    const AlpertRule& rule);

}  // namespace yukawa

#include "yukawa2d/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include "yukawa2d/geometry.hpp"

namespace yukawa {

namespace {

constexpr long double kTwoPi = 6.283185307179586476925286766559005768L;

#include "alpert_tables.inc"

AlpertRule make_rule(const LogRuleEntry& e) {
  AlpertRule r;
  r.order = e.order;
  r.a = e.a;
  r.nodes = e.nodes;
  r.v.assign(e.v, e.v + e.nodes);
  r.u.assign(e.u, e.u + e.nodes);
  return r;
}

template <typename Real, typename NodeF, typename OffF>
Real integrate_core(int N, int j, const AlpertRule& rule, NodeF&& at_node,
                    OffF&& off_grid) {
  if (N < 4 * rule.a + 2 * rule.nodes)
    throw std::invalid_argument("rule band too wide for the sample count");
  const Real h = kTwoPi / N;
  // compensated sums: order studies measure errors near the roundoff floor
  Real s = 0, se = 0;
  for (int n = j + rule.a; n <= N + j - rule.a; ++n) {
    const Real y = at_node(((n % N) + N) % N) - se;
    const Real t = s + y;
    se = (t - s) - y;
    s = t;
  }
  Real c = 0;
  for (int i = 0; i < rule.nodes; ++i) {
    const Real v = (Real)rule.v[i];
    c += (Real)rule.u[i] * (off_grid(j * h + v * h) + off_grid(j * h - v * h));
  }
  return h * s + h * c;
}

}  // namespace

const AlpertRule& alpert_rule(int order) {
  static const std::vector<AlpertRule> rules = [] {
    std::vector<AlpertRule> out;
    for (const LogRuleEntry& e : kLogRules) out.push_back(make_rule(e));
    return out;
  }();
  for (const AlpertRule& r : rules)
    if (r.order == order) return r;
  throw std::invalid_argument("unsupported quadrature order (use 0, 2, 4, 8, or 16)");
}

const AlpertRuleStrings& alpert_rule_strings(int order) {
  static const std::vector<std::pair<int, AlpertRuleStrings>> tables = [] {
    std::vector<std::pair<int, AlpertRuleStrings>> out;
    for (const LogRuleEntry& e : kLogRules) {
      AlpertRuleStrings s;
      for (int i = 0; i < e.nodes; ++i) {
        s.v.emplace_back(e.vs[i]);
        s.u.emplace_back(e.us[i]);
      }
      out.emplace_back(e.order, std::move(s));
    }
    return out;
  }();
  for (const auto& [ord, strs] : tables)
    if (ord == order) return strs;
  throw std::invalid_argument("unsupported quadrature order (use 0, 2, 4, 8, or 16)");
}

double integrate_log_singular(const std::vector<double>& samples,
                              int singular_index, const AlpertRule& rule,
                              const std::function<double(double)>* offgrid) {
  const int N = (int)samples.size();
  if (singular_index < 0 || singular_index >= N)
    throw std::invalid_argument("singular index out of range");
  auto off = [&](double t) {
    if (offgrid) return (*offgrid)(t);
    return fourier_interpolate(samples, {t})[0];
  };
  return integrate_core<double>(N, singular_index, rule,
                                [&](int n) { return samples[n]; }, off);
}

long double integrate_log_singular_ld(
    const std::function<long double(long double)>& f, int N, int singular_index,
    const AlpertRule& rule) {
  const long double h = kTwoPi / N;
  return integrate_core<long double>(
      N, singular_index, rule, [&](int n) { return f(n * h); }, f);
}

}  // namespace yukawa

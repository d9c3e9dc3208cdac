#include "anymdp/eval/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "anymdp/core/solvers.hpp"

namespace anymdp {

bool decay_admissible(double eta, std::size_t band_up) {
  const double b = static_cast<double>(band_up);
  return eta > b / (b + 1.0);
}

WorstCaseKernels build_worst_case_kernels_unchecked(std::size_t n, double eta, double eps,
                                                    std::size_t band_up, std::size_t band_down) {
  if (n < 2) throw std::invalid_argument("worst-case kernels: n_states must be at least 2");
  if (band_up == 0 || band_down == 0)
    throw std::invalid_argument("worst-case kernels: band_up and band_down must be at least 1");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("worst-case kernels: need 0 < eta < 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("worst-case kernels: need 0 < eps < 1");
  WorstCaseKernels k{Matrix(n, n), Matrix(n, n)};
  const auto clamp = [n](std::ptrdiff_t j) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto si = static_cast<std::ptrdiff_t>(i);
    k.plus(i, clamp(si - 1)) += eta;
    k.plus(i, clamp(si + static_cast<std::ptrdiff_t>(band_up))) += 1.0 - eta;
    k.minus(i, clamp(si - static_cast<std::ptrdiff_t>(band_down))) += 1.0 - eps;
    k.minus(i, clamp(si + 1)) += eps;
  }
  return k;
}

WorstCaseKernels build_worst_case_kernels(std::size_t n, double eta, double eps,
                                          std::size_t band_up, std::size_t band_down) {
  if (!decay_admissible(eta, band_up)) {
    std::ostringstream os;
    os << "worst-case kernels: inadmissible parameters, need eta > b_+/(b_+ + 1) (eta=" << eta
       << ", b_+=" << band_up << ", b_+/(b_+ + 1)="
       << static_cast<double>(band_up) / static_cast<double>(band_up + 1) << ")";
    throw std::invalid_argument(os.str());
  }
  return build_worst_case_kernels_unchecked(n, eta, eps, band_up, band_down);
}

RecurrenceCheck check_plus_recurrence(std::span<const double> p, double eta, std::size_t band_up) {
  const std::size_t n = p.size();
  if (n < band_up + 2) throw std::invalid_argument("recurrence: no interior indices");
  RecurrenceCheck out;
  out.first = band_up;
  out.last = n - 2;
  for (std::size_t j = out.first; j <= out.last; ++j) {
    const double inflow = eta * p[j + 1] + (1.0 - eta) * p[j - band_up];
    const double r = std::fabs(inflow - p[j]);
    out.max_abs_residual = std::max(out.max_abs_residual, r);
    out.max_rel_residual = std::max(out.max_rel_residual, r / p[j]);
    if (j >= 1 && j + band_up < n) {
      const double mirrored = eta * p[j - 1] + (1.0 - eta) * p[j + band_up];
      const double m = std::fabs(mirrored - p[j]);
      out.mirrored_max_abs_residual = std::max(out.mirrored_max_abs_residual, m);
      out.mirrored_max_rel_residual = std::max(out.mirrored_max_rel_residual, m / p[j]);
    }
  }
  return out;
}

RatioCheck check_minus_ratios(std::span<const double> p, double eps) {
  if (p.size() < 2) throw std::invalid_argument("ratio check: need at least two states");
  RatioCheck out;
  out.bound = eps;
  out.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < p.size(); ++j) out.min_ratio = std::min(out.min_ratio, p[j + 1] / p[j]);
  out.pass = out.min_ratio >= eps * (1.0 - 1e-12);
  return out;
}

SlopeFit fit_log_slope(std::span<const double> p, std::size_t first, std::size_t last, double floor) {
  std::vector<double> xs, ys;
  for (std::size_t j = first; j <= last && j < p.size(); ++j) {
    if (!(p[j] >= floor)) continue;
    xs.push_back(static_cast<double>(j));
    ys.push_back(std::log(p[j]));
  }
  const std::size_t m = xs.size();
  if (m < 2) throw std::invalid_argument("slope fit: fewer than two usable points");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  SlopeFit fit;
  fit.n_points = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double e = ys[k] - (fit.intercept + fit.slope * xs[k]);
    sse += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.stderr_slope = m > 2 ? std::sqrt(sse / static_cast<double>(m - 2) / sxx) : 0.0;
  return fit;
}

double sd_log_range(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("log range: empty distribution");
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  if (!(*lo > 0.0)) throw std::domain_error("log range: distribution has a zero entry");
  return std::log(*hi / *lo);
}

std::vector<double> sd_in_rank_order(const TabularTask& task) {
  const std::vector<double> p = stationary_distribution_direct(connect_terminals(task));
  std::vector<double> out(p.size());
  for (std::size_t k = 0; k < task.ranking.size(); ++k) out[k] = p[task.ranking[k]];
  return out;
}

nlohmann::json BoundCheckResult::to_json() const {
  return {{"slope", slope},   {"stderr", stderr_slope}, {"lower", lower},
          {"upper", upper},   {"delta", delta},         {"b", b},                 {"n_points", n_points},
          {"admissible", admissible}, {"pass", pass}};
}

BoundCheckResult check_decay_bounds(std::span<const double> sd, double eta, double eps,
                                    std::size_t band_up, std::size_t band_down,
                                    std::size_t reset_band) {
  BoundCheckResult out;
  const std::size_t n = sd.size();
  out.b = std::max(band_down, reset_band) + band_up;
  out.admissible = decay_admissible(eta, band_up);
  out.lower = std::log(eps);
  if (out.b + 2 > n) throw std::invalid_argument("decay bounds: fewer than two ranks beyond b");
  const SlopeFit fit = fit_log_slope(sd, out.b, n - 1);
  out.slope = fit.slope;
  out.stderr_slope = fit.stderr_slope;
  out.n_points = fit.n_points;
  // Admissible delta closest to the fitted decay 1 - exp(slope).
  const double delta_max = 1.0 / static_cast<double>(band_up + 1);
  const double delta = std::clamp(-std::expm1(out.slope), 1e-12, delta_max * (1.0 - 1e-12));
  out.delta = delta;
  out.upper = std::log1p(-delta);
  out.pass = out.slope >= out.lower - out.stderr_slope && out.slope <= out.upper + out.stderr_slope;
  return out;
}

}  // namespace anymdp

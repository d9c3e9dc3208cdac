#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "anymdp/core/task.hpp"
#include "anymdp/core/tensor.hpp"

namespace anymdp {

// Extremal kernels of the decay argument, in ranking order.
//   plus:  s_i -> s_{i-1} with eta, s_i -> s_{i+b_+} with 1 - eta
//   minus: s_i -> s_{i-b_-} with 1 - eps, s_i -> s_{i+1} with eps
// A move that would leave [0, n) lands on the nearest in-range state.
struct WorstCaseKernels {
  Matrix plus;
  Matrix minus;
};

// Admissible iff some delta in (0, 1/(b_+ + 1)) has eta > 1 - delta, that is
// eta > b_+ / (b_+ + 1).
bool decay_admissible(double eta, std::size_t band_up);

// Throws std::invalid_argument naming the violated inequality when the
// parameters are inadmissible or malformed.
WorstCaseKernels build_worst_case_kernels(std::size_t n_states, double eta, double eps,
                                          std::size_t band_up, std::size_t band_down);
// Same construction without the admissibility check (shape checks remain).
WorstCaseKernels build_worst_case_kernels_unchecked(std::size_t n_states, double eta, double eps,
                                                    std::size_t band_up, std::size_t band_down);

struct RecurrenceCheck {
  // Balance of the plus kernel's stationary vector at every interior index j
  // in [b_+, n - 2]: p_j = eta p_{j+1} + (1 - eta) p_{j - b_+}.
  double max_abs_residual = 0.0;
  double max_rel_residual = 0.0;
  std::size_t first = 0;
  std::size_t last = 0;
  // The same range under the mirrored form eta p_{j-1} + (1 - eta) p_{j+b_+}
  // = p_j, for reference.
  double mirrored_max_abs_residual = 0.0;
  double mirrored_max_rel_residual = 0.0;
};

RecurrenceCheck check_plus_recurrence(std::span<const double> p, double eta, std::size_t band_up);

struct RatioCheck {
  double min_ratio = 0.0;  // min_j p_{j+1} / p_j
  double bound = 0.0;      // eps
  bool pass = false;       // min_ratio >= eps (1 - 1e-12)
};

RatioCheck check_minus_ratios(std::span<const double> p, double eps);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
};

// Ordinary least squares of log p_j on j over j in [first, last], skipping
// entries below `floor`. Throws std::invalid_argument with fewer than 2 points.
SlopeFit fit_log_slope(std::span<const double> p, std::size_t first, std::size_t last,
                       double floor = 1e-14);

// ln(max p / min p).
double sd_log_range(std::span<const double> p);

// Uniform-policy stationary distribution of the terminal-connected kernel,
// listed in ranking order (entry k belongs to the state at rank k).
std::vector<double> sd_in_rank_order(const TabularTask& task);

struct BoundCheckResult {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double lower = 0.0;  // log eps
  double upper = 0.0;  // log(1 - delta)
  double delta = 0.0;  // admissible delta in (0, 1/(b_+ + 1)) closest to the fit
  std::size_t b = 0;
  std::size_t n_points = 0;
  bool admissible = false;  // eta > b_+/(b_+ + 1), the premise on eta
  bool pass = false;

  nlohmann::json to_json() const;
};

// Fits the rank-ordered stationary log-probabilities over j in (b, n_s]
// (1-based), b = max(b_-, b_0) + b_+, and tests the slope against
// [log eps, log(1 - delta)] with one standard error of slack.
BoundCheckResult check_decay_bounds(std::span<const double> sd_rank_order, double eta, double eps,
                                    std::size_t band_up, std::size_t band_down,
                                    std::size_t reset_band);

}  // namespace anymdp

#include "anymdp/samplers/anymdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "anymdp/core/solvers.hpp"

namespace anymdp {

namespace {

// Exp(1) draw that is strictly positive.
double positive_exp(Rng& rng) {
  double u = 0.0;
  do u = uniform01(rng);
  while (u <= 0.0);
  return -std::log(u);
}

// Uniform draw in the open interval (0, 1).
double open_unit(Rng& rng) {
  double u = 0.0;
  do u = uniform01(rng);
  while (u <= 0.0);
  return u;
}

// Spreads `mass` over row[lo..hi] with flat-Dirichlet weights.
void spread(std::span<double> row, std::size_t lo, std::size_t hi, double mass, Rng& rng) {
  if (lo > hi || mass <= 0.0) return;
  std::vector<double> w(hi - lo + 1);
  double total = 0.0;
  for (double& x : w) total += (x = positive_exp(rng));
  for (std::size_t j = lo; j <= hi; ++j) row[j] = mass * w[j - lo] / total;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

nlohmann::json RewardScales::to_json() const {
  return {{"state_span", state_span},         {"state_offset_max", state_offset_max},
          {"state_exponent", state_exponent}, {"pitfall_min", pitfall_min},       {"pitfall_max", pitfall_max},
          {"goal_bonus_min", goal_bonus_min}, {"goal_bonus_max", goal_bonus_max},
          {"sa_cost_max", sa_cost_max},       {"potential_max", potential_max},
          {"raw_max", raw_max}};
}

RewardScales RewardScales::from_json(const nlohmann::json& j) {
  RewardScales r;
  r.state_span = j.value("state_span", r.state_span);
  r.state_offset_max = j.value("state_offset_max", r.state_offset_max);
  r.state_exponent = j.value("state_exponent", r.state_exponent);
  r.pitfall_min = j.value("pitfall_min", r.pitfall_min);
  r.pitfall_max = j.value("pitfall_max", r.pitfall_max);
  r.goal_bonus_min = j.value("goal_bonus_min", r.goal_bonus_min);
  r.goal_bonus_max = j.value("goal_bonus_max", r.goal_bonus_max);
  r.sa_cost_max = j.value("sa_cost_max", r.sa_cost_max);
  r.potential_max = j.value("potential_max", r.potential_max);
  r.raw_max = j.value("raw_max", r.raw_max);
  return r;
}

AnyMdpConfig AnyMdpConfig::resolve() const {
  AnyMdpConfig c = *this;
  const std::size_t n = n_states;
  if (!c.band_up) c.band_up = n >= 2 ? std::max<std::size_t>(1, n / 4) : 0;
  if (!c.band_down) c.band_down = ceil_div(n, 2);
  if (!c.reset_band) c.reset_band = std::max<std::size_t>(1, ceil_div(n, 8));
  if (!c.ergodicity_power) c.ergodicity_power = 8 * n;
  return c;
}

void AnyMdpConfig::validate() const {
  const AnyMdpConfig c = resolve();
  const std::size_t n = c.n_states;
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid AnyMDP config: " + what);
  };
  if (n == 0 || n > 65535) fail("n_states must lie in [1, 65535]");
  if (c.n_actions == 0 || c.n_actions > 255) fail("n_actions must lie in [1, 255]");
  if (n >= 4 && 4 * *c.band_up > n) fail("band_up must not exceed n_states/4");
  if (n >= 2 && *c.band_up == 0) fail("band_up must be at least 1");
  if (n >= 4 && 2 * *c.band_down < n) fail("band_down must be at least n_states/2");
  if (c.eps_forward < 1e-3) fail("eps_forward must be at least 1e-3");
  if (c.eta) {
    if (*c.eta < 0.5) fail("eta must be at least 0.5");
    if (*c.eta + c.eps_forward >= 1.0) fail("eta + eps_forward must be below 1");
  } else {
    if (c.eta_min < 0.5 || c.eta_max < c.eta_min) fail("eta range must satisfy 0.5 <= min <= max");
    if (c.eta_max + c.eps_forward >= 1.0) fail("eta_max + eps_forward must be below 1");
  }
  if (*c.reset_band == 0 || *c.reset_band > n) fail("reset_band must lie in [1, n_states]");
  if (!(c.discount > 0.0 && c.discount < 1.0)) fail("discount must lie in (0, 1)");
  if (c.max_resamples == 0 || c.row_resamples == 0 || c.reward_resamples == 0)
    fail("resample budgets must be positive");
  if (c.reward_noise_scale < 0.0) fail("reward_noise_scale must be non-negative");
  if (!(c.episode_cap_factor > 0.0)) fail("episode_cap_factor must be positive");
}

nlohmann::json AnyMdpConfig::to_json() const {
  nlohmann::json j = {{"n_states", n_states},
                      {"n_actions", n_actions},
                      {"eta_min", eta_min},
                      {"eta_max", eta_max},
                      {"eps_forward", eps_forward},
                      {"ergodicity_var_tol", ergodicity_var_tol},
                      {"kappa", kappa},
                      {"h0", h0},
                      {"max_resamples", max_resamples},
                      {"row_resamples", row_resamples},
                      {"reward_resamples", reward_resamples},
                      {"reward_noise_scale", reward_noise_scale},
                      {"episode_cap_factor", episode_cap_factor},
                      {"discount", discount},
                      {"rewards", rewards.to_json()}};
  if (band_up) j["band_up"] = *band_up;
  if (band_down) j["band_down"] = *band_down;
  if (eta) j["eta"] = *eta;
  if (reset_band) j["reset_band"] = *reset_band;
  if (ergodicity_power) j["ergodicity_power"] = *ergodicity_power;
  return j;
}

AnyMdpConfig AnyMdpConfig::from_json(const nlohmann::json& j) {
  AnyMdpConfig c;
  c.n_states = j.value("n_states", c.n_states);
  c.n_actions = j.value("n_actions", c.n_actions);
  if (j.contains("band_up")) c.band_up = j.at("band_up").get<std::size_t>();
  if (j.contains("band_down")) c.band_down = j.at("band_down").get<std::size_t>();
  if (j.contains("eta")) c.eta = j.at("eta").get<double>();
  if (j.contains("reset_band")) c.reset_band = j.at("reset_band").get<std::size_t>();
  if (j.contains("ergodicity_power"))
    c.ergodicity_power = j.at("ergodicity_power").get<std::size_t>();
  c.eta_min = j.value("eta_min", c.eta_min);
  c.eta_max = j.value("eta_max", c.eta_max);
  c.eps_forward = j.value("eps_forward", c.eps_forward);
  c.ergodicity_var_tol = j.value("ergodicity_var_tol", c.ergodicity_var_tol);
  c.kappa = j.value("kappa", c.kappa);
  c.h0 = j.value("h0", c.h0);
  c.max_resamples = j.value("max_resamples", c.max_resamples);
  c.row_resamples = j.value("row_resamples", c.row_resamples);
  c.reward_resamples = j.value("reward_resamples", c.reward_resamples);
  c.reward_noise_scale = j.value("reward_noise_scale", c.reward_noise_scale);
  c.episode_cap_factor = j.value("episode_cap_factor", c.episode_cap_factor);
  c.discount = j.value("discount", c.discount);
  if (j.contains("rewards")) c.rewards = RewardScales::from_json(j.at("rewards"));
  return c;
}

nlohmann::json ResampleCounts::to_json() const {
  return {{"task_attempts", task_attempts},
          {"kernel_resamples", kernel_resamples},
          {"ergodicity_rejections", ergodicity_rejections},
          {"decomposition_rejections", decomposition_rejections},
          {"reward_resamples", reward_resamples},
          {"ascending_rejections", ascending_rejections},
          {"entropy_rejections", entropy_rejections}};
}

nlohmann::json ValidationReport::to_json() const {
  return {{"ergodic", ergodic},
          {"band_ok", band_ok},
          {"ascending_margin", ascending_margin},
          {"oracle_entropy", oracle_entropy},
          {"accepted", accepted},
          {"eta", eta},
          {"resample_counts", resample_counts.to_json()}};
}

Matrix sample_banded_kernel(std::size_t n, const BandConstraints& band, Rng& rng) {
  if (n == 0) throw std::invalid_argument("banded kernel: n_states must be positive");
  if (n >= 2 && band.band_up == 0)
    throw std::invalid_argument("banded kernel: band_up must be at least 1");
  if (n >= 2 && band.band_down == 0)
    throw std::invalid_argument("banded kernel: band_down must be at least 1");
  if (!(band.eta >= 0.0 && band.eps > 0.0) || band.eta + band.eps >= 1.0)
    throw std::invalid_argument("banded kernel: infeasible constraints (need eta + eps < 1)");
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = k.row(i);
    const std::size_t lo = i >= band.band_down ? i - band.band_down : 0;
    const std::size_t hi = std::min(n - 1, i + band.band_up);
    const bool has_down = lo < i;
    const bool has_up = i < hi;
    const double eps_reserve = has_up ? band.eps : 0.0;
    double down = 0.0;
    if (has_down) down = band.eta + (1.0 - band.eta - eps_reserve) * open_unit(rng);
    double up = 0.0;
    if (has_up) up = band.eps + (1.0 - down - band.eps) * open_unit(rng);
    down = std::min(down, 1.0 - eps_reserve);
    up = std::min(up, 1.0 - down);
    if (has_down) spread(row, lo, i - 1, down, rng);
    if (has_up) spread(row, i + 1, hi, up, rng);
    row[i] = std::max(0.0, 1.0 - down - up);
  }
  return k;
}

bool row_satisfies_band(std::span<const double> row, std::size_t i, const BandConstraints& band) {
  const std::size_t n = row.size();
  const std::size_t lo = i >= band.band_down ? i - band.band_down : 0;
  const std::size_t hi = std::min(n - 1, i + band.band_up);
  double total = 0.0, below = 0.0, above = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double p = row[j];
    if (!(p >= 0.0)) return false;
    if ((j < lo || j > hi) && p != 0.0) return false;
    total += p;
    if (j < i) below += p;
    if (j > i) above += p;
  }
  if (std::fabs(total - 1.0) > 1e-12) return false;
  if (i >= band.band_down && !(below > band.eta)) return false;
  if (i + 1 < n && !(above > band.eps)) return false;
  return true;
}

bool satisfies_band(const Matrix& kernel, const BandConstraints& band) {
  if (kernel.rows() != kernel.cols()) return false;
  for (std::size_t i = 0; i < kernel.rows(); ++i)
    if (!row_satisfies_band(kernel.row(i), i, band)) return false;
  return true;
}

double ergodicity_statistic(const Matrix& kernel, std::size_t power) {
  const std::size_t n = kernel.rows();
  if (n == 0 || kernel.cols() != n) throw std::invalid_argument("ergodicity: kernel must be square");
  Matrix result = Matrix::identity(n);
  Matrix base = kernel;
  std::size_t e = std::max<std::size_t>(power, 1);
  bool first = true;
  while (e > 0) {
    if (e & 1U) {
      result = first ? base : matmul(result, base);
      first = false;
    }
    e >>= 1U;
    if (e > 0) base = matmul(base, base);
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += result(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = result(r, c) - mean;
      var += d * d;
    }
    acc += var / static_cast<double>(n);
  }
  return acc / static_cast<double>(n);
}

bool check_ergodicity(const Matrix& kernel, std::size_t power, double var_tol) {
  const double stat = ergodicity_statistic(kernel, power);
  return std::isfinite(stat) && stat <= var_tol;
}

namespace {

// Realized rows for one state; out is (n_actions x n). Returns false when some
// action receives no mass.
bool decompose_row(std::span<const double> avg_row, std::span<const double> centers,
                   std::span<const double> widths, Matrix& out) {
  const std::size_t n = avg_row.size();
  const std::size_t na = centers.size();
  std::vector<double> logits(na);
  for (std::size_t j = 0; j < n; ++j) {
    if (avg_row[j] == 0.0) {
      for (std::size_t k = 0; k < na; ++k) out(k, j) = 0.0;
      continue;
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < na; ++k) {
      const double d = (centers[k] - static_cast<double>(j)) / widths[k];
      logits[k] = -d * d;
      top = std::max(top, logits[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < na; ++k) z += (logits[k] = std::exp(logits[k] - top));
    for (std::size_t k = 0; k < na; ++k)
      out(k, j) = static_cast<double>(na) * avg_row[j] * logits[k] / z;
  }
  for (std::size_t k = 0; k < na; ++k) {
    auto r = out.row(k);
    double total = 0.0;
    for (double x : r) total += x;
    if (!(total > 0.0) || !std::isfinite(total)) return false;
    for (double& x : r) x /= total;
  }
  return true;
}

}  // namespace

Tensor3 decompose_with_weights(const Matrix& avg_kernel, const Matrix& centers,
                               const Matrix& widths) {
  const std::size_t n = avg_kernel.rows();
  const std::size_t na = centers.cols();
  if (avg_kernel.cols() != n || centers.rows() != n || widths.rows() != n || widths.cols() != na)
    throw std::invalid_argument("decompose: weight shapes do not match the kernel");
  Tensor3 out(n, na);
  Matrix rows(na, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!decompose_row(avg_kernel.row(i), centers.row(i), widths.row(i), rows))
      throw std::domain_error("decompose: an action row received no mass at state " +
                              std::to_string(i));
    for (std::size_t k = 0; k < na; ++k)
      std::copy(rows.row(k).begin(), rows.row(k).end(), out.row(i, k).begin());
  }
  return out;
}

std::optional<Tensor3> decompose_actions(const Matrix& avg_kernel, std::size_t n_actions,
                                         const BandConstraints& band, Rng& rng,
                                         std::size_t row_attempts) {
  const std::size_t n = avg_kernel.rows();
  if (n_actions == 0) throw std::invalid_argument("decompose: n_actions must be positive");
  Tensor3 out(n, n_actions);
  if (n_actions == 1) {
    for (std::size_t i = 0; i < n; ++i)
      std::copy(avg_kernel.row(i).begin(), avg_kernel.row(i).end(), out.row(i, 0).begin());
    return out;
  }
  std::vector<double> centers(n_actions), widths(n_actions), realized(n);
  Matrix rows(n_actions, n);
  std::exponential_distribution<double> expo(1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = static_cast<double>(i) - static_cast<double>(band.band_down);
    const double hi = static_cast<double>(i) + static_cast<double>(band.band_up);
    bool ok = false;
    for (std::size_t attempt = 0; attempt < row_attempts && !ok; ++attempt) {
      for (std::size_t k = 0; k < n_actions; ++k) {
        centers[k] = uniform(rng, lo, hi);
        widths[k] = std::clamp(expo(rng), 0.05, 10.0);
      }
      if (!decompose_row(avg_kernel.row(i), centers, widths, rows)) continue;
      std::fill(realized.begin(), realized.end(), 0.0);
      for (std::size_t k = 0; k < n_actions; ++k)
        for (std::size_t j = 0; j < n; ++j) realized[j] += rows(k, j);
      for (double& x : realized) x /= static_cast<double>(n_actions);
      ok = row_satisfies_band(realized, i, band);
    }
    if (!ok) return std::nullopt;
    for (std::size_t k = 0; k < n_actions; ++k)
      std::copy(rows.row(k).begin(), rows.row(k).end(), out.row(i, k).begin());
  }
  return out;
}

std::vector<double> sample_state_reward(std::span<const std::size_t> ranking,
                                        std::span<const std::size_t> terminal_states,
                                        std::optional<std::size_t> goal_state,
                                        const RewardScales& scales, Rng& rng) {
  const std::size_t n = ranking.size();
  std::vector<std::uint8_t> terminal(n, 0);
  for (std::size_t t : terminal_states) terminal.at(t) = 1;
  std::vector<double> by_rank(n);
  for (double& x : by_rank) x = scales.state_span * std::pow(uniform(rng, 0.0, 1.0), scales.state_exponent);
  std::sort(by_rank.begin(), by_rank.end());

  // Highest-ranked pitfall, if any.
  std::optional<std::size_t> top_pitfall;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t s = ranking[k];
    if (terminal[s] && (!goal_state || s != *goal_state)) top_pitfall = k;
  }
  const double offset = uniform(rng, 0.0, scales.state_offset_max);
  for (double& x : by_rank) x -= offset;
  if (top_pitfall) {
    // Only the segment at or below the highest pitfall moves down, so states
    // ranked above it keep their rewards and the order is preserved.
    const double target = -uniform(rng, scales.pitfall_min, scales.pitfall_max);
    const double shift = std::min(0.0, target - by_rank[*top_pitfall]);
    for (std::size_t k = 0; k <= *top_pitfall; ++k) by_rank[k] += shift;
  }

  if (goal_state) {
    if (ranking.back() != *goal_state)
      throw std::invalid_argument("state reward: goal must be the top-ranked state");
    const double below = n >= 2 ? by_rank[n - 2] : 0.0;
    by_rank[n - 1] =
        std::max(below, 0.0) + uniform(rng, scales.goal_bonus_min, scales.goal_bonus_max);
  }
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[ranking[k]] = by_rank[k];
  return out;
}

RewardModel assemble_composite_reward(std::vector<double> state_reward, Matrix sa_cost,
                                      std::vector<double> potential, double noise_scale) {
  const std::size_t n = state_reward.size();
  const std::size_t na = sa_cost.cols();
  if (sa_cost.rows() != n || potential.size() != n)
    throw std::invalid_argument("composite reward: component shapes disagree");
  RewardModel r;
  r.mean = Tensor3(n, na);
  r.noise_std = Tensor3(n, na, noise_scale);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t t = 0; t < n; ++t)
        r.mean(s, a, t) = state_reward[t] + sa_cost(s, a) + potential[s] - potential[t];
  r.state_reward = std::move(state_reward);
  r.sa_cost = std::move(sa_cost);
  r.potential = std::move(potential);
  r.composite = true;
  return r;
}

namespace {

Matrix sample_sa_cost(std::size_t n, std::size_t na, const RewardScales& scales, Rng& rng) {
  Matrix c(n, na);
  for (double& x : c.data()) x = -uniform(rng, 0.0, scales.sa_cost_max);
  return c;
}

std::vector<double> sample_potential(std::size_t n, const RewardScales& scales, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, -scales.potential_max, scales.potential_max);
  return v;
}

}  // namespace

RewardModel sample_composite_reward(std::span<const std::size_t> ranking, std::size_t n_actions,
                                    std::span<const std::size_t> terminal_states,
                                    std::optional<std::size_t> goal_state, double noise_scale,
                                    const RewardScales& scales, Rng& rng) {
  const std::size_t n = ranking.size();
  Matrix sa = sample_sa_cost(n, n_actions, scales, rng);
  std::vector<double> pot = sample_potential(n, scales, rng);
  std::vector<double> rs = sample_state_reward(ranking, terminal_states, goal_state, scales, rng);
  return assemble_composite_reward(std::move(rs), std::move(sa), std::move(pot), noise_scale);
}

double arrival_value(const TabularTask& task, std::span<const double> v_star, std::size_t state) {
  const auto terminal = terminal_mask(task);
  if (!terminal[state]) return v_star[state];
  if (task.reward.composite) return task.reward.state_reward[state];
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < task.n_states; ++s) {
    if (terminal[s]) continue;
    for (std::size_t a = 0; a < task.n_actions; ++a) {
      if (task.transition(s, a, state) > 0.0) {
        acc += task.reward.mean(s, a, state);
        ++count;
      }
    }
  }
  return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

double ascending_margin(const TabularTask& task, std::span<const double> v_star, double kappa) {
  double best_start = -std::numeric_limits<double>::infinity();
  for (std::size_t s : task.reset_states) best_start = std::max(best_start, v_star[s]);
  return arrival_value(task, v_star, task.ranking.back()) - best_start - kappa;
}

namespace {

struct Layout {
  std::vector<std::size_t> ranking;
  std::vector<std::size_t> reset_states;
  std::vector<std::size_t> terminal_states;
  std::optional<std::size_t> goal;
};

// Random ranking, reset set among the lowest `b0` ranks and terminal set
// (goal at the top rank with probability 1/2, pitfalls in the lower half).
Layout sample_layout(std::size_t n, std::size_t b0, Rng& rng) {
  Layout l;
  l.ranking.resize(n);
  std::iota(l.ranking.begin(), l.ranking.end(), 0);
  std::shuffle(l.ranking.begin(), l.ranking.end(), rng);

  const std::size_t n_reset = uniform_index(rng, 1, b0);
  std::vector<std::size_t> low(b0);
  std::iota(low.begin(), low.end(), 0);
  std::shuffle(low.begin(), low.end(), rng);
  low.resize(n_reset);
  std::sort(low.begin(), low.end());
  std::vector<std::uint8_t> is_reset_rank(n, 0);
  for (std::size_t k : low) {
    l.reset_states.push_back(l.ranking[k]);
    is_reset_rank[k] = 1;
  }
  std::sort(l.reset_states.begin(), l.reset_states.end());

  if (n < 2) return l;
  // Pitfalls sit in the lower half of the ranking: r^s is monotone and negative
  // at pitfalls, so every state ranked below a pitfall is negative as well.
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; 2 * k < n && k + 1 < n; ++k)
    if (!is_reset_rank[k]) candidates.push_back(k);
  const std::size_t max_terminals = ceil_div(n, 8);
  std::size_t n_term = uniform_index(rng, 0, max_terminals);
  if (n_term == 0) return l;
  const bool with_goal = !is_reset_rank[n - 1] && uniform01(rng) < 0.5;
  if (with_goal) {
    l.goal = l.ranking[n - 1];
    l.terminal_states.push_back(*l.goal);
    --n_term;
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (std::size_t k = 0; k < std::min(n_term, candidates.size()); ++k)
    l.terminal_states.push_back(l.ranking[candidates[k]]);
  std::sort(l.terminal_states.begin(), l.terminal_states.end());
  return l;
}

// Kernel in rank space with terminal rows sent to the reset distribution.
Matrix connect_ranked(const Matrix& ranked, const Layout& l, const std::vector<std::size_t>& rank) {
  Matrix m = ranked;
  std::vector<std::size_t> term_ranks, reset_ranks;
  for (std::size_t s : l.terminal_states) term_ranks.push_back(rank[s]);
  for (std::size_t s : l.reset_states) reset_ranks.push_back(rank[s]);
  std::vector<double> probs(reset_ranks.size(), 1.0 / static_cast<double>(reset_ranks.size()));
  reset_terminal_rows(m, term_ranks, reset_ranks, probs);
  return m;
}

Matrix action_average(const Tensor3& t) {
  const std::size_t n = t.n_states();
  const std::size_t na = t.n_actions();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < na; ++k)
      for (std::size_t j = 0; j < n; ++j) m(i, j) += t(i, k, j) / static_cast<double>(na);
  return m;
}

enum class RewardKind { composite, raw };

SampledTask run_pipeline(const AnyMdpConfig& config_in, std::uint64_t seed, RewardKind kind) {
  config_in.validate();
  const AnyMdpConfig config = config_in.resolve();
  const std::size_t n = config.n_states;
  const std::size_t na = config.n_actions;
  const bool bandit = n == 1;
  Rng rng(seed);

  BandConstraints band;
  band.band_down = *config.band_down;
  band.band_up = *config.band_up;
  band.eps = config.eps_forward;
  band.eta = config.eta ? *config.eta : uniform(rng, config.eta_min, config.eta_max);

  ValidationReport report;
  report.eta = band.eta;
  ResampleCounts& counts = report.resample_counts;
  std::string last_stage = "kernel";

  for (std::size_t attempt = 0; attempt < config.max_resamples; ++attempt) {
    ++counts.task_attempts;
    Layout layout = sample_layout(n, *config.reset_band, rng);
    std::vector<std::size_t> rank(n);
    for (std::size_t k = 0; k < n; ++k) rank[layout.ranking[k]] = k;

    // Average kernel, resampled until the terminal-connected chain mixes.
    Matrix avg;
    bool ergodic = false;
    for (std::size_t k = 0; k < config.max_resamples && !ergodic; ++k) {
      avg = bandit ? Matrix(1, 1, 1.0) : sample_banded_kernel(n, band, rng);
      ergodic = check_ergodicity(connect_ranked(avg, layout, rank), *config.ergodicity_power,
                                 config.ergodicity_var_tol);
      if (!ergodic) {
        ++counts.kernel_resamples;
        ++counts.ergodicity_rejections;
      }
    }
    if (!ergodic) {
      last_stage = "ergodicity";
      continue;
    }

    std::optional<Tensor3> ranked;
    if (bandit) {
      ranked = Tensor3(1, na, 1.0);
    } else {
      ranked = decompose_actions(avg, na, band, rng, config.row_resamples);
    }
    if (!ranked) {
      ++counts.decomposition_rejections;
      last_stage = "decomposition";
      continue;
    }
    const Matrix realized = action_average(*ranked);
    if (!bandit && !check_ergodicity(connect_ranked(realized, layout, rank),
                                     *config.ergodicity_power, config.ergodicity_var_tol)) {
      ++counts.ergodicity_rejections;
      last_stage = "ergodicity";
      continue;
    }

    TabularTask task;
    task.n_states = n;
    task.n_actions = na;
    task.transition = Tensor3(n, na);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < na; ++k)
        for (std::size_t j = 0; j < n; ++j)
          task.transition(layout.ranking[i], k, layout.ranking[j]) = (*ranked)(i, k, j);
    task.reset_states = layout.reset_states;
    set_uniform_reset(task);
    task.terminal_states = layout.terminal_states;
    task.goal_state = layout.goal;
    task.ranking = layout.ranking;
    task.episode_cap = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.episode_cap_factor * static_cast<double>(n))));
    task.discount_default = config.discount;
    task.seed = seed;
    task.generator = kind == RewardKind::composite ? GeneratorId::anymdp : GeneratorId::anymdp_no_cr;
    task.config = config_in.to_json();
    task.config["eta"] = band.eta;

    // Rewards: structural components once, then r^s (or the raw table) until
    // the top state is worth reaching.
    Matrix sa;
    std::vector<double> pot;
    if (kind == RewardKind::composite) {
      sa = sample_sa_cost(n, na, config.rewards, rng);
      pot = sample_potential(n, config.rewards, rng);
    }
    bool ascending = false;
    ValueSolution sol;
    for (std::size_t r = 0; r < config.reward_resamples && !ascending; ++r) {
      if (kind == RewardKind::composite) {
        task.reward = assemble_composite_reward(
            sample_state_reward(layout.ranking, layout.terminal_states, layout.goal,
                                config.rewards, rng),
            sa, pot, config.reward_noise_scale);
      } else {
        RewardModel raw;
        raw.mean = Tensor3(n, na);
        raw.noise_std = Tensor3(n, na, config.reward_noise_scale);
        for (double& x : raw.mean.data())
          x = uniform(rng, -config.rewards.raw_max, config.rewards.raw_max);
        task.reward = std::move(raw);
      }
      sol = value_iteration(task, config.discount);
      if (bandit) {
        ascending = true;
        break;
      }
      report.ascending_margin = ascending_margin(task, sol.v_star, config.kappa);
      ascending = sol.converged && report.ascending_margin > 0.0;
      if (!ascending) ++counts.reward_resamples;
    }
    if (!ascending) {
      ++counts.ascending_rejections;
      last_stage = "ascending";
      continue;
    }

    if (!bandit) {
      const auto oracle = greedy_actions(sol.q_star);
      const Matrix kernel = connect_terminals(task, deterministic_policy(oracle, na));
      // Direct solve: near-absorbing oracle chains stall power iteration.
      // Several closed classes leave the SD undefined; treated as entropy 0.
      const auto sd = unique_stationary_distribution(kernel);
      report.oracle_entropy = sd ? normalized_entropy(*sd) : 0.0;
      if (!(report.oracle_entropy > config.h0)) {
        ++counts.entropy_rejections;
        last_stage = "entropy";
        continue;
      }
    }

    validate_task(task);
    report.ergodic = true;
    report.band_ok = bandit || satisfies_band(realized, band);
    report.accepted = true;
    return {std::move(task), report};
  }
  throw GenerationError(last_stage, "task generation failed after " +
                                        std::to_string(config.max_resamples) +
                                        " attempts; last failing stage: " + last_stage);
}

}  // namespace

SampledTask sample_anymdp(const AnyMdpConfig& config, std::uint64_t seed) {
  return run_pipeline(config, seed, RewardKind::composite);
}

SampledTask sample_anymdp_no_cr(const AnyMdpConfig& config, std::uint64_t seed) {
  return run_pipeline(config, seed, RewardKind::raw);
}

}  // namespace anymdp

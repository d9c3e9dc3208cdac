#include "anymdp/eval/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "anymdp/core/rng.hpp"
#include "anymdp/samplers/anymdp.hpp"
#include "anymdp/samplers/baselines.hpp"
#include "anymdp/util/parallel.hpp"

namespace anymdp {

namespace {

std::string describe(const AgentSpec& spec) {
  std::ostringstream os;
  os << to_string(spec.kind);
  switch (spec.kind) {
    case AgentKind::oracle:
      os << ":gamma=" << spec.gamma;
      break;
    case AgentKind::perturbed_oracle:
      os << ":eps0=" << spec.perturbed.eps0 << ":decay=" << spec.perturbed.decay;
      break;
    case AgentKind::tql_ucb:
      os << ':' << (spec.tql.alpha_scheme == AlphaScheme::hoeffding ? "hoeffding" : "constant");
      if (spec.tql.alpha_scheme == AlphaScheme::constant) os << ":alpha=" << spec.tql.alpha;
      os << ":c=" << spec.tql.c << ":gamma=" << spec.tql.gamma;
      break;
    case AgentKind::model_based:
      os << ":gamma=" << spec.model.gamma;
      break;
    case AgentKind::random:
      break;
  }
  return os.str();
}

nlohmann::json ci_json(const MeanCi& m) {
  return {{"mean", m.mean}, {"ci95", m.half_width}, {"n", m.n}};
}

struct RunResult {
  double episodes_to = 0.0;
  double best = 0.0;
  bool reached = false;
  std::vector<double> normalized;
  std::vector<double> steps;
  std::vector<std::size_t> eval_episodes;
};

}  // namespace

TabularTask make_family_task(const std::string& family, std::size_t n_states,
                             std::size_t n_actions, std::uint64_t seed) {
  if (family == "anymdp" || family == "anymdp_no_cr") {
    AnyMdpConfig c;
    c.n_states = n_states;
    c.n_actions = n_actions;
    return family == "anymdp" ? sample_anymdp(c, seed).task : sample_anymdp_no_cr(c, seed).task;
  }
  if (family.rfind("garnet", 0) == 0 && family.size() > 6) {
    GarnetConfig g;
    g.n_states = n_states;
    g.n_actions = n_actions;
    try {
      g.branching = std::stoul(family.substr(6));
    } catch (const std::exception&) {
      throw std::invalid_argument("unknown task family: " + family);
    }
    return sample_garnet(g, seed);
  }
  if (family == "darkroom") {
    if (n_actions != kDarkRoomActions) throw std::invalid_argument("darkroom has exactly 5 actions");
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_states))));
    if (side * side != n_states) throw std::invalid_argument("darkroom needs a square number of states");
    Rng rng(seed);
    DarkRoomConfig d;
    d.width = d.height = side;
    d.start = {side / 2, side / 2};
    d.goal = {uniform_index(rng, 0, side - 1), uniform_index(rng, 0, side - 1)};
    // Long enough to reach any goal and collect reward there.
    d.episode_len = 4 * side;
    TabularTask t = build_darkroom(d);
    t.seed = seed;
    return t;
  }
  throw std::invalid_argument("unknown task family: " + family);
}

std::vector<AgentSpec> default_tql_sweep() {
  std::vector<AgentSpec> out;
  for (AlphaScheme scheme : {AlphaScheme::hoeffding, AlphaScheme::constant})
    for (double c : {0.0, 0.01, 0.1})
      for (double gamma : {0.9, 0.99}) {
        AgentSpec s;
        s.kind = AgentKind::tql_ucb;
        s.tql.alpha_scheme = scheme;
        s.tql.alpha = 0.1;
        s.tql.c = c;
        s.tql.gamma = gamma;
        out.push_back(s);
      }
  return out;
}

nlohmann::json BenchConfig::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& a : sweep) s.push_back(a.to_json());
  return {{"families", families},   {"sweep", s},
          {"n_states", n_states},   {"n_actions", n_actions},
          {"n_tasks", n_tasks},     {"protocol", protocol.to_json()},
          {"level", level},         {"master_seed", master_seed},
          {"expected_order", expected_order}};
}

BenchConfig BenchConfig::from_json(const nlohmann::json& j) {
  BenchConfig c;
  c.families = j.value("families", c.families);
  if (j.contains("sweep")) {
    c.sweep.clear();
    for (const auto& e : j.at("sweep")) c.sweep.push_back(AgentSpec::from_json(e));
  }
  c.n_states = j.value("n_states", c.n_states);
  c.n_actions = j.value("n_actions", c.n_actions);
  c.n_tasks = j.value("n_tasks", c.n_tasks);
  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    c.protocol.train_episodes = p.value("train_episodes", c.protocol.train_episodes);
    c.protocol.eval_every = p.value("eval_every", c.protocol.eval_every);
    c.protocol.test_episodes = p.value("test_episodes", c.protocol.test_episodes);
  }
  c.level = j.value("level", c.level);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.expected_order = j.value("expected_order", c.expected_order);
  return c;
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& f : families) {
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& s : f.sweep)
      sweep.push_back({{"setting", describe(s.agent)},
                       {"agent", s.agent.to_json()},
                       {"episodes_to", ci_json(s.episodes_to)},
                       {"best_normalized", ci_json(s.best_normalized)},
                       {"reached_fraction", s.reached_fraction}});
    fams.push_back({{"family", f.family},
                    {"task_seeds", f.task_seeds},
                    {"chosen", describe(f.best().agent)},
                    {"sweep", sweep}});
  }
  nlohmann::json j = {{"families", fams}, {"ordering", ordering}, {"verdict", verdict}};
  j["pass"] = pass ? nlohmann::json(*pass) : nlohmann::json();
  return j;
}

void BenchReport::write_csv(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream curves(dir / "curves.csv");
  curves << "family,episode,mean_steps,score_mean,score_ci95,n_tasks\n";
  for (const auto& f : families)
    for (std::size_t k = 0; k < f.eval_episodes.size(); ++k)
      curves << f.family << ',' << f.eval_episodes[k] << ',' << f.mean_steps[k] << ','
             << f.score[k].mean << ',' << f.score[k].half_width << ',' << f.score[k].n << '\n';
  std::ofstream summary(dir / "summary.csv");
  summary << "family,setting,chosen,episodes_to_mean,episodes_to_ci95,reached_fraction,"
             "best_mean,best_ci95,n_tasks\n";
  for (const auto& f : families)
    for (std::size_t k = 0; k < f.sweep.size(); ++k) {
      const auto& s = f.sweep[k];
      summary << f.family << ',' << describe(s.agent) << ',' << (k == f.chosen ? 1 : 0) << ','
              << s.episodes_to.mean << ',' << s.episodes_to.half_width << ',' << s.reached_fraction
              << ',' << s.best_normalized.mean << ',' << s.best_normalized.half_width << ','
              << s.episodes_to.n << '\n';
    }
  if (!curves || !summary) throw std::runtime_error("bench: cannot write CSV output to " + dir.string());
}

BenchReport bench_compare(const BenchConfig& config) {
  if (config.families.empty()) throw std::invalid_argument("bench: no task families");
  if (config.sweep.empty()) throw std::invalid_argument("bench: empty hyperparameter sweep");
  if (config.n_tasks == 0) throw std::invalid_argument("bench: n_tasks must be positive");
  const std::size_t nf = config.families.size();
  const std::size_t nt = config.n_tasks;
  const std::size_t ns = config.sweep.size();

  // Matched seeds: task i of every family uses the same seed.
  std::vector<std::uint64_t> seeds(nt);
  for (std::size_t i = 0; i < nt; ++i) seeds[i] = derive_seed(config.master_seed, i);

  std::vector<TabularTask> tasks(nf * nt);
  std::vector<OracleSet> oracles(nf * nt);
  std::vector<Baselines> baselines(nf * nt);
  parallel_for(nf * nt, config.workers, [&](std::size_t k) {
    tasks[k] = make_family_task(config.families[k / nt], config.n_states, config.n_actions,
                                seeds[k % nt]);
    oracles[k] = compute_oracles(tasks[k]);
    baselines[k] = exact_baselines(tasks[k], &oracles[k]);
    if (baselines[k].degenerate)
      throw std::runtime_error("bench: degenerate baselines for " + config.families[k / nt] +
                               " task seed " + std::to_string(seeds[k % nt]));
  });

  std::vector<RunResult> runs(nf * nt * ns);
  parallel_for(runs.size(), config.workers, [&](std::size_t r) {
    const std::size_t task_index = r / ns;
    const AgentSpec& spec = config.sweep[r % ns];
    const TabularTask& task = tasks[task_index];
    auto agent = make_agent(spec, task, &oracles[task_index]);
    Rng rng(derive_seed(config.master_seed, r, 1));
    const LearningCurve curve = run_learner(task, *agent, baselines[task_index], config.protocol, rng);
    RunResult& out = runs[r];
    const auto hit = curve.episodes_to(config.level);
    out.reached = hit.has_value();
    out.episodes_to = static_cast<double>(hit.value_or(curve.budget));
    out.best = curve.best_normalized();
    out.normalized = curve.normalized;
    out.eval_episodes = curve.eval_episodes;
    out.steps.assign(curve.eval_steps.begin(), curve.eval_steps.end());
  });

  BenchReport report;
  for (std::size_t f = 0; f < nf; ++f) {
    FamilyResult fr;
    fr.family = config.families[f];
    fr.task_seeds = seeds;
    for (std::size_t s = 0; s < ns; ++s) {
      std::vector<double> e(nt), b(nt);
      std::size_t reached = 0;
      for (std::size_t i = 0; i < nt; ++i) {
        const RunResult& r = runs[(f * nt + i) * ns + s];
        e[i] = r.episodes_to;
        b[i] = r.best;
        reached += r.reached ? 1 : 0;
      }
      SweepResult sr;
      sr.agent = config.sweep[s];
      sr.episodes_to = aggregate_ci(e);
      sr.best_normalized = aggregate_ci(b);
      sr.reached_fraction = static_cast<double>(reached) / static_cast<double>(nt);
      fr.sweep.push_back(sr);
      if (sr.episodes_to.mean < fr.sweep[fr.chosen].episodes_to.mean) fr.chosen = s;
    }
    const RunResult& first = runs[(f * nt) * ns + fr.chosen];
    fr.eval_episodes = first.eval_episodes;
    for (std::size_t k = 0; k < fr.eval_episodes.size(); ++k) {
      std::vector<double> sc(nt);
      double steps = 0.0;
      for (std::size_t i = 0; i < nt; ++i) {
        const RunResult& r = runs[(f * nt + i) * ns + fr.chosen];
        sc[i] = r.normalized[k];
        steps += r.steps[k];
      }
      fr.score.push_back(aggregate_ci(sc));
      fr.mean_steps.push_back(steps / static_cast<double>(nt));
    }
    report.families.push_back(std::move(fr));
  }

  std::vector<std::size_t> order(nf);
  for (std::size_t f = 0; f < nf; ++f) order[f] = f;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.families[a].best().episodes_to.mean < report.families[b].best().episodes_to.mean;
  });
  std::ostringstream verdict;
  for (std::size_t k = 0; k < nf; ++k) {
    const auto& f = report.families[order[k]];
    report.ordering.push_back(f.family);
    if (k) verdict << " < ";
    verdict << f.family << " (" << f.best().episodes_to.mean << ")";
  }
  if (nf == 2) verdict << "; " << report.ordering.front() << " faster";
  report.verdict = verdict.str();

  if (!config.expected_order.empty()) {
    bool ok = true;
    double prev = -1.0;
    for (const auto& name : config.expected_order) {
      const auto it = std::find_if(report.families.begin(), report.families.end(),
                                   [&](const FamilyResult& f) { return f.family == name; });
      if (it == report.families.end())
        throw std::invalid_argument("bench: expected_order names an unknown family: " + name);
      const double m = it->best().episodes_to.mean;
      ok = ok && m > prev;
      prev = m;
    }
    report.pass = ok;
  }
  return report;
}

}  // namespace anymdp

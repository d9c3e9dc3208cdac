#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anymdp/agents/agents.hpp"
#include "anymdp/core/rng.hpp"
#include "anymdp/core/solvers.hpp"
#include "anymdp/eval/bench.hpp"
#include "anymdp/eval/bounds.hpp"
#include "anymdp/io/dataset.hpp"
#include "anymdp/io/task_file.hpp"
#include "anymdp/samplers/anymdp.hpp"
#include "anymdp/samplers/audit.hpp"
#include "anymdp/synth/synthesis.hpp"
#include "anymdp/util/parallel.hpp"

namespace anymdp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// logfmt lines on stderr: level=... cmd=... msg="..." key=value ...
class Log {
 public:
  Level level = Level::info;
  std::string cmd;

  void error(std::string_view msg, const json& kv = json::object()) const { emit(Level::error, msg, kv); }
  void warn(std::string_view msg, const json& kv = json::object()) const { emit(Level::warn, msg, kv); }
  void info(std::string_view msg, const json& kv = json::object()) const { emit(Level::info, msg, kv); }
  void debug(std::string_view msg, const json& kv = json::object()) const { emit(Level::debug, msg, kv); }

 private:
  void emit(Level l, std::string_view msg, const json& kv) const {
    if (static_cast<int>(l) > static_cast<int>(level)) return;
    static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
    std::ostringstream os;
    os << "level=" << kNames[static_cast<int>(l)] << " cmd=" << cmd << " msg=" << json(std::string(msg)).dump();
    for (const auto& [k, v] : kv.items()) os << ' ' << k << '=' << v.dump();
    os << '\n';
    std::cerr << os.str();
  }
};

Level parse_level(const std::string& s) {
  if (s == "error") return Level::error;
  if (s == "warn") return Level::warn;
  if (s == "info") return Level::info;
  if (s == "debug") return Level::debug;
  throw UsageError("unknown log level: " + s);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Options bound to variables; values from the JSON config apply only where
// the flag was not given on the command line.
class Bindings {
 public:
  explicit Bindings(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& flag, T& var, const std::string& desc) {
    CLI::Option* opt = app_->add_option("--" + flag, var, desc)->capture_default_str();
    std::string key = flag;
    std::replace(key.begin(), key.end(), '-', '_');
    appliers_.push_back([opt, key, &var](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
    });
    return opt;
  }

  CLI::Option* flag(const std::string& flag, bool& var, const std::string& desc) {
    CLI::Option* opt = app_->add_flag("--" + flag, var, desc);
    std::string key = flag;
    std::replace(key.begin(), key.end(), '-', '_');
    appliers_.push_back([opt, key, &var](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<bool>();
    });
    return opt;
  }

  void apply(const json& cfg) const {
    for (const auto& f : appliers_) {
      try {
        f(cfg);
      } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
      }
    }
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(const json&)>> appliers_;
};

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t workers = default_workers();
  std::string log_level = "info";
  json config = json::object();
};

void add_common(Bindings& b, CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config; flags take precedence");
  b.add("seed", c.seed, "master seed");
  b.add("workers", c.workers, "worker threads (default: ANYMDP_WORKERS or hardware concurrency)");
  b.add("log-level", c.log_level, "error, warn, info or debug");
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  return j;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

template <typename T>
T block(const json& cfg, const char* key) {
  if (!cfg.contains(key)) return T{};
  try {
    return T::from_json(cfg.at(key));
  } catch (const json::exception& e) {
    throw UsageError(std::string("config block '") + key + "': " + e.what());
  }
}

bool is_anymdp_family(const std::string& family) { return family == "anymdp" || family == "anymdp_no_cr"; }

void check_family(const std::string& family, std::size_t ns, std::size_t na) {
  try {
    (void)make_family_task(family, ns, na, 0);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const GenerationError&) {
    // Seed 0 may fail to generate; the family itself is valid.
  }
}

struct Generated {
  std::optional<TabularTask> task;
  std::optional<ValidationReport> report;
  std::string failed_stage;
  std::string error;
  double wall_ms = 0.0;
};

Generated generate(const std::string& family, const AnyMdpConfig& cfg, std::uint64_t seed) {
  Generated g;
  const auto t0 = Clock::now();
  try {
    if (is_anymdp_family(family)) {
      SampledTask st = family == "anymdp" ? sample_anymdp(cfg, seed) : sample_anymdp_no_cr(cfg, seed);
      g.task = std::move(st.task);
      g.report = st.report;
    } else {
      g.task = make_family_task(family, cfg.n_states, cfg.n_actions, seed);
    }
  } catch (const GenerationError& e) {
    g.failed_stage = e.stage();
    g.error = e.what();
  } catch (const std::exception& e) {
    g.failed_stage = "generation";
    g.error = e.what();
  }
  g.wall_ms = seconds_since(t0) * 1e3;
  return g;
}

std::string task_file_name(std::size_t i, const std::string& format) {
  std::ostringstream os;
  os << "task_" << std::setw(5) << std::setfill('0') << i << (format == "json" ? ".json" : ".amdt");
  return os.str();
}

// sample ------------------------------------------------------------------

struct SampleArgs {
  Common common;
  std::size_t ns = 16;
  std::size_t na = 5;
  std::size_t count = 1;
  std::string out;
  std::string family = "anymdp";
  std::string format = "bin";
};

int run_sample(SampleArgs& a, const Log& log) {
  AnyMdpConfig cfg = block<AnyMdpConfig>(a.common.config, "anymdp");
  cfg.n_states = a.ns;
  cfg.n_actions = a.na;
  if (a.format != "bin" && a.format != "json") throw UsageError("--format must be bin or json");
  if (a.count == 0) throw UsageError("--count must be positive");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  check_family(a.family, a.ns, a.na);
  const fs::path dir(a.out);
  ensure_dir(dir);

  const auto t0 = Clock::now();
  std::vector<Generated> gen(a.count);
  std::vector<std::optional<AuditReport>> audits(a.count);
  std::vector<std::string> reload_error(a.count);
  std::atomic<std::size_t> done{0};
  parallel_for(a.count, a.common.workers, [&](std::size_t i) {
    gen[i] = generate(a.family, cfg, derive_seed(a.common.seed, i));
    if (gen[i].task) {
      const fs::path path = dir / task_file_name(i, a.format);
      try {
        save_task(*gen[i].task, path);
      } catch (const std::exception& e) {
        throw IoError("cannot write " + path.string() + ": " + e.what());
      }
      // Re-validate from disk: the file must load, round-trip and pass the audit.
      try {
        const TabularTask loaded = load_task(path);
        if (!(loaded == *gen[i].task)) reload_error[i] = "reloaded task differs from the sampled task";
        if (is_anymdp_family(a.family)) audits[i] = audit_anymdp_task(loaded);
      } catch (const std::exception& e) {
        reload_error[i] = e.what();
      }
    }
    const std::size_t d = ++done;
    if (d % 64 == 0) log.debug("progress", {{"done", d}, {"total", a.count}});
  });
  const double wall = seconds_since(t0);

  auto summary = open_out(dir / "summary.csv");
  summary << "index,seed,file,status,failed_stage,task_attempts,kernel_resamples,ergodicity_rejections,"
             "decomposition_rejections,reward_resamples,ascending_rejections,entropy_rejections,eta,"
             "ascending_margin,oracle_entropy,audit\n";
  auto timing = open_out(dir / "timing.csv");
  timing << "index,wall_ms\n";
  std::size_t accepted = 0, failed = 0, audit_fail = 0, attempts = 0;
  ResampleCounts totals;
  std::map<std::string, std::size_t> failed_stages;
  for (std::size_t i = 0; i < a.count; ++i) {
    const Generated& g = gen[i];
    const std::uint64_t seed = derive_seed(a.common.seed, i);
    std::string audit = "n/a";
    if (!reload_error[i].empty()) {
      audit = "reload_error";
    } else if (audits[i]) {
      audit = audits[i]->pass() ? "pass" : "fail:" + audits[i]->first_failure;
    } else if (g.task) {
      audit = "structure_only";
    }
    const bool ok = g.task && reload_error[i].empty() && (!audits[i] || audits[i]->pass());
    if (g.task) {
      ++accepted;
    } else {
      ++failed;
      ++failed_stages[g.failed_stage];
      log.error("task generation failed", {{"index", i}, {"seed", seed}, {"stage", g.failed_stage}, {"error", g.error}});
    }
    if (g.task && !ok) {
      ++audit_fail;
      log.error("task failed re-validation",
                {{"index", i}, {"seed", seed}, {"audit", audit}, {"error", reload_error[i]}});
    }
    summary << i << ',' << seed << ',' << (g.task ? task_file_name(i, a.format) : "") << ','
            << (g.task ? "accepted" : "failed") << ',' << g.failed_stage << ',';
    if (g.report) {
      const ResampleCounts& c = g.report->resample_counts;
      summary << c.task_attempts << ',' << c.kernel_resamples << ',' << c.ergodicity_rejections << ','
              << c.decomposition_rejections << ',' << c.reward_resamples << ',' << c.ascending_rejections
              << ',' << c.entropy_rejections << ',' << g.report->eta << ',' << g.report->ascending_margin
              << ',' << g.report->oracle_entropy;
      attempts += c.task_attempts;
      totals.task_attempts += c.task_attempts;
      totals.kernel_resamples += c.kernel_resamples;
      totals.ergodicity_rejections += c.ergodicity_rejections;
      totals.decomposition_rejections += c.decomposition_rejections;
      totals.reward_resamples += c.reward_resamples;
      totals.ascending_rejections += c.ascending_rejections;
      totals.entropy_rejections += c.entropy_rejections;
    } else {
      summary << ",,,,,,,,,";
    }
    summary << ',' << audit << '\n';
    timing << i << ',' << g.wall_ms << '\n';
  }
  if (!summary || !timing) throw IoError("cannot write summary files in " + dir.string());

  json s = {{"family", a.family},
            {"n_states", a.ns},
            {"n_actions", a.na},
            {"count", a.count},
            {"seed", a.common.seed},
            {"accepted", accepted},
            {"failed", failed},
            {"failed_stages", failed_stages},
            {"revalidation_failures", audit_fail},
            {"sampler", cfg.to_json()}};
  if (is_anymdp_family(a.family)) {
    s["task_attempts"] = attempts;
    s["acceptance_rate"] = attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
    s["resample_counts"] = totals.to_json();
  }
  write_json(dir / "summary.json", s);
  log.info("sample finished", {{"accepted", accepted},
                               {"failed", failed},
                               {"revalidation_failures", audit_fail},
                               {"task_attempts", attempts},
                               {"wall_s", wall},
                               {"tasks_per_s", static_cast<double>(a.count) / std::max(wall, 1e-9)}});
  if (failed > 0 || audit_fail > 0) throw ValidationFailure("some tasks failed generation or re-validation");
  return kOk;
}

// synth -------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::size_t tasks = 16;
  std::string task_dir;
  std::size_t seqs = 0;
  std::size_t seq_len = 8192;
  std::size_t ns = 16;
  std::size_t na = 5;
  double unk_frac = 0.15;
  std::string out = "dataset.amdp";
  std::string family = "anymdp";
  std::size_t batch = 64;
  double max_fail_frac = 0.05;
};

std::vector<fs::path> list_task_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("task directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("task_", 0) == 0 &&
        (e.path().extension() == ".amdt" || e.path().extension() == ".json"))
      files.push_back(e.path());
  }
  if (ec) throw IoError("cannot list " + dir.string());
  std::sort(files.begin(), files.end());
  return files;
}

int run_synth(SynthArgs& a, const Log& log) {
  AnyMdpConfig cfg = block<AnyMdpConfig>(a.common.config, "anymdp");
  SynthesisConfig scfg = a.common.config.contains("synthesis")
                             ? block<SynthesisConfig>(a.common.config, "synthesis")
                             : SynthesisConfig{};
  cfg.n_states = a.ns;
  cfg.n_actions = a.na;
  scfg.seq_len = a.seq_len;
  scfg.unk_fraction = a.unk_frac;
  try {
    scfg.validate();
    if (a.task_dir.empty()) cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(a.max_fail_frac >= 0.0 && a.max_fail_frac <= 1.0)) throw UsageError("--max-fail-frac must lie in [0, 1]");

  std::vector<fs::path> files;
  if (!a.task_dir.empty()) {
    files = list_task_files(a.task_dir);
    if (files.empty()) throw IoError("no task_* files in " + a.task_dir);
    a.tasks = files.size();
  } else {
    check_family(a.family, a.ns, a.na);
  }
  if (a.tasks == 0) throw UsageError("--tasks must be positive");
  if (a.seqs == 0) a.seqs = a.tasks;
  if (a.seqs % a.tasks != 0) throw UsageError("--seqs must be a multiple of the task count");
  const std::size_t per_task = a.seqs / a.tasks;

  const auto t0 = Clock::now();
  std::vector<std::unique_ptr<TaskContext>> contexts(a.tasks);
  std::vector<std::string> errors(a.tasks);
  parallel_for(a.tasks, a.common.workers, [&](std::size_t i) {
    try {
      if (!files.empty()) {
        contexts[i] = std::make_unique<TaskContext>(load_task(files[i]));
      } else {
        Generated g = generate(a.family, cfg, derive_seed(a.common.seed, i));
        if (!g.task) {
          errors[i] = g.failed_stage + ": " + g.error;
          return;
        }
        contexts[i] = std::make_unique<TaskContext>(std::move(*g.task));
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::vector<const TaskContext*> ok;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < a.tasks; ++i) {
    if (contexts[i]) {
      ok.push_back(contexts[i].get());
    } else {
      ++failed;
      log.error("task failed", {{"index", i}, {"error", errors[i]}});
    }
  }
  log.info("tasks ready", {{"ok", ok.size()}, {"failed", failed}, {"wall_s", seconds_since(t0)}});
  if (ok.empty()) throw ValidationFailure("every task failed");

  BuildOptions opts;
  opts.master_seed = derive_seed(a.common.seed, 0, 1);
  opts.workers = a.common.workers;
  opts.batch = a.batch;
  const auto t1 = Clock::now();
  std::size_t last_decile = 0;
  opts.progress = [&](std::size_t done, std::size_t total) {
    const std::size_t decile = done * 10 / total;
    if (decile > last_decile || done == total) {
      last_decile = decile;
      const double el = seconds_since(t1);
      log.info("progress", {{"sequences", done},
                            {"total", total},
                            {"steps_per_s", static_cast<double>(done * scfg.seq_len) / std::max(el, 1e-9)}});
    }
  };
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  const json extra = {{"cli", {{"seed", a.common.seed}, {"family", files.empty() ? a.family : "files"}}}};
  DatasetManifest m;
  try {
    m = build_dataset(ok, per_task, scfg, opts, out, extra);
  } catch (const DatasetError& e) {
    if (e.kind() == DatasetErrorKind::io) throw IoError(e.what());
    throw;
  }
  const double el = seconds_since(t1);
  log.info("dataset written", {{"file", out.string()},
                               {"sequences", m.seq_count},
                               {"total_steps", m.total_steps},
                               {"sha256", m.sha256},
                               {"steps_per_s", static_cast<double>(m.total_steps) / std::max(el, 1e-9)}});
  const double frac = static_cast<double>(failed) / static_cast<double>(a.tasks);
  if (frac > a.max_fail_frac)
    throw ValidationFailure("task failure fraction " + std::to_string(frac) + " exceeds " +
                            std::to_string(a.max_fail_frac));
  return kOk;
}

// inspect -----------------------------------------------------------------

struct InspectArgs {
  Common common;
  std::string task;
  std::string out;
  bool svg = false;
};

void write_svg(const fs::path& path, const Matrix& k, const std::vector<std::size_t>& order) {
  const std::size_t n = order.size();
  const double cell = std::max(2.0, 512.0 / static_cast<double>(n));
  auto out = open_out(path);
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cell * static_cast<double>(n) << "\" height=\""
      << cell * static_cast<double>(n) << "\">\n";
  // Grey level from log10 probability over [-8, 0]; white is zero.
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double p = k(order[r], order[c]);
      int g = 255;
      if (p > 0.0) g = static_cast<int>(std::lround(255.0 * std::clamp(-std::log10(p) / 8.0, 0.0, 1.0)));
      out << "<rect x=\"" << cell * static_cast<double>(c) << "\" y=\"" << cell * static_cast<double>(r)
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << g << ',' << g << ',' << g
          << ")\"/>\n";
    }
  out << "</svg>\n";
  if (!out) throw IoError("cannot write " + path.string());
}

int run_inspect(InspectArgs& a, const Log& log) {
  if (a.task.empty()) throw UsageError("inspect needs a task file");
  if (a.out.empty()) throw UsageError("inspect needs --out");
  TabularTask task;
  try {
    task = load_task(a.task);
  } catch (const std::invalid_argument& e) {
    throw ValidationFailure(std::string("task file failed validation: ") + e.what());
  } catch (const std::exception& e) {
    throw IoError(std::string("cannot read task file: ") + e.what());
  }
  const fs::path dir(a.out);
  ensure_dir(dir);
  const std::size_t n = task.n_states;
  const Matrix kernel = connect_terminals(task);
  const auto sd = unique_stationary_distribution(kernel);
  if (!sd) throw ValidationFailure("uniform-policy chain has several closed classes");
  const ValueSolution vs = value_iteration(task, task.discount_default);
  const auto rank = rank_of(task);
  const auto term = terminal_mask(task);
  std::vector<std::uint8_t> reset(n, 0);
  for (std::size_t s : task.reset_states) reset[s] = 1;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return (*sd)[x] > (*sd)[y]; });

  auto kcsv = open_out(dir / "kernel.csv");
  kcsv << "state";
  for (std::size_t c : order) kcsv << ',' << c;
  kcsv << '\n';
  for (std::size_t r : order) {
    kcsv << r;
    for (std::size_t c : order) kcsv << ',' << kernel(r, c);
    kcsv << '\n';
  }
  auto scsv = open_out(dir / "states.csv");
  scsv << "position,state,rank,sd,v_star,reset,terminal\n";
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t s = order[k];
    scsv << k << ',' << s << ',' << rank[s] << ',' << (*sd)[s] << ',' << vs.v_star[s] << ','
         << static_cast<int>(reset[s]) << ',' << static_cast<int>(term[s]) << '\n';
  }
  if (!kcsv || !scsv) throw IoError("cannot write CSV output in " + dir.string());
  double log_range = 0.0;
  try {
    log_range = sd_log_range(*sd);
  } catch (const std::domain_error&) {
    log_range = std::numeric_limits<double>::infinity();
  }
  json report = {{"file", fs::path(a.task).filename().string()},
                 {"generator", std::string(to_string(task.generator))},
                 {"seed", task.seed},
                 {"n_states", n},
                 {"n_actions", task.n_actions},
                 {"sd_log_range", std::isfinite(log_range) ? json(log_range) : json("inf")},
                 {"sd_entropy", normalized_entropy(*sd)},
                 {"vi_converged", vs.converged},
                 {"reset_states", task.reset_states},
                 {"terminal_states", task.terminal_states}};
  write_json(dir / "report.json", report);
  if (a.svg) write_svg(dir / "kernel.svg", kernel, order);
  log.info("inspect finished", {{"n_states", n}, {"sd_log_range", report["sd_log_range"]}});
  return kOk;
}

// bench -------------------------------------------------------------------

struct BenchArgs {
  Common common;
  std::vector<std::string> families = {"anymdp", "anymdp_no_cr", "garnet2"};
  std::string agent = "tql-ucb";
  std::size_t ns = 16;
  std::size_t na = 5;
  std::size_t tasks = 16;
  std::size_t episodes = 2000;
  std::size_t eval_every = 100;
  std::size_t test_episodes = 5;
  double level = 0.9;
  std::vector<std::string> expect;
  std::string out = "bench";
};

std::vector<AgentSpec> agent_sweep(const std::string& agent) {
  if (agent == "tql-ucb") return default_tql_sweep();
  AgentSpec s;
  if (agent == "oracle") {
    s.kind = AgentKind::oracle;
  } else if (agent == "model-based") {
    s.kind = AgentKind::model_based;
  } else if (agent == "random") {
    s.kind = AgentKind::random;
  } else {
    throw UsageError("--agent must be tql-ucb, oracle, model-based or random");
  }
  return {s};
}

int run_bench(BenchArgs& a, const Log& log) {
  BenchConfig cfg = block<BenchConfig>(a.common.config, "bench");
  cfg.families = a.families;
  cfg.sweep = agent_sweep(a.agent);
  cfg.n_states = a.ns;
  cfg.n_actions = a.na;
  cfg.n_tasks = a.tasks;
  cfg.protocol.train_episodes = a.episodes;
  cfg.protocol.eval_every = a.eval_every;
  cfg.protocol.test_episodes = a.test_episodes;
  cfg.level = a.level;
  cfg.master_seed = a.common.seed;
  cfg.workers = a.common.workers;
  cfg.expected_order = a.expect;
  if (cfg.families.empty()) throw UsageError("--families is empty");
  if (cfg.n_tasks == 0 || cfg.protocol.eval_every == 0 || cfg.protocol.test_episodes == 0)
    throw UsageError("--tasks, --eval-every and --test-episodes must be positive");
  if (!(cfg.level > 0.0 && cfg.level <= 1.0)) throw UsageError("--level must lie in (0, 1]");
  for (const auto& f : cfg.families) check_family(f, cfg.n_states, cfg.n_actions);
  for (const auto& f : cfg.expected_order)
    if (std::find(cfg.families.begin(), cfg.families.end(), f) == cfg.families.end())
      throw UsageError("--expect names a family not in --families: " + f);

  const fs::path dir(a.out);
  ensure_dir(dir);
  const auto t0 = Clock::now();
  const BenchReport report = bench_compare(cfg);
  json j = report.to_json();
  j["config"] = cfg.to_json();
  write_json(dir / "report.json", j);
  try {
    report.write_csv(dir);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  for (const auto& f : report.families)
    log.info("family", {{"family", f.family},
                        {"episodes_to", f.best().episodes_to.mean},
                        {"ci95", f.best().episodes_to.half_width},
                        {"best_normalized", f.best().best_normalized.mean},
                        {"reached_fraction", f.best().reached_fraction}});
  log.info("verdict", {{"verdict", report.verdict}, {"wall_s", seconds_since(t0)}});
  if (report.pass && !*report.pass) throw ValidationFailure("ordering differs from --expect");
  return kOk;
}

// validate-bounds ---------------------------------------------------------

struct BoundsArgs {
  Common common;
  std::vector<std::size_t> ns = {16, 64};
  std::string grid = "default";
  std::vector<double> eta;
  std::vector<std::size_t> band_up;
  std::size_t band_down = 2;
  double eps = 1e-3;
  double tol = 1e-10;
  std::size_t tasks = 0;
  std::string out = "bounds";
};

int run_bounds(BoundsArgs& a, const Log& log) {
  if (a.grid != "default") throw UsageError("--grid supports only 'default'");
  if (a.eta.empty()) a.eta = {0.7, 0.9};
  if (a.band_up.empty()) a.band_up = {2, 4};
  if (a.ns.empty()) throw UsageError("--ns is empty");
  if (!(a.eps > 0.0 && a.eps < 1.0)) throw UsageError("--eps must lie in (0, 1)");
  for (double e : a.eta)
    if (!(e > 0.0 && e < 1.0)) throw UsageError("--eta values must lie in (0, 1)");
  for (std::size_t n : a.ns)
    for (std::size_t b : a.band_up)
      if (n < b + 2) throw UsageError("--ns must exceed band_up + 1");
  const fs::path dir(a.out);
  ensure_dir(dir);

  auto csv = open_out(dir / "bounds.csv");
  csv << "n_states,eta,band_up,band_down,eps,admissible,checked_builder,recurrence_max_abs,"
         "recurrence_max_rel,mirrored_max_abs,minus_min_ratio,pass\n";
  json points = json::array();
  std::size_t failures = 0;
  for (std::size_t n : a.ns)
    for (double eta : a.eta)
      for (std::size_t bu : a.band_up) {
        const bool admissible = decay_admissible(eta, bu);
        bool checked_accepts = true;
        try {
          (void)build_worst_case_kernels(n, eta, a.eps, bu, a.band_down);
        } catch (const std::invalid_argument&) {
          checked_accepts = false;
        }
        const WorstCaseKernels k = build_worst_case_kernels_unchecked(n, eta, a.eps, bu, a.band_down);
        const auto p_plus = stationary_distribution_direct(k.plus);
        const auto p_minus = stationary_distribution_direct(k.minus);
        const RecurrenceCheck rec = check_plus_recurrence(p_plus, eta, bu);
        const RatioCheck ratio = check_minus_ratios(p_minus, a.eps);
        const bool pass = rec.max_abs_residual <= a.tol && ratio.pass && checked_accepts == admissible;
        failures += pass ? 0 : 1;
        csv << n << ',' << json(eta).dump() << ',' << bu << ',' << a.band_down << ',' << json(a.eps).dump() << ',' << admissible << ','
            << (checked_accepts ? "accepted" : "rejected") << ',' << rec.max_abs_residual << ','
            << rec.max_rel_residual << ',' << rec.mirrored_max_abs_residual << ',' << ratio.min_ratio << ','
            << pass << '\n';
        points.push_back({{"n_states", n},
                          {"eta", eta},
                          {"band_up", bu},
                          {"band_down", a.band_down},
                          {"eps", a.eps},
                          {"admissible", admissible},
                          {"checked_builder", checked_accepts ? "accepted" : "rejected"},
                          {"recurrence_max_abs", rec.max_abs_residual},
                          {"mirrored_max_abs", rec.mirrored_max_abs_residual},
                          {"minus_min_ratio", ratio.min_ratio},
                          {"pass", pass}});
        (pass ? log.info("grid point", points.back()) : log.error("grid point failed", points.back()));
      }
  if (!csv) throw IoError("cannot write " + (dir / "bounds.csv").string());

  // Decay fits on sampled tasks, when requested.
  json fits = json::array();
  for (std::size_t n : a.tasks ? a.ns : std::vector<std::size_t>{}) {
    AnyMdpConfig cfg = block<AnyMdpConfig>(a.common.config, "anymdp");
    cfg.n_states = n;
    const AnyMdpConfig r = cfg.resolve();
    std::vector<json> rows(a.tasks);
    parallel_for(a.tasks, a.common.workers, [&](std::size_t i) {
      const SampledTask st = sample_anymdp(cfg, derive_seed(a.common.seed, i));
      const BoundCheckResult b = check_decay_bounds(sd_in_rank_order(st.task), st.report.eta, r.eps_forward,
                                                    *r.band_up, *r.band_down, *r.reset_band);
      rows[i] = b.to_json();
      rows[i]["n_states"] = n;
      rows[i]["seed"] = st.task.seed;
    });
    std::size_t passed = 0;
    for (auto& row : rows) {
      passed += row["pass"].get<bool>() ? 1 : 0;
      fits.push_back(std::move(row));
    }
    log.info("decay fits", {{"n_states", n}, {"passed", passed}, {"tasks", a.tasks}});
    failures += a.tasks - passed;
  }
  write_json(dir / "bounds.json", {{"grid", points}, {"decay_fits", fits}, {"tolerance", a.tol}});
  if (failures) throw ValidationFailure(std::to_string(failures) + " bound checks failed");
  return kOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Procedural tabular MDP toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SampleArgs sample;
  SynthArgs synth;
  InspectArgs inspect;
  BenchArgs bench;
  BoundsArgs bounds;

  auto* s_app = app.add_subcommand("sample", "sample tasks and write task files plus a summary table");
  Bindings sb(s_app);
  add_common(sb, s_app, sample.common);
  sb.add("ns", sample.ns, "states");
  sb.add("na", sample.na, "actions");
  sb.add("count", sample.count, "number of tasks");
  sb.add("out", sample.out, "output directory")->required();
  sb.add("family", sample.family, "anymdp, anymdp_no_cr, garnet<b> or darkroom");
  sb.add("format", sample.format, "bin or json");

  auto* y_app = app.add_subcommand("synth", "synthesize a trajectory dataset");
  Bindings yb(y_app);
  add_common(yb, y_app, synth.common);
  yb.add("tasks", synth.tasks, "tasks to generate");
  yb.add("task-dir", synth.task_dir, "use task_* files from this directory instead");
  yb.add("seqs", synth.seqs, "total sequences (a multiple of the task count; default one per task)");
  yb.add("T", synth.seq_len, "sequence length");
  yb.add("ns", synth.ns, "states");
  yb.add("na", synth.na, "actions");
  yb.add("unk-frac", synth.unk_frac, "fraction of non-marker steps whose tag is masked to 7");
  yb.add("out", synth.out, "dataset path; the manifest is written next to it");
  yb.add("family", synth.family, "task family when generating");
  yb.add("batch", synth.batch, "sequences per parallel batch");
  yb.add("max-fail-frac", synth.max_fail_frac, "exit nonzero above this task failure fraction");

  auto* i_app = app.add_subcommand("inspect", "write SD-ordered kernel, SD and value tables for a task");
  Bindings ib(i_app);
  add_common(ib, i_app, inspect.common);
  i_app->add_option("task", inspect.task, "task file")->required();
  ib.add("out", inspect.out, "output directory")->required();
  ib.flag("svg", inspect.svg, "also write kernel.svg");

  auto* b_app = app.add_subcommand("bench", "compare learning speed across task families");
  Bindings bb(b_app);
  add_common(bb, b_app, bench.common);
  bb.add("families", bench.families, "comma-separated families")->delimiter(',');
  bb.add("agent", bench.agent, "tql-ucb (swept), oracle, model-based or random");
  bb.add("ns", bench.ns, "states");
  bb.add("na", bench.na, "actions");
  bb.add("tasks", bench.tasks, "tasks per family");
  bb.add("episodes", bench.episodes, "training episodes");
  bb.add("eval-every", bench.eval_every, "episodes between evaluations");
  bb.add("test-episodes", bench.test_episodes, "test episodes per evaluation");
  bb.add("level", bench.level, "normalized score threshold");
  bb.add("expect", bench.expect, "expected fastest-to-slowest order; exit 1 if violated")->delimiter(',');
  bb.add("out", bench.out, "output directory");

  auto* v_app = app.add_subcommand("validate-bounds", "check the extremal-kernel identities and decay fits");
  Bindings vb(v_app);
  add_common(vb, v_app, bounds.common);
  vb.add("ns", bounds.ns, "state counts")->delimiter(',');
  vb.add("grid", bounds.grid, "parameter grid");
  vb.add("eta", bounds.eta, "eta values (default 0.7,0.9)")->delimiter(',');
  vb.add("band-up", bounds.band_up, "b_+ values (default 2,4)")->delimiter(',');
  vb.add("band-down", bounds.band_down, "b_-");
  vb.add("eps", bounds.eps, "forward mass eps");
  vb.add("tol", bounds.tol, "recurrence tolerance");
  vb.add("tasks", bounds.tasks, "sampled tasks per state count for decay fits");
  vb.add("out", bounds.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  Log log;
  struct Entry {
    CLI::App* app;
    Bindings* bindings;
    Common* common;
    std::function<int(const Log&)> run;
  };
  const std::vector<Entry> entries = {
      {s_app, &sb, &sample.common, [&](const Log& l) { return run_sample(sample, l); }},
      {y_app, &yb, &synth.common, [&](const Log& l) { return run_synth(synth, l); }},
      {i_app, &ib, &inspect.common, [&](const Log& l) { return run_inspect(inspect, l); }},
      {b_app, &bb, &bench.common, [&](const Log& l) { return run_bench(bench, l); }},
      {v_app, &vb, &bounds.common, [&](const Log& l) { return run_bounds(bounds, l); }},
  };
  for (const Entry& e : entries) {
    if (!e.app->parsed()) continue;
    log.cmd = e.app->get_name();
    try {
      e.common->config = load_config(e.common->config_path);
      e.bindings->apply(e.common->config);
      log.level = parse_level(e.common->log_level);
      if (e.common->workers == 0) throw UsageError("--workers must be positive");
      return e.run(log);
    } catch (const UsageError& ex) {
      log.error("usage error", {{"error", ex.what()}});
      return kUsageError;
    } catch (const IoError& ex) {
      log.error("i/o error", {{"error", ex.what()}});
      return kIoError;
    } catch (const fs::filesystem_error& ex) {
      log.error("i/o error", {{"error", ex.what()}});
      return kIoError;
    } catch (const ValidationFailure& ex) {
      log.error("validation failure", {{"error", ex.what()}});
      return kValidationFailure;
    } catch (const DatasetError& ex) {
      log.error("dataset error", {{"kind", std::string(to_string(ex.kind()))}, {"error", ex.what()}});
      return ex.kind() == DatasetErrorKind::io ? kIoError : kValidationFailure;
    } catch (const std::exception& ex) {
      log.error("failed", {{"error", ex.what()}});
      return kValidationFailure;
    }
  }
  return kUsageError;
}

}  // namespace anymdp::cli

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "anymdp/core/task.hpp"

namespace anymdp {

// Acceptance conditions of an AnyMDP task re-derived with Eigen, sharing no
// numerical code with the sampler. Parameters come from task.config.
struct AuditReport {
  bool structure_ok = false;  // stochastic rows, reset/terminal/ranking sanity
  bool band_ok = false;       // uniform-policy kernel in ranking order
  bool ergodic = false;       // terminal-connected chain: simple unit eigenvalue, rest inside the unit circle
  bool ascending = false;     // arrival value of the top rank exceeds every reset value by kappa
  bool entropy_ok = false;    // oracle-policy SD entropy exceeds h0
  double max_row_error = 0.0;
  double second_modulus = 0.0;
  double margin = 0.0;
  double entropy = 0.0;
  std::string first_failure;  // empty when pass

  bool pass() const { return first_failure.empty(); }
  nlohmann::json to_json() const;
};

// Requires an AnyMDP generator id. A single-state task is a bandit and only
// the structure and value checks apply.
AuditReport audit_anymdp_task(const TabularTask& task);

}  // namespace anymdp

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "harpagon/splitter.hpp"
#include "harpagon/types.hpp"

namespace harpagon {

struct SynthOptions {
  int min_modules = 1;
  int max_modules = 4;
  int min_configs = 2;
  int max_configs = 5;
  int max_hardware = 2;
  double min_rate = 20.0;
  double max_rate = 300.0;
  // Shrink instances so the brute-force oracle stays tractable.
  bool oracle_scale = false;
};

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace detail

// Seeded random workload: a chain or diamond DAG whose modules carry profiles
// with sub-linear duration growth in batch size (larger batches always gain
// throughput), over one or two hardware types. The SLO is sampled around the
// end-to-end latency of the cheapest working configuration so that most, but
// not all, instances are feasible.
inline AppDag synthesize_workload(std::mt19937_64& rng,
                                  const SynthOptions& options = {}) {
  SynthOptions opt = options;
  if (opt.oracle_scale) {
    opt.max_modules = std::min(opt.max_modules, 3);
    opt.max_configs = std::min(opt.max_configs, 4);
    opt.min_rate = 5.0;
    opt.max_rate = 50.0;
  }

  std::vector<HardwareType> hardware;
  hardware.push_back({"hw0", 1.0});
  std::vector<double> speed{1.0};
  int hw_count = detail::uniform_int(rng, 1, opt.max_hardware);
  for (int h = 1; h < hw_count; ++h) {
    hardware.push_back(
        {"hw" + std::to_string(h), detail::uniform(rng, 1.5, 4.0)});
    speed.push_back(detail::uniform(rng, 0.3, 0.7));
  }

  const std::vector<int> ladder =
      opt.oracle_scale ? std::vector<int>{1, 2, 4, 8}
                       : std::vector<int>{1, 2, 4, 8, 16, 32};

  AppDag dag;
  int n_modules = detail::uniform_int(rng, opt.min_modules, opt.max_modules);
  for (int m = 0; m < n_modules; ++m) {
    std::string id = "m" + std::to_string(m);
    ModuleProfile profile;
    profile.module_id = id;
    double d1 = detail::uniform(rng, 0.02, 0.3);
    double gamma = detail::uniform(rng, 0.4, 0.85);
    int n_configs = detail::uniform_int(rng, opt.min_configs, opt.max_configs);
    std::set<std::pair<int, int>> used;  // (hardware, batch)
    int guard = 0;
    while (static_cast<int>(used.size()) < n_configs && ++guard < 200) {
      int h = detail::uniform_int(rng, 0, static_cast<int>(hardware.size()) - 1);
      int b = ladder[detail::uniform_int(rng, 0, static_cast<int>(ladder.size()) - 1)];
      if (!used.insert({h, b}).second) continue;
      ConfigProfile c;
      c.module_id = id;
      c.hardware = hardware[h];
      c.batch = b;
      c.duration = d1 * speed[h] * std::pow(static_cast<double>(b), gamma);
      profile.entries.push_back(c);
    }
    dag.modules[id] = std::move(profile);
    dag.rates[id] = detail::uniform(rng, opt.min_rate, opt.max_rate);
  }

  if (n_modules >= 2) {
    bool diamond = n_modules >= 3 && detail::uniform_int(rng, 0, 1) == 1;
    if (diamond) {
      // m0 fans out to the middle modules, which join at the last one.
      for (int m = 1; m < n_modules - 1; ++m) {
        dag.edges.push_back({"m0", "m" + std::to_string(m)});
        dag.edges.push_back({"m" + std::to_string(m),
                             "m" + std::to_string(n_modules - 1)});
      }
      if (n_modules == 3) dag.edges.push_back({"m0", "m2"});
    } else {
      for (int m = 0; m + 1 < n_modules; ++m)
        dag.edges.push_back({"m" + std::to_string(m),
                             "m" + std::to_string(m + 1)});
    }
  }

  // Anchor the SLO on the default working state (least cost-efficient
  // configs): factors below 1 yield infeasible instances by construction.
  dag.slo = 1.0;  // placeholder so the state evaluation has a valid DAG
  SplitState state = default_state(dag);
  std::map<std::string, double> wcls;
  for (const auto& [id, idx] : state.current) {
    const ConfigProfile& c = canonical_order(dag.modules.at(id))[idx];
    wcls[id] = planning_wcl(c, dag.rates.at(id), DispatchPolicy::TC);
  }
  double base = e2e_latency(dag, wcls);
  dag.slo = base * detail::uniform(rng, 0.85, 2.5);
  return dag;
}

}  // namespace harpagon

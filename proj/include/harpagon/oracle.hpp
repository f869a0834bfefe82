#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harpagon/dispatch.hpp"
#include "harpagon/types.hpp"

namespace harpagon {

struct OracleLimits {
  std::int64_t max_nodes = 2000000;       // recursion states per module
  std::int64_t max_schedules = 200000;    // emitted schedules per module
};

struct OracleResult {
  bool exceeded = false;  // search space larger than the configured limits
  std::vector<ModuleSchedule> pareto;  // cost/wcl Pareto front, cost ascending
};

namespace detail {

inline bool oracle_emit_less(const ModuleSchedule& a, const ModuleSchedule& b) {
  if (std::abs(a.cost - b.cost) > kEps) return a.cost < b.cost;
  if (std::abs(a.wcl - b.wcl) > kEps) return a.wcl < b.wcl;
  if (a.tiers.size() != b.tiers.size()) return a.tiers.size() < b.tiers.size();
  for (size_t i = 0; i < a.tiers.size(); ++i) {
    const Tier& x = a.tiers[i];
    const Tier& y = b.tiers[i];
    if (x.config.hardware.name != y.config.hardware.name)
      return x.config.hardware.name < y.config.hardware.name;
    if (x.config.batch != y.config.batch) return x.config.batch < y.config.batch;
    if (x.full_machines != y.full_machines)
      return x.full_machines < y.full_machines;
    if (x.partial_fraction != y.partial_fraction)
      return x.partial_fraction < y.partial_fraction;
  }
  return false;
}

}  // namespace detail

// Exhaustive enumeration of all tier lists serving `rate`: any number of full
// machines per config in canonical order, closed either exactly, by a single
// partial machine, or by rounding the residual up to full machines of the
// closing config fed with dummy requests (total dummy below one machine of
// that config). The returned set is the Pareto front over (cost, wcl) among
// schedules with wcl <= max_wcl, sorted by cost.
inline OracleResult enumerate_module_schedules(double rate,
                                               const ModuleProfile& profile,
                                               DispatchPolicy policy,
                                               double max_wcl,
                                               const OracleLimits& limits = {}) {
  const std::vector<ConfigProfile> order = canonical_order(profile);
  OracleResult result;
  std::vector<ModuleSchedule> emitted;
  std::int64_t nodes = 0;

  std::vector<Tier> tiers;
  auto emit = [&](double dummy_rate) {
    if (static_cast<std::int64_t>(emitted.size()) >= limits.max_schedules) {
      result.exceeded = true;
      return;
    }
    ModuleSchedule s;
    s.module_id = profile.module_id;
    s.tiers = tiers;
    s.dummy_rate = dummy_rate;
    s.cost = schedule_cost(s);
    s.wcl = module_wcl(s, policy);
    if (s.wcl <= max_wcl + kEps) emitted.push_back(std::move(s));
  };

  // rec(k, rw): allocate the residual rw starting at config index k.
  auto rec = [&](auto&& self, size_t k, double rw) -> void {
    if (++nodes > limits.max_nodes) {
      result.exceeded = true;
      return;
    }
    if (rw <= kEps) {
      emit(0.0);
      return;
    }
    if (k >= order.size() || result.exceeded) return;
    const ConfigProfile& c = order[k];
    const double t = c.throughput();
    // j == round-up closes the schedule by over-covering the residual with
    // dummy-fed full machines (the overshoot stays below one machine of c).
    const int cover = static_cast<int>(std::floor(rw / t + kEps));
    const int max_full = rw - cover * t > kEps ? cover + 1 : cover;
    for (int j = 0; j <= max_full && !result.exceeded; ++j) {
      double left = rw - j * t;
      if (std::abs(left) < kEps) left = 0.0;
      if (j > 0) tiers.push_back({c, j, 0.0, j * t});
      if (left <= 0.0) {
        if (j > 0) emit(-left);
      } else {
        self(self, k + 1, left);
        if (left < t - kEps) {  // close with a partial machine
          tiers.push_back({c, 0, left / t, left});
          emit(0.0);
          tiers.pop_back();
        }
      }
      if (j > 0) tiers.pop_back();
    }
  };
  if (!(rate > 0.0))
    throw std::invalid_argument("enumerate_module_schedules: non-positive rate");
  rec(rec, 0, rate);

  std::sort(emitted.begin(), emitted.end(), detail::oracle_emit_less);
  for (const ModuleSchedule& s : emitted) {
    bool dominated = false;
    for (const ModuleSchedule& p : result.pareto) {
      if (p.cost <= s.cost + kEps && p.wcl <= s.wcl + kEps) {
        dominated = true;
        break;
      }
    }
    if (!dominated) result.pareto.push_back(s);
  }
  return result;
}

// Minimum-cost schedule for one module under a hard latency budget.
inline std::optional<ModuleSchedule> oracle_module(double rate,
                                                   double budget,
                                                   const ModuleProfile& profile,
                                                   DispatchPolicy policy,
                                                   const OracleLimits& limits = {},
                                                   bool* exceeded = nullptr) {
  OracleResult res = enumerate_module_schedules(rate, profile, policy, budget,
                                                limits);
  if (exceeded) *exceeded = res.exceeded;
  if (res.pareto.empty()) return std::nullopt;
  return res.pareto.front();  // cost ascending
}

struct OraclePlan {
  bool exceeded = false;
  std::optional<SessionPlan> plan;
};

// Globally optimal plan by brute force: per-module Pareto fronts over
// (cost, wcl), then a pruned search over the cross product subject to the
// end-to-end latency objective. Tractable only for small workloads.
inline OraclePlan optimal_plan(const AppDag& dag, DispatchPolicy policy,
                               const OracleLimits& limits = {}) {
  OraclePlan out;
  std::vector<std::string> ids;
  for (const auto& [id, _] : dag.modules) ids.push_back(id);

  std::vector<std::vector<ModuleSchedule>> fronts;
  for (const std::string& id : ids) {
    OracleResult res = enumerate_module_schedules(dag.rates.at(id),
                                                  dag.modules.at(id), policy,
                                                  dag.slo, limits);
    if (res.exceeded) out.exceeded = true;
    if (res.pareto.empty()) return out;  // module infeasible even alone
    fronts.push_back(std::move(res.pareto));
  }

  // Optimistic remainders for pruning: cheapest cost and smallest wcl per
  // module over its front.
  std::vector<double> min_cost_tail(ids.size() + 1, 0.0);
  std::vector<double> min_wcl(ids.size(), 0.0);
  for (size_t m = ids.size(); m-- > 0;) {
    double c = std::numeric_limits<double>::infinity();
    double w = std::numeric_limits<double>::infinity();
    for (const ModuleSchedule& s : fronts[m]) {
      c = std::min(c, s.cost);
      w = std::min(w, s.wcl);
    }
    min_cost_tail[m] = min_cost_tail[m + 1] + c;
    min_wcl[m] = w;
  }

  std::map<std::string, double> wcls;
  std::vector<int> choice(ids.size(), -1), best_choice;
  double best_cost = std::numeric_limits<double>::infinity();

  auto optimistic_feasible = [&](size_t upto) {
    std::map<std::string, double> probe = wcls;
    for (size_t m = upto; m < ids.size(); ++m) probe[ids[m]] = min_wcl[m];
    return e2e_latency(dag, probe) <= dag.slo + kEps;
  };

  auto rec = [&](auto&& self, size_t m, double cost) -> void {
    if (cost + min_cost_tail[m] >= best_cost - kEps) return;
    if (m == ids.size()) {
      best_cost = cost;
      best_choice = choice;
      return;
    }
    for (size_t i = 0; i < fronts[m].size(); ++i) {
      wcls[ids[m]] = fronts[m][i].wcl;
      choice[m] = static_cast<int>(i);
      if (optimistic_feasible(m + 1)) self(self, m + 1, cost + fronts[m][i].cost);
    }
    wcls.erase(ids[m]);
    choice[m] = -1;
  };
  rec(rec, 0, 0.0);

  if (best_choice.empty()) return out;
  SessionPlan plan;
  for (size_t m = 0; m < ids.size(); ++m) {
    const ModuleSchedule& s = fronts[m][best_choice[m]];
    plan.schedules[ids[m]] = s;
    plan.budgets[ids[m]] = s.wcl;
    plan.total_cost += s.cost;
  }
  plan.e2e_latency = e2e_latency(dag, [&] {
    std::map<std::string, double> w;
    for (const auto& [id, s] : plan.schedules) w[id] = s.wcl;
    return w;
  }());
  out.plan = std::move(plan);
  return out;
}

}  // namespace harpagon

#pragma once

#include <map>
#include <optional>
#include <string>

#include "harpagon/scheduler.hpp"
#include "harpagon/splitter.hpp"
#include "harpagon/types.hpp"

namespace harpagon {

// Full planning pipeline: split the SLO into per-module budgets, schedule
// each module, then run the latency reassigner. Returns nullopt when the SLO
// cannot be met.
inline std::optional<SessionPlan> plan_session(
    const AppDag& dag, const SchedulerOptions& sched_options,
    const SplitterOptions& split_options) {
  auto budgets = baseline_split(dag, split_options, sched_options.policy,
                                sched_options);
  if (!budgets) return std::nullopt;

  SessionPlan plan;
  plan.budgets = *budgets;
  std::map<std::string, std::string> failed;
  for (const auto& [id, profile] : dag.modules) {
    auto sched = schedule_module(dag.rates.at(id), plan.budgets.at(id), profile,
                                 sched_options);
    if (sched) {
      plan.schedules[id] = *sched;
    } else {
      failed[id] = id;
    }
  }

  // A module can miss its split budget (the residual may be uncollectable in
  // time); retry with the largest budget its longest path still allows.
  for (const auto& [id, _] : failed) {
    std::map<std::string, double> wcls;
    for (const auto& [mid, __] : dag.modules) {
      if (mid == id) {
        wcls[mid] = 0.0;
      } else if (plan.schedules.count(mid)) {
        wcls[mid] = plan.schedules.at(mid).wcl;
      } else {
        wcls[mid] = plan.budgets.at(mid);
      }
    }
    double relaxed = dag.slo - path_latency_through(dag, id, wcls);
    if (!(relaxed > plan.budgets.at(id) + kEps)) return std::nullopt;
    auto sched = schedule_module(dag.rates.at(id), relaxed,
                                 dag.modules.at(id), sched_options);
    if (!sched) return std::nullopt;
    plan.schedules[id] = *sched;
    plan.budgets[id] = relaxed;
  }

  detail::refresh_plan_totals(plan, dag);
  if (sched_options.enable_reassign)
    plan = reassign_latency(plan, dag, sched_options);
  if (plan.e2e_latency > dag.slo + kEps) return std::nullopt;
  return plan;
}

}  // namespace harpagon

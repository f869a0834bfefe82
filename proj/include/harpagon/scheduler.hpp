#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "harpagon/dispatch.hpp"
#include "harpagon/types.hpp"

namespace harpagon {

struct SchedulerOptions {
  DispatchPolicy policy = DispatchPolicy::TC;
  std::optional<int> max_configs;  // nullopt == unlimited
  bool enable_dummy = true;
  bool enable_reassign = true;
};

namespace detail {

inline void append_full_tier(std::vector<Tier>& tiers, const ConfigProfile& c,
                             int machines) {
  double rate = machines * c.throughput();
  if (!tiers.empty() && tiers.back().partial_fraction == 0.0 &&
      same_config(tiers.back().config, c)) {
    tiers.back().full_machines += machines;
    tiers.back().assigned_rate += rate;
  } else {
    tiers.push_back({c, machines, 0.0, rate});
  }
}

inline void append_partial_tier(std::vector<Tier>& tiers, const ConfigProfile& c,
                                double rate) {
  tiers.push_back({c, 0, rate / c.throughput(), rate});
}

inline ModuleSchedule finalize_schedule(const std::string& module_id,
                                        std::vector<Tier> tiers,
                                        double dummy_rate,
                                        DispatchPolicy policy) {
  ModuleSchedule s;
  s.module_id = module_id;
  s.tiers = std::move(tiers);
  s.dummy_rate = dummy_rate;
  s.cost = schedule_cost(s);
  s.wcl = s.tiers.empty() ? 0.0 : module_wcl(s, policy);
  return s;
}

// Final-config search for the bounded-configs mode: find the first config in
// canonical order that can absorb all of rw within budget, checking every
// machine the allocation would create (full run plus trailing partial).
inline bool absorb_with_single_config(const ConfigProfile& c, double rw,
                                      double budget, DispatchPolicy policy) {
  double t = c.throughput();
  int fulls = static_cast<int>(std::floor(rw / t + kEps));
  double leftover = rw - fulls * t;
  if (leftover < kEps) leftover = 0.0;
  if (fulls >= 1) {
    // The full run forms one tier whose remaining workload is all of rw.
    double full_wcl = (policy == DispatchPolicy::TC)
                          ? c.duration + c.batch / rw
                          : 2.0 * c.duration;
    if (full_wcl > budget + kEps) return false;
  }
  if (leftover > 0.0 && alloc_wcl(c, leftover, policy) > budget + kEps)
    return false;
  if (fulls == 0 && leftover == 0.0) return false;
  return true;
}

inline std::optional<ModuleSchedule> greedy_alloc(
    double rate, double budget, const std::string& module_id,
    const std::vector<ConfigProfile>& order, size_t start,
    const SchedulerOptions& options) {
  std::vector<Tier> tiers;
  std::set<size_t> used;
  double rw = rate;
  size_t k = start;
  while (rw > kEps) {
    if (k >= order.size()) return std::nullopt;
    const ConfigProfile& c = order[k];
    bool is_new = !used.count(k);
    if (options.max_configs && is_new &&
        static_cast<int>(used.size()) == *options.max_configs - 1) {
      // Limit reached: re-search a single config for all of rw. Candidates
      // ranking before the tiers already placed would break canonical order.
      for (const ConfigProfile& cand : order) {
        if (!tiers.empty() && canonical_less(cand, tiers.back().config))
          continue;
        if (!detail::absorb_with_single_config(cand, rw, budget, options.policy))
          continue;
        double t = cand.throughput();
        int fulls = static_cast<int>(std::floor(rw / t + kEps));
        double leftover = rw - fulls * t;
        if (leftover < kEps) leftover = 0.0;
        if (fulls >= 1) detail::append_full_tier(tiers, cand, fulls);
        if (leftover > 0.0) detail::append_partial_tier(tiers, cand, leftover);
        return detail::finalize_schedule(module_id, std::move(tiers), 0.0,
                                         options.policy);
      }
      return std::nullopt;
    }
    if (detail::alloc_wcl(c, rw, options.policy) <= budget + kEps) {
      double n = rw / c.throughput();
      if (n >= 1.0 - kEps) {
        int fulls = static_cast<int>(std::floor(n + kEps));
        detail::append_full_tier(tiers, c, fulls);
        rw -= fulls * c.throughput();
        if (rw < kEps) rw = 0.0;
      } else {
        detail::append_partial_tier(tiers, c, rw);
        rw = 0.0;
      }
      used.insert(k);
    } else {
      ++k;
    }
  }
  if (tiers.empty()) return std::nullopt;
  return detail::finalize_schedule(module_id, std::move(tiers), 0.0,
                                   options.policy);
}

}  // namespace detail

// Greedy multi-tuple allocation: walk configs in canonical order, allocating
// full machines while the prospective worst-case latency fits the budget,
// finishing with a partial machine for the remainder. With a finite
// max_configs, the last permitted config must absorb the whole residual
// (two-tuple semantics). The walk is restarted from every suffix of the
// canonical order (the top-ratio config can strand a residual too small to
// collect within budget) and with every config cap up to the allowed limit
// (tighter caps close the residual with the single-config re-search, an
// option the uncapped walk lacks; trying them keeps cost monotone in the
// cap). Returns the cheapest feasible result, nullopt if none exists.
inline std::optional<ModuleSchedule> generate_config(
    double rate, double budget, const ModuleProfile& profile,
    const SchedulerOptions& options) {
  if (!(rate > 0.0) || !(budget > 0.0))
    throw std::invalid_argument("generate_config: non-positive rate or budget");
  const std::vector<ConfigProfile> order = canonical_order(profile);
  const int max_cap = options.max_configs
                          ? *options.max_configs
                          : static_cast<int>(order.size());
  std::optional<ModuleSchedule> best;
  auto consider = [&](const SchedulerOptions& o) {
    for (size_t start = 0; start < order.size(); ++start) {
      auto cand =
          detail::greedy_alloc(rate, budget, profile.module_id, order, start, o);
      if (!cand) continue;
      if (!best || cand->cost < best->cost - kEps ||
          (std::abs(cand->cost - best->cost) <= kEps &&
           cand->wcl < best->wcl - kEps))
        best = std::move(cand);
    }
  };
  if (!options.max_configs) consider(options);
  SchedulerOptions capped = options;
  for (int cap = max_cap; cap >= 1; --cap) {
    capped.max_configs = cap;
    consider(capped);
  }
  return best;
}

// Leftover workload u_i per tier: the total rate assigned to strictly later
// tiers. Cost-minimum schedules keep u_i < t_i for every tier.
inline std::vector<double> leftover_workloads(const ModuleSchedule& schedule) {
  std::vector<double> u(schedule.tiers.size(), 0.0);
  double suffix = 0.0;
  for (size_t i = schedule.tiers.size(); i-- > 0;) {
    u[i] = suffix;
    suffix += schedule.tiers[i].assigned_rate;
  }
  return u;
}

namespace detail {

// Equal-cost ties prefer fewer dummy requests, then the incumbent.
inline void adopt_if_cheaper(std::optional<ModuleSchedule>& best,
                             const ModuleSchedule& cand) {
  if (!best || cand.cost < best->cost - kEps ||
      (std::abs(cand.cost - best->cost) <= kEps &&
       cand.dummy_rate < best->dummy_rate - kEps))
    best = cand;
}

// Dummy-padded candidate: regenerate at rate + dum. Dummies exist only to
// fill machines, so padded schedules ending in a partial machine are
// rejected (this also keeps them inside the brute-force search space).
inline void consider_dummy(std::optional<ModuleSchedule>& best, double rate,
                           double budget, const ModuleProfile& profile,
                           const SchedulerOptions& options, double dum) {
  if (dum <= kEps) return;
  auto cand = generate_config(rate + dum, budget, profile, options);
  if (!cand || cand->tiers.empty()) return;
  if (cand->tiers.back().partial_fraction > 0.0) return;
  cand->dummy_rate = dum;
  adopt_if_cheaper(best, *cand);
}

// All machines on one config, rate rounded up to whole machines. The greedy
// regeneration can miss these when a higher-ratio config absorbs the head of
// the padded rate and strands the rest.
inline void consider_single_config(std::optional<ModuleSchedule>& best,
                                   double rate, double budget,
                                   const ModuleProfile& profile,
                                   const SchedulerOptions& options) {
  for (const ConfigProfile& c : canonical_order(profile)) {
    double t = c.throughput();
    int n = static_cast<int>(std::ceil(rate / t - kEps));
    double dum = n * t - rate;
    if (dum <= kEps) continue;
    std::vector<Tier> tiers{{c, n, 0.0, n * t}};
    ModuleSchedule cand = finalize_schedule(profile.module_id, std::move(tiers),
                                            dum, options.policy);
    if (cand.wcl <= budget + kEps) adopt_if_cheaper(best, cand);
  }
}

}  // namespace detail

// Dummy generator: for each tier with leftover workload, try rounding the
// leftover up to one extra full machine of that tier's config by injecting
// dum_i = t_i - u_i synthetic requests; additionally try rounding the whole
// rate up to full machines of each config. Keep the cheapest outcome.
inline ModuleSchedule apply_dummy(const ModuleSchedule& schedule, double rate,
                                  double budget, const ModuleProfile& profile,
                                  const SchedulerOptions& options) {
  std::optional<ModuleSchedule> best = schedule;
  const std::vector<double> u = leftover_workloads(schedule);
  for (size_t i = 0; i < schedule.tiers.size(); ++i) {
    if (u[i] <= kEps) continue;
    detail::consider_dummy(best, rate, budget, profile, options,
                           schedule.tiers[i].config.throughput() - u[i]);
  }
  for (const ConfigProfile& c : canonical_order(profile)) {
    double t = c.throughput();
    detail::consider_dummy(best, rate, budget, profile, options,
                           std::ceil(rate / t - kEps) * t - rate);
  }
  detail::consider_single_config(best, rate, budget, profile, options);
  return *best;
}

namespace detail {

// When the greedy allocator cannot place the workload at all (a residual too
// small to collect within budget), rounding the rate up to whole machines
// can still produce a feasible schedule. Mirrors the dummy generator's
// round-up moves for the infeasible case.
inline std::optional<ModuleSchedule> dummy_rescue(
    double rate, double budget, const ModuleProfile& profile,
    const SchedulerOptions& options) {
  std::optional<ModuleSchedule> best;
  for (const ConfigProfile& c : canonical_order(profile)) {
    double t = c.throughput();
    consider_dummy(best, rate, budget, profile, options,
                   std::ceil(rate / t - kEps) * t - rate);
  }
  consider_single_config(best, rate, budget, profile, options);
  return best;
}

}  // namespace detail

// Per-module pipeline: greedy allocation, then the dummy generator when
// enabled. Latency reassignment runs at plan level (see reassign_latency).
inline std::optional<ModuleSchedule> schedule_module(
    double rate, double budget, const ModuleProfile& profile,
    const SchedulerOptions& options) {
  auto base = generate_config(rate, budget, profile, options);
  if (!base) {
    if (options.enable_dummy)
      return detail::dummy_rescue(rate, budget, profile, options);
    return std::nullopt;
  }
  if (!options.enable_dummy) return *base;
  return apply_dummy(*base, rate, budget, profile, options);
}

namespace detail {

inline std::map<std::string, double> plan_wcls(const SessionPlan& plan) {
  std::map<std::string, double> wcls;
  for (const auto& [id, s] : plan.schedules) wcls[id] = s.wcl;
  return wcls;
}

inline void refresh_plan_totals(SessionPlan& plan, const AppDag& dag) {
  plan.total_cost = 0.0;
  for (const auto& [id, s] : plan.schedules) plan.total_cost += s.cost;
  plan.e2e_latency = e2e_latency(dag, plan_wcls(plan));
}

// Candidate for the latency reassigner: keep the first (majority) tier fixed
// and re-derive the residual with the module's share of the end-to-end gap.
inline std::optional<ModuleSchedule> reassign_candidate(
    const ModuleSchedule& current, double rate, double budget_residual,
    const ModuleProfile& profile, const SchedulerOptions& options) {
  if (current.tiers.size() < 2) return std::nullopt;
  const Tier& first = current.tiers.front();
  if (first.full_machines < 1) return std::nullopt;
  double residual_rate = rate - first.assigned_rate;
  if (residual_rate <= kEps) return std::nullopt;

  // Residual configs must rank at or after the majority config so the merged
  // tier list stays in canonical order.
  std::vector<ConfigProfile> order = canonical_order(profile);
  ModuleProfile sub{profile.module_id, {}};
  bool past_first = false;
  for (const ConfigProfile& c : order) {
    if (same_config(c, first.config)) past_first = true;
    if (past_first) sub.entries.push_back(c);
  }
  if (sub.entries.empty()) return std::nullopt;

  // The kept first tier consumes one config slot of the bounded-configs mode.
  SchedulerOptions resid_options = options;
  if (options.max_configs) {
    if (*options.max_configs <= 1) return std::nullopt;
    resid_options.max_configs = *options.max_configs - 1;
  }
  auto resid = generate_config(residual_rate, budget_residual, sub, resid_options);
  if (resid && options.enable_dummy)
    resid = apply_dummy(*resid, residual_rate, budget_residual, sub, resid_options);
  else if (!resid && options.enable_dummy)
    resid = dummy_rescue(residual_rate, budget_residual, sub, resid_options);
  if (!resid) return std::nullopt;

  std::vector<Tier> tiers;
  tiers.push_back(first);
  for (const Tier& t : resid->tiers) {
    if (t.partial_fraction == 0.0)
      append_full_tier(tiers, t.config, t.full_machines);
    else
      tiers.push_back(t);
  }
  ModuleSchedule merged = finalize_schedule(current.module_id, std::move(tiers),
                                            resid->dummy_rate, options.policy);
  if (merged.wcl > budget_residual + kEps) return std::nullopt;
  return merged;
}

}  // namespace detail

// Latency reassigner: repeatedly adopt the single budget move with the
// largest total cost reduction. Two move kinds are searched: expansions
// (offer one module the slack along its longest path, re-derive either its
// residual tiers or the whole module) and trades (tighten one module to a
// round-up schedule so another module's budget can grow).
inline SessionPlan reassign_latency(const SessionPlan& plan, const AppDag& dag,
                                    const SchedulerOptions& options) {
  SessionPlan out = plan;
  for (int iter = 0; iter < 16; ++iter) {
    auto wcls = detail::plan_wcls(out);

    double best_reduction = kEps;
    std::vector<std::pair<std::string, ModuleSchedule>> best_moves;
    std::vector<std::pair<std::string, double>> best_budgets;

    for (const auto& [id, sched] : out.schedules) {
      double slack = dag.slo - path_latency_through(dag, id, wcls);
      if (slack <= kEps) continue;
      double budget_residual = sched.wcl + slack;
      auto cand = detail::reassign_candidate(sched, dag.rates.at(id),
                                             budget_residual,
                                             dag.modules.at(id), options);
      // A whole-module redo at the enlarged budget can beat the fixed-tier
      // candidate (e.g. when the slack unlocks a larger batch outright).
      auto redo = schedule_module(dag.rates.at(id), budget_residual,
                                  dag.modules.at(id), options);
      if (redo && (!cand || redo->cost < cand->cost - kEps)) cand = redo;
      if (!cand) continue;
      double reduction = sched.cost - cand->cost;
      if (reduction > best_reduction) {
        best_reduction = reduction;
        best_moves = {{id, *cand}};
        best_budgets = {{id, budget_residual}};
      }
    }

    // Trades: pull one module down to a round-up schedule (every machine
    // full on one config), then let another module spend the freed latency.
    if (out.schedules.size() > 1) {
      for (const auto& [id, sched] : out.schedules) {
        for (const ConfigProfile& c :
             canonical_order(dag.modules.at(id))) {
          double rate = dag.rates.at(id);
          double t = c.throughput();
          int n = static_cast<int>(std::ceil(rate / t - kEps));
          std::vector<Tier> tiers{{c, n, 0.0, n * t}};
          ModuleSchedule anchor = detail::finalize_schedule(
              sched.module_id, std::move(tiers), n * t - rate, options.policy);
          if (anchor.wcl >= sched.wcl - kEps) continue;  // not a tightening
          auto tight =
              schedule_module(rate, anchor.wcl, dag.modules.at(id), options);
          if (!tight) continue;
          for (const auto& [other, other_sched] : out.schedules) {
            if (other == id) continue;
            auto probe = wcls;
            probe[id] = tight->wcl;
            probe[other] = 0.0;
            double budget = dag.slo - path_latency_through(dag, other, probe);
            if (budget <= kEps) continue;
            auto cand = schedule_module(dag.rates.at(other), budget,
                                        dag.modules.at(other), options);
            if (!cand) continue;
            double reduction = (sched.cost - tight->cost) +
                               (other_sched.cost - cand->cost);
            if (reduction > best_reduction) {
              best_reduction = reduction;
              best_moves = {{id, *tight}, {other, *cand}};
              best_budgets = {{id, tight->wcl}, {other, budget}};
            }
          }
        }
      }
    }

    if (best_moves.empty()) break;
    for (const auto& [id, s] : best_moves) out.schedules[id] = s;
    for (const auto& [id, b] : best_budgets) out.budgets[id] = b;
    detail::refresh_plan_totals(out, dag);
  }
  detail::refresh_plan_totals(out, dag);
  return out;
}

}  // namespace harpagon

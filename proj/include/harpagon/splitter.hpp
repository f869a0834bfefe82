#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "harpagon/dispatch.hpp"
#include "harpagon/scheduler.hpp"
#include "harpagon/types.hpp"

namespace harpagon {

enum class SplitMethod { LC, Throughput, Quantized, Even };

struct SplitterOptions {
  SplitMethod method = SplitMethod::LC;
  double quantized_step = 0.01;  // seconds, for SplitMethod::Quantized
  bool enable_merge = true;
  int cost_direct_r = 3;  // 0 disables the cost-direct pass
};

// One applied operation of the latency splitter: module `module_id` switched
// from config index `old_idx` to `new_idx` (indices into canonical order).
struct SplitOp {
  std::string module_id;
  int old_idx = 0;
  int new_idx = 0;
  double lc = 0.0;
};

struct SplitState {
  std::map<std::string, int> current;  // module -> canonical config index
  std::vector<SplitOp> history;
};

namespace detail {

struct SplitContext {
  const AppDag* dag = nullptr;
  DispatchPolicy policy = DispatchPolicy::TC;
  std::map<std::string, std::vector<ConfigProfile>> order;

  const ConfigProfile& config(const std::string& id, int idx) const {
    return order.at(id).at(idx);
  }
  double rate(const std::string& id) const { return dag->rates.at(id); }
  double config_cost(const std::string& id, int idx) const {
    const ConfigProfile& c = config(id, idx);
    return c.hardware.unit_price * rate(id) / c.throughput();
  }
  double config_wcl(const std::string& id, int idx) const {
    return planning_wcl(config(id, idx), rate(id), policy);
  }
};

inline SplitContext make_context(const AppDag& dag, DispatchPolicy policy) {
  SplitContext ctx;
  ctx.dag = &dag;
  ctx.policy = policy;
  for (const auto& [id, profile] : dag.modules)
    ctx.order[id] = canonical_order(profile);
  return ctx;
}

inline std::map<std::string, double> state_wcls(const SplitContext& ctx,
                                                const SplitState& state) {
  std::map<std::string, double> wcls;
  for (const auto& [id, idx] : state.current) wcls[id] = ctx.config_wcl(id, idx);
  return wcls;
}

inline double state_e2e(const SplitContext& ctx, const SplitState& state) {
  return e2e_latency(*ctx.dag, state_wcls(ctx, state));
}

inline double state_cost(const SplitContext& ctx, const SplitState& state) {
  double cost = 0.0;
  for (const auto& [id, idx] : state.current) cost += ctx.config_cost(id, idx);
  return cost;
}

}  // namespace detail

// Default working state: each module on its least cost-efficient entry
// (minimum throughput-cost ratio; ties broken toward higher unit price, then
// smaller batch).
inline SplitState default_state(const AppDag& dag) {
  SplitState state;
  for (const auto& [id, profile] : dag.modules) {
    std::vector<ConfigProfile> order = canonical_order(profile);
    int worst = 0;
    for (int i = 1; i < static_cast<int>(order.size()); ++i) {
      const ConfigProfile& a = order[i];
      const ConfigProfile& b = order[worst];
      if (a.ratio() < b.ratio() - kEps)
        worst = i;
      else if (std::abs(a.ratio() - b.ratio()) <= kEps) {
        if (a.hardware.unit_price > b.hardware.unit_price + kEps)
          worst = i;
        else if (std::abs(a.hardware.unit_price - b.hardware.unit_price) <= kEps &&
                 a.batch < b.batch)
          worst = i;
      }
    }
    state.current[id] = worst;
  }
  return state;
}

// Latency-cost efficiency of switching one module from `prev` to `next`:
// cost reduction per unit of added worst-case latency. Returns nullopt when
// the switch cannot reduce cost; +infinity marks a dominating move (cheaper
// and no slower), applied ahead of any finite candidate.
inline std::optional<double> latency_cost_efficiency(double rate,
                                                     const ConfigProfile& prev,
                                                     const ConfigProfile& next,
                                                     DispatchPolicy policy) {
  double prev_cost = prev.hardware.unit_price * rate / prev.throughput();
  double next_cost = next.hardware.unit_price * rate / next.throughput();
  double numerator = prev_cost - next_cost;
  if (numerator <= kEps) return std::nullopt;
  double denominator =
      planning_wcl(next, rate, policy) - planning_wcl(prev, rate, policy);
  if (denominator <= kEps) return std::numeric_limits<double>::infinity();
  return numerator / denominator;
}

// Partition modules into supernodes: groups with identical parent sets and
// identical child sets move through the splitter as a unit.
inline std::vector<std::vector<std::string>> merge_supermodules(const AppDag& dag) {
  std::map<std::string, std::set<std::string>> parents, children;
  for (const auto& [id, _] : dag.modules) {
    parents[id];
    children[id];
  }
  for (const auto& [from, to] : dag.edges) {
    parents[to].insert(from);
    children[from].insert(to);
  }
  std::map<std::pair<std::set<std::string>, std::set<std::string>>,
           std::vector<std::string>>
      groups;
  for (const auto& [id, _] : dag.modules)
    groups[{parents[id], children[id]}].push_back(id);
  std::vector<std::vector<std::string>> out;
  for (auto& [key, members] : groups) out.push_back(members);
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

struct Candidate {
  // Joint operation over one or more modules (singletons for normal moves).
  std::vector<std::pair<std::string, int>> moves;  // (module, new idx)
  double lc = 0.0;
  double cost_reduction = 0.0;
};

inline bool candidate_better(const Candidate& a, const Candidate& b) {
  // Max LC wins; ties prefer the larger cost reduction, then module id order.
  if (a.lc != b.lc) return a.lc > b.lc;
  if (a.cost_reduction != b.cost_reduction)
    return a.cost_reduction > b.cost_reduction;
  return a.moves < b.moves;
}

inline bool state_feasible_with(const SplitContext& ctx, const SplitState& state,
                                const std::vector<std::pair<std::string, int>>& moves) {
  auto wcls = state_wcls(ctx, state);
  for (const auto& [id, idx] : moves) wcls[id] = ctx.config_wcl(id, idx);
  return e2e_latency(*ctx.dag, wcls) <= ctx.dag->slo + kEps;
}

inline std::optional<Candidate> single_candidate(const SplitContext& ctx,
                                                 const SplitState& state,
                                                 const std::string& id) {
  int prev = state.current.at(id);
  std::optional<Candidate> best;
  const auto& order = ctx.order.at(id);
  for (int next = 0; next < static_cast<int>(order.size()); ++next) {
    if (next == prev) continue;
    auto lc = latency_cost_efficiency(ctx.rate(id), order[prev], order[next],
                                      ctx.policy);
    if (!lc) continue;
    if (!state_feasible_with(ctx, state, {{id, next}})) continue;
    Candidate cand{{{id, next}}, *lc,
                   ctx.config_cost(id, prev) - ctx.config_cost(id, next)};
    if (!best || candidate_better(cand, *best)) best = cand;
  }
  return best;
}

// Joint move for a supernode: every member steps to its own best finite-LC
// next config simultaneously; the group's latency is the max over members.
inline std::optional<Candidate> group_candidate(
    const SplitContext& ctx, const SplitState& state,
    const std::vector<std::string>& members) {
  std::vector<std::pair<std::string, int>> moves;
  double total_reduction = 0.0;
  double old_lat = 0.0, new_lat = 0.0;
  for (const std::string& id : members) {
    int prev = state.current.at(id);
    const auto& order = ctx.order.at(id);
    std::optional<double> best_lc;
    int best_next = prev;
    for (int next = 0; next < static_cast<int>(order.size()); ++next) {
      if (next == prev) continue;
      auto lc = latency_cost_efficiency(ctx.rate(id), order[prev], order[next],
                                        ctx.policy);
      if (!lc) continue;
      if (!best_lc || *lc > *best_lc) {
        best_lc = lc;
        best_next = next;
      }
    }
    old_lat = std::max(old_lat, ctx.config_wcl(id, prev));
    if (best_lc) {
      moves.push_back({id, best_next});
      total_reduction +=
          ctx.config_cost(id, prev) - ctx.config_cost(id, best_next);
      new_lat = std::max(new_lat, ctx.config_wcl(id, best_next));
    } else {
      new_lat = std::max(new_lat, ctx.config_wcl(id, prev));
    }
  }
  if (moves.size() < 2 || total_reduction <= kEps) return std::nullopt;
  if (!state_feasible_with(ctx, state, moves)) return std::nullopt;
  double den = new_lat - old_lat;
  double lc = den <= kEps ? std::numeric_limits<double>::infinity()
                          : total_reduction / den;
  return Candidate{moves, lc, total_reduction};
}

inline void apply_candidate(SplitState& state, const Candidate& cand) {
  for (const auto& [id, next] : cand.moves) {
    state.history.push_back({id, state.current.at(id), next, cand.lc});
    state.current[id] = next;
  }
}

}  // namespace detail

// Latency splitter (latency-cost efficiency): starting from the default
// state, repeatedly apply the feasible operation with maximum LC until no
// operation can reduce cost within the SLO. Returns nullopt when even the
// default state violates the SLO.
inline std::optional<SplitState> split_latency_state(const AppDag& dag,
                                                     const SplitterOptions& options,
                                                     DispatchPolicy policy) {
  detail::SplitContext ctx = detail::make_context(dag, policy);
  SplitState state = default_state(dag);
  if (detail::state_e2e(ctx, state) > dag.slo + kEps) return std::nullopt;

  std::vector<std::vector<std::string>> groups;
  if (options.enable_merge) groups = merge_supermodules(dag);

  while (true) {
    std::optional<detail::Candidate> best;
    for (const auto& [id, _] : state.current) {
      auto cand = detail::single_candidate(ctx, state, id);
      if (cand && (!best || detail::candidate_better(*cand, *best))) best = cand;
    }
    for (const auto& members : groups) {
      if (members.size() < 2) continue;
      auto cand = detail::group_candidate(ctx, state, members);
      if (cand && (!best || detail::candidate_better(*cand, *best))) best = cand;
    }
    if (!best) break;
    detail::apply_candidate(state, *best);
  }
  return state;
}

// Cost-direct optimizer: undo the final R operations, redo greedily by
// absolute cost reduction, and keep whichever of the two states is cheaper.
inline SplitState cost_direct(const SplitState& state, const AppDag& dag,
                              const SplitterOptions& options,
                              DispatchPolicy policy) {
  int r = std::min<int>(options.cost_direct_r,
                        static_cast<int>(state.history.size()));
  if (r <= 0) return state;
  detail::SplitContext ctx = detail::make_context(dag, policy);

  SplitState rework = state;
  for (int i = 0; i < r; ++i) {
    const SplitOp& op = rework.history.back();
    rework.current[op.module_id] = op.old_idx;
    rework.history.pop_back();
  }
  while (true) {
    std::optional<detail::Candidate> best;
    for (const auto& [id, prev] : rework.current) {
      const auto& order = ctx.order.at(id);
      for (int next = 0; next < static_cast<int>(order.size()); ++next) {
        if (next == prev) continue;
        double reduction = ctx.config_cost(id, prev) - ctx.config_cost(id, next);
        if (reduction <= kEps) continue;
        if (!detail::state_feasible_with(ctx, rework, {{id, next}})) continue;
        detail::Candidate cand{{{id, next}}, reduction, reduction};
        if (!best || detail::candidate_better(cand, *best)) best = cand;
      }
    }
    if (!best) break;
    detail::apply_candidate(rework, *best);
  }
  return detail::state_cost(ctx, rework) < detail::state_cost(ctx, state) - kEps
             ? rework
             : state;
}

namespace detail {

inline std::map<std::string, double> budgets_from_state(const SplitContext& ctx,
                                                        const SplitState& state) {
  std::map<std::string, double> budgets;
  for (const auto& [id, idx] : state.current)
    budgets[id] = ctx.config_wcl(id, idx);
  return budgets;
}

}  // namespace detail

// Per-module latency budgets via the LC splitter, including the node merger
// and cost-direct post-pass when enabled.
inline std::optional<std::map<std::string, double>> split_latency(
    const AppDag& dag, const SplitterOptions& options, DispatchPolicy policy) {
  auto state = split_latency_state(dag, options, policy);
  if (!state) return std::nullopt;
  if (options.cost_direct_r > 0)
    state = cost_direct(*state, dag, options, policy);
  detail::SplitContext ctx = detail::make_context(dag, policy);
  return detail::budgets_from_state(ctx, *state);
}

namespace detail {

// Throughput-based baseline: Algorithm-2-style loop selecting the feasible
// move with the largest throughput gain instead of the largest LC.
inline std::optional<std::map<std::string, double>> split_throughput(
    const AppDag& dag, DispatchPolicy policy) {
  SplitContext ctx = make_context(dag, policy);
  SplitState state = default_state(dag);
  if (state_e2e(ctx, state) > dag.slo + kEps) return std::nullopt;
  while (true) {
    std::string best_id;
    int best_next = -1;
    double best_gain = kEps;
    for (const auto& [id, prev] : state.current) {
      const auto& order = ctx.order.at(id);
      for (int next = 0; next < static_cast<int>(order.size()); ++next) {
        if (next == prev) continue;
        double gain = order[next].throughput() - order[prev].throughput();
        if (gain <= best_gain) continue;
        if (!state_feasible_with(ctx, state, {{id, next}})) continue;
        best_id = id;
        best_next = next;
        best_gain = gain;
      }
    }
    if (best_next < 0) break;
    state.history.push_back({best_id, state.current[best_id], best_next, 0.0});
    state.current[best_id] = best_next;
  }
  return budgets_from_state(ctx, state);
}

inline std::optional<std::map<std::string, double>> split_even(const AppDag& dag) {
  // Equal share of the SLO along the path with the most modules.
  auto order = topo_order(dag);
  if (!order) return std::nullopt;
  std::map<std::string, std::vector<std::string>> preds;
  for (const auto& [from, to] : dag.edges) preds[to].push_back(from);
  std::map<std::string, int> depth;
  int longest = 0;
  for (const std::string& id : *order) {
    int d = 0;
    for (const std::string& p : preds[id]) d = std::max(d, depth[p]);
    depth[id] = d + 1;
    longest = std::max(longest, depth[id]);
  }
  double share = dag.slo / longest;
  std::map<std::string, double> budgets;
  for (const auto& [id, _] : dag.modules) budgets[id] = share;
  return budgets;
}

// Quantized baseline: exhaustive search over per-module budgets drawn from
// multiples of `step`. Only budgets where the module's scheduled cost strictly
// drops are searched; larger budgets at equal cost never help.
inline std::optional<std::map<std::string, double>> split_quantized(
    const AppDag& dag, double step, const SchedulerOptions& sched_options) {
  if (!(step > 0.0)) throw std::invalid_argument("quantized step must be > 0");
  std::vector<std::string> ids;
  for (const auto& [id, _] : dag.modules) ids.push_back(id);

  struct Level {
    double budget;
    double cost;
  };
  std::vector<std::vector<Level>> levels(ids.size());
  for (size_t m = 0; m < ids.size(); ++m) {
    double prev_cost = std::numeric_limits<double>::infinity();
    int max_k = static_cast<int>(std::floor(dag.slo / step + kEps));
    for (int k = 1; k <= max_k; ++k) {
      double budget = k * step;
      auto sched = schedule_module(dag.rates.at(ids[m]), budget,
                                   dag.modules.at(ids[m]), sched_options);
      if (!sched) continue;
      if (sched->cost < prev_cost - kEps) {
        levels[m].push_back({budget, sched->cost});
        prev_cost = sched->cost;
      }
    }
    if (levels[m].empty()) return std::nullopt;
  }

  std::map<std::string, double> assignment, best_assignment;
  double best_cost = std::numeric_limits<double>::infinity();
  // Cheapest achievable remainder, for pruning.
  std::vector<double> min_tail(ids.size() + 1, 0.0);
  for (size_t m = ids.size(); m-- > 0;) {
    double lo = std::numeric_limits<double>::infinity();
    for (const Level& l : levels[m]) lo = std::min(lo, l.cost);
    min_tail[m] = min_tail[m + 1] + lo;
  }

  std::map<std::string, double> budget_map;
  auto feasible = [&](const std::map<std::string, double>& partial) {
    std::map<std::string, double> wcls;
    for (const std::string& id : ids) {
      auto it = partial.find(id);
      wcls[id] = it == partial.end() ? 0.0 : it->second;
    }
    return e2e_latency(dag, wcls) <= dag.slo + kEps;
  };

  std::function<void(size_t, double)> rec = [&](size_t m, double cost_so_far) {
    if (cost_so_far + min_tail[m] >= best_cost - kEps) return;
    if (m == ids.size()) {
      if (feasible(assignment) && cost_so_far < best_cost - kEps) {
        best_cost = cost_so_far;
        best_assignment = assignment;
      }
      return;
    }
    for (const Level& l : levels[m]) {
      assignment[ids[m]] = l.budget;
      if (feasible(assignment)) rec(m + 1, cost_so_far + l.cost);
      assignment.erase(ids[m]);
    }
  };
  rec(0, 0.0);
  if (best_assignment.empty()) return std::nullopt;
  return best_assignment;
}

}  // namespace detail

// Baseline latency splitters used by the ablation matrix.
inline std::optional<std::map<std::string, double>> baseline_split(
    const AppDag& dag, const SplitterOptions& options, DispatchPolicy policy,
    const SchedulerOptions& sched_options) {
  switch (options.method) {
    case SplitMethod::LC:
      return split_latency(dag, options, policy);
    case SplitMethod::Throughput:
      return detail::split_throughput(dag, policy);
    case SplitMethod::Even:
      return detail::split_even(dag);
    case SplitMethod::Quantized:
      return detail::split_quantized(dag, options.quantized_step, sched_options);
  }
  return std::nullopt;
}

}  // namespace harpagon

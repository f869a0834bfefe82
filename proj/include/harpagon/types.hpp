#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace harpagon {

// Absolute epsilon for all feasibility / equality comparisons on rates,
// latencies and costs. Boundary cases (wcl == budget) count as feasible.
inline constexpr double kEps = 1e-9;

struct HardwareType {
  std::string name;
  double unit_price = 1.0;  // cost units per machine-second
};

inline bool operator==(const HardwareType& a, const HardwareType& b) {
  return a.name == b.name && a.unit_price == b.unit_price;
}

// One profiled (batch, hardware) measurement row for a module.
struct ConfigProfile {
  std::string module_id;
  HardwareType hardware;
  int batch = 1;
  double duration = 1.0;  // seconds per batch

  double throughput() const { return static_cast<double>(batch) / duration; }
  double ratio() const { return throughput() / hardware.unit_price; }
};

inline bool same_config(const ConfigProfile& a, const ConfigProfile& b) {
  return a.hardware.name == b.hardware.name && a.batch == b.batch;
}

inline bool operator==(const ConfigProfile& a, const ConfigProfile& b) {
  return a.module_id == b.module_id && a.hardware == b.hardware &&
         a.batch == b.batch && a.duration == b.duration;
}

struct ModuleProfile {
  std::string module_id;
  std::vector<ConfigProfile> entries;
};

// Total deterministic order: throughput-cost ratio descending, ties by
// throughput descending, then batch ascending, then hardware name.
inline bool canonical_less(const ConfigProfile& a, const ConfigProfile& b) {
  if (a.ratio() != b.ratio()) return a.ratio() > b.ratio();
  if (a.throughput() != b.throughput()) return a.throughput() > b.throughput();
  if (a.batch != b.batch) return a.batch < b.batch;
  return a.hardware.name < b.hardware.name;
}

inline std::vector<ConfigProfile> canonical_order(const ModuleProfile& profile) {
  if (profile.entries.empty())
    throw std::invalid_argument("canonical_order: empty profile for module " +
                                profile.module_id);
  std::vector<ConfigProfile> out = profile.entries;
  std::stable_sort(out.begin(), out.end(), canonical_less);
  return out;
}

// Application DAG: modules with profiles, per-module request rates, and the
// end-to-end latency objective.
struct AppDag {
  std::map<std::string, ModuleProfile> modules;
  std::vector<std::pair<std::string, std::string>> edges;
  std::map<std::string, double> rates;  // req/sec per module
  double slo = 0.0;                     // seconds
};

// A tier is either a run of full-capacity machines of one config
// (full_machines >= 1, partial_fraction == 0) or a single partial-capacity
// machine (full_machines == 0, 0 < partial_fraction < 1).
struct Tier {
  ConfigProfile config;
  int full_machines = 0;
  double partial_fraction = 0.0;
  double assigned_rate = 0.0;  // req/sec handled by this tier
};

struct ModuleSchedule {
  std::string module_id;
  std::vector<Tier> tiers;  // canonical config order, partial tier last
  double dummy_rate = 0.0;
  double wcl = 0.0;   // module worst-case latency, max over tiers
  double cost = 0.0;  // price-weighted machines
};

struct SessionPlan {
  std::map<std::string, double> budgets;  // L_M per module
  std::map<std::string, ModuleSchedule> schedules;
  double total_cost = 0.0;
  double e2e_latency = 0.0;
};

// Serving cost: sum over tiers of p * (full machines + partial fraction).
// Machines carrying dummy requests are charged at full occupancy.
inline double schedule_cost(const ModuleSchedule& schedule) {
  double cost = 0.0;
  for (const Tier& t : schedule.tiers)
    cost += t.config.hardware.unit_price * (t.full_machines + t.partial_fraction);
  return cost;
}

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

namespace detail {

// Kahn topological sort; returns nullopt when the edge set has a cycle.
inline std::optional<std::vector<std::string>> topo_order(const AppDag& dag) {
  std::map<std::string, int> indeg;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [id, _] : dag.modules) indeg[id] = 0;
  for (const auto& [from, to] : dag.edges) {
    if (!dag.modules.count(from) || !dag.modules.count(to)) continue;
    adj[from].push_back(to);
    indeg[to]++;
  }
  std::vector<std::string> ready, order;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.push_back(id);
  while (!ready.empty()) {
    std::string cur = ready.front();
    ready.erase(ready.begin());
    order.push_back(cur);
    for (const std::string& next : adj[cur])
      if (--indeg[next] == 0) ready.push_back(next);
  }
  if (order.size() != dag.modules.size()) return std::nullopt;
  return order;
}

}  // namespace detail

inline ValidationReport validate_dag(const AppDag& dag) {
  ValidationReport report;
  auto& errs = report.errors;
  if (dag.modules.empty()) errs.push_back("dag has no modules");
  for (const auto& [id, profile] : dag.modules) {
    if (profile.entries.empty())
      errs.push_back("empty profile for module " + id);
    std::set<std::pair<std::string, int>> seen;
    for (const ConfigProfile& c : profile.entries) {
      if (c.batch < 1)
        errs.push_back("non-positive batch in profile of module " + id);
      if (!(c.duration > 0.0))
        errs.push_back("non-positive duration in profile of module " + id);
      if (!(c.hardware.unit_price > 0.0))
        errs.push_back("non-positive unit price on hardware " + c.hardware.name);
      if (!seen.insert({c.hardware.name, c.batch}).second)
        errs.push_back("duplicate (hardware, batch) pair in module " + id);
    }
    if (!dag.rates.count(id))
      errs.push_back("missing rate for module " + id);
    else if (!(dag.rates.at(id) > 0.0))
      errs.push_back("non-positive rate for module " + id);
  }
  for (const auto& [id, rate] : dag.rates)
    if (!dag.modules.count(id))
      errs.push_back("rate given for unknown module " + id);
  for (const auto& [from, to] : dag.edges) {
    if (!dag.modules.count(from))
      errs.push_back("edge endpoint " + from + " has no module");
    if (!dag.modules.count(to))
      errs.push_back("edge endpoint " + to + " has no module");
  }
  if (!(dag.slo > 0.0)) errs.push_back("non-positive SLO");
  if (!detail::topo_order(dag))
    errs.push_back("cycle detected in module graph");
  return report;
}

// End-to-end latency: longest path where node weight is the module's
// worst-case latency and edges carry no weight. Parallel branches contribute
// their maximum.
inline double e2e_latency(const AppDag& dag,
                          const std::map<std::string, double>& wcl_by_module) {
  auto order = detail::topo_order(dag);
  if (!order) throw std::invalid_argument("e2e_latency: dag has a cycle");
  std::map<std::string, double> dist;
  std::map<std::string, std::vector<std::string>> preds;
  for (const auto& [from, to] : dag.edges) preds[to].push_back(from);
  double best = 0.0;
  for (const std::string& id : *order) {
    auto it = wcl_by_module.find(id);
    if (it == wcl_by_module.end())
      throw std::invalid_argument("e2e_latency: missing wcl for module " + id);
    double incoming = 0.0;
    for (const std::string& p : preds[id])
      incoming = std::max(incoming, dist.at(p));
    dist[id] = incoming + it->second;
    best = std::max(best, dist[id]);
  }
  return best;
}

// Longest path constrained to pass through `module`; used when deciding how
// much end-to-end slack a single module may consume.
inline double path_latency_through(
    const AppDag& dag, const std::string& module,
    const std::map<std::string, double>& wcl_by_module) {
  auto order = detail::topo_order(dag);
  if (!order) throw std::invalid_argument("path_latency_through: cycle");
  std::map<std::string, std::vector<std::string>> preds, succs;
  for (const auto& [from, to] : dag.edges) {
    preds[to].push_back(from);
    succs[from].push_back(to);
  }
  // Longest distance ending at each node (inclusive).
  std::map<std::string, double> up;
  for (const std::string& id : *order) {
    double incoming = 0.0;
    for (const std::string& p : preds[id]) incoming = std::max(incoming, up.at(p));
    up[id] = incoming + wcl_by_module.at(id);
  }
  // Longest distance starting at each node (inclusive).
  std::map<std::string, double> down;
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    double outgoing = 0.0;
    for (const std::string& s : succs[*it]) outgoing = std::max(outgoing, down.at(s));
    down[*it] = outgoing + wcl_by_module.at(*it);
  }
  return up.at(module) + down.at(module) - wcl_by_module.at(module);
}

}  // namespace harpagon

#pragma once

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "harpagon/dispatch.hpp"
#include "harpagon/simulator.hpp"
#include "harpagon/types.hpp"

namespace harpagon {

using nlohmann::json;

struct WorkloadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_fields(const json& obj, const std::set<std::string>& allowed,
                           const std::set<std::string>& required,
                           const std::string& where) {
  if (!obj.is_object()) throw WorkloadError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw WorkloadError(where + ": unknown field \"" + key + "\"");
  for (const std::string& key : required)
    if (!obj.contains(key))
      throw WorkloadError(where + ": missing field \"" + key + "\"");
}

inline double positive_number(const json& v, const std::string& where) {
  if (!v.is_number())
    throw WorkloadError(where + ": expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x) || !(x > 0.0))
    throw WorkloadError(where + ": expected a finite positive number");
  return x;
}

inline int positive_int(const json& v, const std::string& where) {
  if (!v.is_number_integer())
    throw WorkloadError(where + ": expected a positive integer");
  std::int64_t x = v.get<std::int64_t>();
  if (x < 1) throw WorkloadError(where + ": expected a positive integer");
  return static_cast<int>(x);
}

inline std::string identifier(const json& v, const std::string& where) {
  if (!v.is_string() || v.get<std::string>().empty())
    throw WorkloadError(where + ": expected a non-empty string");
  return v.get<std::string>();
}

}  // namespace detail

// Strict workload parser: unknown fields and malformed values are errors, and
// every hardware reference must resolve.
inline AppDag parse_workload(const json& doc) {
  detail::require_fields(doc, {"hardware", "modules", "edges", "rates", "slo"},
                         {"hardware", "modules", "rates", "slo"}, "workload");
  std::map<std::string, HardwareType> hw;
  if (!doc.at("hardware").is_array())
    throw WorkloadError("hardware: expected an array");
  for (const json& h : doc.at("hardware")) {
    detail::require_fields(h, {"name", "unit_price"}, {"name", "unit_price"},
                           "hardware entry");
    HardwareType t{detail::identifier(h.at("name"), "hardware.name"),
                   detail::positive_number(h.at("unit_price"),
                                           "hardware.unit_price")};
    if (!hw.emplace(t.name, t).second)
      throw WorkloadError("hardware: duplicate name \"" + t.name + "\"");
  }

  AppDag dag;
  if (!doc.at("modules").is_array())
    throw WorkloadError("modules: expected an array");
  for (const json& m : doc.at("modules")) {
    detail::require_fields(m, {"id", "profiles"}, {"id", "profiles"}, "module");
    std::string id = detail::identifier(m.at("id"), "module.id");
    if (dag.modules.count(id))
      throw WorkloadError("modules: duplicate id \"" + id + "\"");
    ModuleProfile profile;
    profile.module_id = id;
    if (!m.at("profiles").is_array() || m.at("profiles").empty())
      throw WorkloadError("module " + id + ": profiles must be a non-empty array");
    for (const json& p : m.at("profiles")) {
      detail::require_fields(p, {"hardware", "batch", "duration"},
                             {"hardware", "batch", "duration"},
                             "profile of module " + id);
      std::string hname = detail::identifier(p.at("hardware"), "profile.hardware");
      auto it = hw.find(hname);
      if (it == hw.end())
        throw WorkloadError("module " + id + ": unknown hardware \"" + hname +
                            "\"");
      ConfigProfile c;
      c.module_id = id;
      c.hardware = it->second;
      c.batch = detail::positive_int(p.at("batch"), "profile.batch");
      c.duration = detail::positive_number(p.at("duration"), "profile.duration");
      profile.entries.push_back(c);
    }
    dag.modules[id] = std::move(profile);
  }

  if (doc.contains("edges")) {
    if (!doc.at("edges").is_array())
      throw WorkloadError("edges: expected an array");
    for (const json& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw WorkloadError("edges: each edge must be a [parent, child] pair");
      dag.edges.push_back({detail::identifier(e.at(0), "edge parent"),
                           detail::identifier(e.at(1), "edge child")});
    }
  }

  if (!doc.at("rates").is_object())
    throw WorkloadError("rates: expected an object");
  for (const auto& [id, v] : doc.at("rates").items())
    dag.rates[id] = detail::positive_number(v, "rates." + id);
  dag.slo = detail::positive_number(doc.at("slo"), "slo");

  ValidationReport report = validate_dag(dag);
  if (!report.ok()) throw WorkloadError("workload: " + report.errors.front());
  return dag;
}

inline json emit_workload(const AppDag& dag) {
  json doc;
  std::map<std::string, HardwareType> hw;
  for (const auto& [_, profile] : dag.modules)
    for (const ConfigProfile& c : profile.entries) hw[c.hardware.name] = c.hardware;
  doc["hardware"] = json::array();
  for (const auto& [_, h] : hw)
    doc["hardware"].push_back({{"name", h.name}, {"unit_price", h.unit_price}});
  doc["modules"] = json::array();
  for (const auto& [id, profile] : dag.modules) {
    json m{{"id", id}, {"profiles", json::array()}};
    for (const ConfigProfile& c : profile.entries)
      m["profiles"].push_back({{"hardware", c.hardware.name},
                               {"batch", c.batch},
                               {"duration", c.duration}});
    doc["modules"].push_back(std::move(m));
  }
  doc["edges"] = json::array();
  for (const auto& [from, to] : dag.edges)
    doc["edges"].push_back(json::array({from, to}));
  doc["rates"] = json::object();
  for (const auto& [id, rate] : dag.rates) doc["rates"][id] = rate;
  doc["slo"] = dag.slo;
  return doc;
}

namespace detail {

inline std::string trim_number(double x) {
  // Shortest decimal form without scientific notation for small magnitudes.
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

}  // namespace detail

// Human-readable tier table in "rate (n x b)" shape; adjacent tiers sharing a
// config (a full run followed by its partial spill) merge into one column.
inline std::string tier_display(const ModuleSchedule& schedule) {
  struct Col {
    ConfigProfile config;
    double machines = 0.0;
    double rate = 0.0;
  };
  std::vector<Col> cols;
  for (const Tier& t : schedule.tiers) {
    double n = t.full_machines + t.partial_fraction;
    if (!cols.empty() && same_config(cols.back().config, t.config)) {
      cols.back().machines += n;
      cols.back().rate += t.assigned_rate;
    } else {
      cols.push_back({t.config, n, t.assigned_rate});
    }
  }
  std::string out;
  for (size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ", ";
    std::ostringstream n;
    n.precision(10);
    n << std::fixed;
    n.precision(1);
    double m = cols[i].machines;
    // One decimal unless more are needed to be faithful.
    if (std::abs(m * 10.0 - std::round(m * 10.0)) < 1e-6)
      n << m;
    else
      n.unsetf(std::ios::fixed), n.precision(10), n << m;
    out += detail::trim_number(cols[i].rate) + " (" + n.str() + "⊗" +
           std::to_string(cols[i].config.batch) + ")";
  }
  return out;
}

inline json emit_schedule(const ModuleSchedule& s) {
  json out;
  out["module_id"] = s.module_id;
  out["tiers"] = json::array();
  for (const Tier& t : s.tiers)
    out["tiers"].push_back({{"hardware", t.config.hardware.name},
                            {"unit_price", t.config.hardware.unit_price},
                            {"batch", t.config.batch},
                            {"duration", t.config.duration},
                            {"full_machines", t.full_machines},
                            {"partial_fraction", t.partial_fraction},
                            {"assigned_rate", t.assigned_rate}});
  out["dummy_rate"] = s.dummy_rate;
  out["wcl"] = s.wcl;
  out["cost"] = s.cost;
  out["display"] = tier_display(s);
  return out;
}

inline ModuleSchedule parse_schedule(const std::string& id, const json& in) {
  ModuleSchedule s;
  s.module_id = id;
  detail::require_fields(in,
                         {"module_id", "tiers", "dummy_rate", "wcl", "cost",
                          "display"},
                         {"tiers", "dummy_rate", "wcl", "cost"},
                         "schedule " + id);
  for (const json& t : in.at("tiers")) {
    Tier tier;
    tier.config.module_id = id;
    tier.config.hardware = {t.at("hardware").get<std::string>(),
                            t.at("unit_price").get<double>()};
    tier.config.batch = t.at("batch").get<int>();
    tier.config.duration = t.at("duration").get<double>();
    tier.full_machines = t.at("full_machines").get<int>();
    tier.partial_fraction = t.at("partial_fraction").get<double>();
    tier.assigned_rate = t.at("assigned_rate").get<double>();
    s.tiers.push_back(tier);
  }
  s.dummy_rate = in.at("dummy_rate").get<double>();
  s.wcl = in.at("wcl").get<double>();
  s.cost = in.at("cost").get<double>();
  return s;
}

inline json emit_plan(const SessionPlan& plan, DispatchPolicy policy) {
  json out;
  out["policy"] = to_string(policy);
  out["budgets"] = json::object();
  for (const auto& [id, b] : plan.budgets) out["budgets"][id] = b;
  out["modules"] = json::object();
  for (const auto& [id, s] : plan.schedules) out["modules"][id] = emit_schedule(s);
  out["total_cost"] = plan.total_cost;
  out["e2e_latency"] = plan.e2e_latency;
  return out;
}

inline SessionPlan parse_plan(const json& in, DispatchPolicy* policy = nullptr) {
  detail::require_fields(
      in, {"policy", "budgets", "modules", "total_cost", "e2e_latency"},
      {"policy", "budgets", "modules", "total_cost", "e2e_latency"}, "plan");
  SessionPlan plan;
  if (policy) {
    std::string p = in.at("policy").get<std::string>();
    if (p == "tc") *policy = DispatchPolicy::TC;
    else if (p == "rr") *policy = DispatchPolicy::RR;
    else if (p == "dt") *policy = DispatchPolicy::DT;
    else throw WorkloadError("plan: unknown policy \"" + p + "\"");
  }
  for (const auto& [id, b] : in.at("budgets").items())
    plan.budgets[id] = b.get<double>();
  for (const auto& [id, s] : in.at("modules").items())
    plan.schedules[id] = parse_schedule(id, s);
  plan.total_cost = in.at("total_cost").get<double>();
  plan.e2e_latency = in.at("e2e_latency").get<double>();
  return plan;
}

// JSON-lines trace export, one record per dispatched (non-flushed) request.
inline std::string emit_trace_jsonl(const SimTrace& trace) {
  std::string out;
  for (const SimRequest& r : trace.requests) {
    if (r.machine < 0 || r.flushed) continue;
    json rec{{"id", r.id},
             {"arrival", r.arrival},
             {"machine", trace.machines[r.machine].name},
             {"batch", r.batch},
             {"dispatch", r.dispatch},
             {"complete", r.complete}};
    out += rec.dump();
    out += "\n";
  }
  return out;
}

}  // namespace harpagon

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harpagon/harpagon.hpp"

namespace fs = std::filesystem;
using namespace harpagon;

namespace {

// Exit codes: 0 ok, 1 input error, 2 infeasible / bound violation,
// 3 oracle limits exceeded.
constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitOracleLimit = 3;

struct SharedFlags {
  std::string policy = "tc";
  std::string max_configs = "unlimited";
  bool no_dummy = false;
  bool no_reassign = false;
  std::string split = "lc";
  bool no_merge = false;
  std::string cost_direct_r = "auto";
  std::uint64_t seed = 0;
  std::string out;
  bool json = false;
};

void add_shared_flags(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--policy", flags.policy, "Dispatch policy")
      ->check(CLI::IsMember({"tc", "rr", "dt"}));
  cmd->add_option("--max-configs", flags.max_configs,
                  "Config limit per module: N or 'unlimited'");
  cmd->add_flag("--no-dummy", flags.no_dummy, "Disable the dummy generator");
  cmd->add_flag("--no-reassign", flags.no_reassign,
                "Disable the latency reassigner");
  cmd->add_option("--split", flags.split,
                  "Latency split method: lc|throughput|quantized:<step>|even");
  cmd->add_flag("--no-merge", flags.no_merge, "Disable supernode merging");
  cmd->add_option("--cost-direct-r", flags.cost_direct_r,
                  "Cost-direct redo depth: N, 'auto' or 'off'");
  cmd->add_option("--seed", flags.seed, "Random seed");
  cmd->add_option("--out", flags.out, "Output directory");
  cmd->add_flag("--json", flags.json, "Machine-readable JSON report");
}

DispatchPolicy parse_policy(const std::string& p) {
  if (p == "rr") return DispatchPolicy::RR;
  if (p == "dt") return DispatchPolicy::DT;
  return DispatchPolicy::TC;
}

SchedulerOptions scheduler_options(const SharedFlags& flags) {
  SchedulerOptions opt;
  opt.policy = parse_policy(flags.policy);
  if (flags.max_configs != "unlimited") {
    int n = std::stoi(flags.max_configs);
    if (n < 1) throw WorkloadError("--max-configs must be >= 1 or 'unlimited'");
    opt.max_configs = n;
  }
  opt.enable_dummy = !flags.no_dummy;
  opt.enable_reassign = !flags.no_reassign;
  return opt;
}

SplitterOptions splitter_options(const SharedFlags& flags) {
  SplitterOptions opt;
  if (flags.split == "lc") {
    opt.method = SplitMethod::LC;
  } else if (flags.split == "throughput") {
    opt.method = SplitMethod::Throughput;
  } else if (flags.split == "even") {
    opt.method = SplitMethod::Even;
  } else if (flags.split.rfind("quantized:", 0) == 0) {
    opt.method = SplitMethod::Quantized;
    opt.quantized_step = std::stod(flags.split.substr(10));
  } else {
    throw WorkloadError("unknown --split method: " + flags.split);
  }
  opt.enable_merge = !flags.no_merge;
  if (flags.cost_direct_r == "off")
    opt.cost_direct_r = 0;
  else if (flags.cost_direct_r == "auto")
    opt.cost_direct_r = 3;
  else
    opt.cost_direct_r = std::stoi(flags.cost_direct_r);
  return opt;
}

AppDag load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorkloadError("cannot open workload file: " + path);
  json doc = json::parse(in);
  return parse_workload(doc);
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

int cmd_plan(const std::string& file, const SharedFlags& flags) {
  AppDag dag = load_workload(file);
  SchedulerOptions sched = scheduler_options(flags);
  SplitterOptions split = splitter_options(flags);
  auto t0 = std::chrono::steady_clock::now();
  auto plan = plan_session(dag, sched, split);
  auto t1 = std::chrono::steady_clock::now();
  double runtime_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  if (!plan) {
    std::cerr << "infeasible: no plan satisfies the SLO of " << dag.slo
              << " s\n";
    return kExitInfeasible;
  }
  json report = emit_plan(*plan, sched.policy);
  std::string dump = report.dump(2) + "\n";
  if (flags.json) {
    std::cout << dump;
  } else {
    std::cout << "plan (policy " << to_string(sched.policy) << ")\n";
    for (const auto& [id, s] : plan->schedules) {
      std::cout << "  " << id << ": " << tier_display(s)
                << "  budget " << plan->budgets.at(id) << "  wcl " << s.wcl
                << "  dummy " << s.dummy_rate << "  cost " << s.cost << "\n";
    }
    std::cout << "  total cost " << plan->total_cost << "\n";
    std::cout << "  e2e latency " << plan->e2e_latency << " (slo " << dag.slo
              << ")\n";
  }
  std::cerr << "runtime_ms " << runtime_ms << "\n";
  if (!flags.out.empty()) write_file(fs::path(flags.out) / "plan.json", dump);
  return kExitOk;
}

int cmd_simulate(const std::string& workload_file, const std::string& plan_file,
                 const SharedFlags& flags, double duration,
                 const std::string& arrival, const std::string& accounting) {
  AppDag dag = load_workload(workload_file);
  std::ifstream in(plan_file);
  if (!in) throw WorkloadError("cannot open plan file: " + plan_file);
  DispatchPolicy policy = DispatchPolicy::TC;
  SessionPlan plan = parse_plan(json::parse(in), &policy);

  SimConfig sim;
  sim.duration = duration;
  sim.seed = flags.seed;
  sim.arrival = arrival == "poisson" ? ArrivalModel::Poisson
                                     : ArrivalModel::Uniform;
  sim.accounting = accounting == "per-request" ? Accounting::PerRequest
                                               : Accounting::Cycle;

  bool all_ok = true;
  json report;
  for (const auto& [id, schedule] : plan.schedules) {
    if (!dag.rates.count(id))
      throw WorkloadError("plan module " + id + " not present in workload");
    SimTrace trace = simulate(schedule, dag.rates.at(id), policy, sim);
    json entry{{"module", id},
               {"max_latency", trace.summary.max_latency},
               {"p50", trace.summary.p50},
               {"p99", trace.summary.p99},
               {"requests", trace.summary.total_requests},
               {"dummy_requests", trace.summary.dummy_requests}};
    if (sim.arrival == ArrivalModel::Uniform) {
      BoundReport bound = check_bound(trace, schedule, policy);
      entry["bound_ok"] = bound.ok;
      entry["violations"] = bound.violations;
      if (!bound.ok) all_ok = false;
    }
    report["modules"].push_back(entry);
    if (!flags.out.empty())
      write_file(fs::path(flags.out) / ("trace_" + id + ".jsonl"),
                 emit_trace_jsonl(trace));
  }
  report["bound_ok"] = all_ok;
  if (flags.json) {
    std::cout << report.dump(2) << "\n";
  } else {
    for (const json& entry : report["modules"]) {
      std::cout << entry["module"].get<std::string>() << ": max "
                << entry["max_latency"].get<double>() << " p50 "
                << entry["p50"].get<double>() << " p99 "
                << entry["p99"].get<double>();
      if (entry.contains("bound_ok"))
        std::cout << (entry["bound_ok"].get<bool>() ? "  bounds ok"
                                                    : "  BOUND VIOLATION");
      std::cout << "\n";
    }
  }
  return all_ok ? kExitOk : kExitInfeasible;
}

int cmd_oracle(const std::string& file, const SharedFlags& flags) {
  AppDag dag = load_workload(file);
  SchedulerOptions sched = scheduler_options(flags);
  SplitterOptions split = splitter_options(flags);

  auto t0 = std::chrono::steady_clock::now();
  auto plan = plan_session(dag, sched, split);
  auto t1 = std::chrono::steady_clock::now();
  OraclePlan oracle = optimal_plan(dag, sched.policy);
  auto t2 = std::chrono::steady_clock::now();
  if (oracle.exceeded) {
    std::cerr << "oracle limits exceeded\n";
    return kExitOracleLimit;
  }
  if (!plan && !oracle.plan) {
    std::cerr << "infeasible for both planner and oracle\n";
    return kExitInfeasible;
  }

  double planner_cost = plan ? plan->total_cost : -1.0;
  double oracle_cost = oracle.plan ? oracle.plan->total_cost : -1.0;
  double gap = (plan && oracle.plan && oracle_cost > 0.0)
                   ? (planner_cost - oracle_cost) / oracle_cost * 100.0
                   : 0.0;
  json report{{"planner_cost", planner_cost},
              {"oracle_cost", oracle_cost},
              {"gap_percent", gap},
              {"planner_ms",
               std::chrono::duration<double, std::milli>(t1 - t0).count()},
              {"oracle_ms",
               std::chrono::duration<double, std::milli>(t2 - t1).count()}};
  if (flags.json)
    std::cout << report.dump(2) << "\n";
  else
    std::cout << "planner cost " << planner_cost << ", oracle cost "
              << oracle_cost << ", gap " << gap << "%\n";
  if (!plan) return kExitInfeasible;
  return kExitOk;
}

int cmd_synthesize(const SharedFlags& flags, int count, bool oracle_scale) {
  SynthOptions opt;
  opt.oracle_scale = oracle_scale;
  std::mt19937_64 rng(flags.seed);
  fs::path dir = flags.out.empty() ? fs::path(".") : fs::path(flags.out);
  for (int i = 0; i < count; ++i) {
    AppDag dag = synthesize_workload(rng, opt);
    std::string name =
        "workload_" + std::to_string(flags.seed) + "_" + std::to_string(i) +
        ".json";
    write_file(dir / name, emit_workload(dag).dump(2) + "\n");
  }
  std::cout << "wrote " << count << " workloads to " << dir.string() << "\n";
  return kExitOk;
}

struct AblateVariant {
  std::string name;
  // Mutates the baseline options for this variant.
  void (*apply)(SchedulerOptions&, SplitterOptions&);
};

const std::vector<AblateVariant>& ablate_variants() {
  static const std::vector<AblateVariant> variants = {
      {"full", [](SchedulerOptions&, SplitterOptions&) {}},
      {"rr-dispatch",
       [](SchedulerOptions& s, SplitterOptions&) {
         s.policy = DispatchPolicy::RR;
       }},
      {"dt-dispatch",
       [](SchedulerOptions& s, SplitterOptions&) {
         s.policy = DispatchPolicy::DT;
       }},
      {"1-config",
       [](SchedulerOptions& s, SplitterOptions&) { s.max_configs = 1; }},
      {"2-config",
       [](SchedulerOptions& s, SplitterOptions&) { s.max_configs = 2; }},
      {"no-dummy",
       [](SchedulerOptions& s, SplitterOptions&) { s.enable_dummy = false; }},
      {"no-reassign",
       [](SchedulerOptions& s, SplitterOptions&) {
         s.enable_reassign = false;
       }},
      {"split-even",
       [](SchedulerOptions&, SplitterOptions& p) {
         p.method = SplitMethod::Even;
       }},
      {"split-throughput",
       [](SchedulerOptions&, SplitterOptions& p) {
         p.method = SplitMethod::Throughput;
       }},
      {"split-quantized:0.1",
       [](SchedulerOptions&, SplitterOptions& p) {
         p.method = SplitMethod::Quantized;
         p.quantized_step = 0.1;
       }},
      {"split-quantized:0.01",
       [](SchedulerOptions&, SplitterOptions& p) {
         p.method = SplitMethod::Quantized;
         p.quantized_step = 0.01;
       }},
      {"no-merge",
       [](SchedulerOptions&, SplitterOptions& p) { p.enable_merge = false; }},
      {"no-cost-direct",
       [](SchedulerOptions&, SplitterOptions& p) { p.cost_direct_r = 0; }},
  };
  return variants;
}

int cmd_ablate(const std::string& corpus_dir, const SharedFlags& flags) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(corpus_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw WorkloadError("no .json workloads in " + corpus_dir);

  SchedulerOptions base_sched = scheduler_options(flags);
  SplitterOptions base_split = splitter_options(flags);

  std::string csv = "instance,variant,cost,normalized\n";
  for (const fs::path& file : files) {
    AppDag dag = load_workload(file.string());
    std::map<std::string, double> costs;
    for (const AblateVariant& v : ablate_variants()) {
      SchedulerOptions s = base_sched;
      SplitterOptions p = base_split;
      v.apply(s, p);
      auto plan = plan_session(dag, s, p);
      if (plan) costs[v.name] = plan->total_cost;
    }
    double full = costs.count("full") ? costs.at("full") : 0.0;
    for (const AblateVariant& v : ablate_variants()) {
      csv += file.filename().string() + "," + v.name + ",";
      auto it = costs.find(v.name);
      if (it != costs.end()) {
        csv += detail::trim_number(it->second) + ",";
        csv += full > 0.0 ? detail::trim_number(it->second / full) : "";
      } else {
        csv += ",";
      }
      csv += "\n";
    }
  }
  if (!flags.out.empty())
    write_file(fs::path(flags.out) / "ablation.csv", csv);
  else
    std::cout << csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-cost serving planner for latency-bounded DNN pipelines"};
  app.require_subcommand(1);

  SharedFlags flags;
  std::string workload_file, plan_file, corpus_dir;
  double sim_duration = 60.0;
  std::string sim_arrival = "uniform", sim_accounting = "cycle";
  int synth_count = 10;
  bool oracle_scale = false;

  CLI::App* plan = app.add_subcommand("plan", "Derive a minimum-cost plan");
  plan->add_option("workload", workload_file, "Workload JSON file")->required();
  add_shared_flags(plan, flags);

  CLI::App* simulate =
      app.add_subcommand("simulate", "Replay a plan through the simulator");
  simulate->add_option("workload", workload_file, "Workload JSON file")
      ->required();
  simulate->add_option("plan", plan_file, "Plan JSON file")->required();
  simulate->add_option("--duration", sim_duration, "Simulated seconds");
  simulate->add_option("--arrival", sim_arrival, "uniform|poisson")
      ->check(CLI::IsMember({"uniform", "poisson"}));
  simulate->add_option("--accounting", sim_accounting, "cycle|per-request")
      ->check(CLI::IsMember({"cycle", "per-request"}));
  add_shared_flags(simulate, flags);

  CLI::App* oracle =
      app.add_subcommand("oracle", "Compare the planner against brute force");
  oracle->add_option("workload", workload_file, "Workload JSON file")
      ->required();
  add_shared_flags(oracle, flags);

  CLI::App* synthesize =
      app.add_subcommand("synthesize", "Generate seeded random workloads");
  synthesize->add_option("--count", synth_count, "Number of workloads");
  synthesize->add_flag("--oracle-scale", oracle_scale,
                       "Keep instances small enough for the oracle");
  add_shared_flags(synthesize, flags);

  CLI::App* ablate =
      app.add_subcommand("ablate", "Run the feature-ablation matrix");
  ablate->add_option("corpus", corpus_dir, "Directory of workload JSON files")
      ->required();
  add_shared_flags(ablate, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) return cmd_plan(workload_file, flags);
    if (simulate->parsed())
      return cmd_simulate(workload_file, plan_file, flags, sim_duration,
                          sim_arrival, sim_accounting);
    if (oracle->parsed()) return cmd_oracle(workload_file, flags);
    if (synthesize->parsed()) return cmd_synthesize(flags, synth_count, oracle_scale);
    if (ablate->parsed()) return cmd_ablate(corpus_dir, flags);
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const WorkloadError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

#include <doctest.h>

#include <map>
#include <random>

#include "fixtures.hpp"
#include "harpagon/synth.hpp"
#include "harpagon/workload.hpp"

using namespace harpagon;
using namespace fixtures;

namespace {

SimConfig sim_cfg(double duration = 60.0) {
  SimConfig s;
  s.duration = duration;
  s.arrival = ArrivalModel::Uniform;
  s.accounting = Accounting::Cycle;
  return s;
}

}  // namespace

TEST_CASE("worked scenario: batch-aware dispatch reaches 2.75 s") {
  SimTrace trace = simulate(m4_schedule(), 8.0, DispatchPolicy::TC, sim_cfg());
  CHECK(trace.summary.max_latency == doctest::Approx(2.75).epsilon(1e-9));
  BoundReport bound = check_bound(trace, m4_schedule(), DispatchPolicy::TC);
  CHECK(bound.ok);
  // The bound is tight on the first tier: zero slack somewhere.
  double min_slack = 1e9;
  for (double s : bound.slack_per_machine) min_slack = std::min(min_slack, s);
  CHECK(min_slack == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("worked scenario: round-robin dispatch reaches 3.375 s") {
  SimTrace trace = simulate(m4_schedule(), 8.0, DispatchPolicy::RR, sim_cfg());
  CHECK(trace.summary.max_latency == doctest::Approx(3.375).epsilon(1e-9));
  BoundReport bound = check_bound(trace, m4_schedule(), DispatchPolicy::RR);
  CHECK(bound.ok);
}

TEST_CASE("TC is strictly better than RR on the worked scenario") {
  double tc = simulate(m4_schedule(), 8.0, DispatchPolicy::TC, sim_cfg())
                  .summary.max_latency;
  double rr = simulate(m4_schedule(), 8.0, DispatchPolicy::RR, sim_cfg())
                  .summary.max_latency;
  CHECK(tc < rr);
}

TEST_CASE("single machine with batch 1: per-request latency is d") {
  ModuleSchedule s;
  s.module_id = "m";
  s.tiers.push_back({config("m", 1, 0.1), 1, 0.0, 10.0});
  SimConfig cfg = sim_cfg(10.0);
  cfg.accounting = Accounting::PerRequest;
  SimTrace trace = simulate(s, 10.0, DispatchPolicy::TC, cfg);
  for (const SimRequest& r : trace.requests) {
    if (r.machine < 0 || r.flushed) continue;
    CHECK(r.complete - r.arrival == doctest::Approx(0.1));
  }
}

TEST_CASE("conservation: every request lands in exactly one batch") {
  for (DispatchPolicy policy :
       {DispatchPolicy::TC, DispatchPolicy::RR, DispatchPolicy::DT}) {
    SimTrace trace = simulate(m4_schedule(), 8.0, policy, sim_cfg());
    std::map<std::int64_t, int> seen;
    for (const SimRequest& r : trace.requests) {
      CHECK(seen[r.id]++ == 0);
      CHECK(r.machine >= 0);  // nothing left unassigned at flush
      if (!r.flushed) {
        CHECK(r.dispatch >= r.arrival - kEps);
        CHECK(r.complete ==
              doctest::Approx(r.dispatch +
                              trace.machines[r.machine].config.duration));
      }
    }
  }
}

TEST_CASE("served rates match tier assignments within 1%") {
  auto check_rates = [](const ModuleSchedule& sched, double rate,
                        DispatchPolicy policy, double duration = 120.0) {
    // Warm-up and end-of-stream flush are fixed offsets; the horizon must be
    // long enough for them to amortize below the tolerance.
    SimConfig cfg = sim_cfg(duration);
    SimTrace trace = simulate(sched, rate, policy, cfg);
    std::vector<double> tier_served(sched.tiers.size(), 0.0);
    for (const SimMachine& m : trace.machines)
      tier_served[m.tier] += static_cast<double>(m.requests);
    for (size_t i = 0; i < sched.tiers.size(); ++i) {
      double served_rate = tier_served[i] / cfg.duration;
      CHECK(served_rate ==
            doctest::Approx(sched.tiers[i].assigned_rate).epsilon(0.01));
    }
  };
  check_rates(m4_schedule(), 8.0, DispatchPolicy::TC);
  check_rates(m4_schedule(), 8.0, DispatchPolicy::RR);

  SchedulerOptions o;
  auto s3 = generate_config(198.0, 1.0, m3(), o);
  REQUIRE(s3);
  check_rates(*s3, 198.0, DispatchPolicy::TC, 480.0);
}

TEST_CASE("planner schedules respect the analytic bound in simulation") {
  SchedulerOptions o;
  auto s3 = schedule_module(198.0, 1.0, m3(), o);
  REQUIRE(s3);
  SimTrace trace = simulate(*s3, 198.0, DispatchPolicy::TC, sim_cfg());
  BoundReport bound = check_bound(trace, *s3, DispatchPolicy::TC);
  CHECK(bound.ok);
  CHECK(trace.summary.max_latency <= module_wcl(*s3, DispatchPolicy::TC) + kEps);
}

TEST_CASE("dummy requests are injected at the configured share") {
  SchedulerOptions o;
  auto base = generate_config(198.0, 1.0, m3(), o);
  REQUIRE(base);
  ModuleSchedule s4 = apply_dummy(*base, 198.0, 1.0, m3(), o);
  REQUIRE(s4.dummy_rate == doctest::Approx(2.0));
  SimTrace trace = simulate(s4, 198.0, DispatchPolicy::TC, sim_cfg(30.0));
  double share = static_cast<double>(trace.summary.dummy_requests) /
                 static_cast<double>(trace.summary.total_requests);
  CHECK(share == doctest::Approx(2.0 / 200.0).epsilon(0.05));
  CHECK(trace.summary.max_latency_real <= trace.summary.max_latency + kEps);
}

TEST_CASE("identical inputs produce byte-identical traces") {
  for (DispatchPolicy policy : {DispatchPolicy::TC, DispatchPolicy::RR}) {
    SimConfig cfg = sim_cfg(20.0);
    cfg.arrival = ArrivalModel::Poisson;
    cfg.seed = 99;
    std::string a =
        emit_trace_jsonl(simulate(m4_schedule(), 8.0, policy, cfg));
    std::string b =
        emit_trace_jsonl(simulate(m4_schedule(), 8.0, policy, cfg));
    CHECK(a == b);
    CHECK(!a.empty());
  }
}

TEST_CASE("rate mismatch is rejected") {
  CHECK_THROWS(simulate(m4_schedule(), 9.0, DispatchPolicy::TC, sim_cfg()));
}

TEST_CASE("bound safety across a synthesized single-module corpus") {
  std::mt19937_64 rng(41);
  SynthOptions syn;
  syn.max_modules = 1;
  int simulated = 0;
  for (int i = 0; i < 60; ++i) {
    AppDag dag = synthesize_workload(rng, syn);
    const auto& [id, profile] = *dag.modules.begin();
    SchedulerOptions o;
    auto s = schedule_module(dag.rates.at(id), dag.slo, profile, o);
    if (!s) continue;
    double total = dag.rates.at(id) + s->dummy_rate;
    SimConfig cfg = sim_cfg(std::max(20.0, 40.0 * s->wcl));
    SimTrace trace = simulate(*s, dag.rates.at(id), DispatchPolicy::TC, cfg);
    BoundReport bound = check_bound(trace, *s, DispatchPolicy::TC);
    if (!bound.ok)
      for (const std::string& v : bound.violations) MESSAGE(v);
    CHECK(bound.ok);
    (void)total;
    ++simulated;
  }
  CHECK(simulated >= 30);
}

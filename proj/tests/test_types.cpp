#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"

using namespace harpagon;
using namespace fixtures;

TEST_CASE("throughput and ratio") {
  ConfigProfile c = config("m", 32, 0.8);
  CHECK(c.throughput() == doctest::Approx(40.0));
  CHECK(c.ratio() == doctest::Approx(40.0));
  c.hardware.unit_price = 2.0;
  CHECK(c.ratio() == doctest::Approx(20.0));
}

TEST_CASE("canonical order ranks by ratio desc") {
  auto order = canonical_order(m3());
  REQUIRE(order.size() == 3);
  CHECK(order[0].batch == 32);  // r = 40
  CHECK(order[1].batch == 8);   // r = 32
  CHECK(order[2].batch == 2);   // r = 20
}

TEST_CASE("canonical order tie-breaks: throughput, batch, hardware") {
  ModuleProfile p{"m", {}};
  // Same ratio 20: t=20/p=1 and t=40/p=2; higher throughput first.
  p.entries.push_back(config("m", 4, 0.2));
  p.entries.push_back(config("m", 8, 0.2, {"hw1", 2.0}));
  auto order = canonical_order(p);
  CHECK(order[0].batch == 8);
  CHECK(order[1].batch == 4);

  // Fully tied ratio and throughput: smaller batch first.
  ModuleProfile q{"m", {config("m", 8, 0.4), config("m", 4, 0.2)}};
  auto order2 = canonical_order(q);
  CHECK(order2[0].batch == 4);
}

TEST_CASE("canonical order is permutation-invariant") {
  std::mt19937 rng(7);
  ModuleProfile p = m3();
  auto reference = canonical_order(p);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(p.entries.begin(), p.entries.end(), rng);
    auto order = canonical_order(p);
    REQUIRE(order.size() == reference.size());
    for (size_t j = 0; j < order.size(); ++j)
      CHECK(same_config(order[j], reference[j]));
  }
}

TEST_CASE("schedule cost sums price-weighted machines") {
  ModuleSchedule s;
  s.tiers.push_back({config("m", 32, 0.8), 4, 0.0, 160.0});
  s.tiers.push_back({config("m", 8, 0.25), 1, 0.0, 32.0});
  s.tiers.push_back({config("m", 2, 0.1), 0, 0.3, 6.0});
  CHECK(schedule_cost(s) == doctest::Approx(5.3));
}

TEST_CASE("schedule cost is linear in unit price") {
  ModuleSchedule s;
  s.tiers.push_back({config("m", 8, 0.25, {"hw1", 1.0}), 2, 0.0, 64.0});
  s.tiers.push_back({config("m", 2, 0.1, {"hw1", 1.0}), 0, 0.5, 10.0});
  double base = schedule_cost(s);
  for (Tier& t : s.tiers) t.config.hardware.unit_price = 3.0;
  CHECK(schedule_cost(s) == doctest::Approx(3.0 * base));
}

TEST_CASE("validate_dag flags structural errors") {
  AppDag dag = m3_single();
  CHECK(validate_dag(dag).ok());

  AppDag no_rate = dag;
  no_rate.rates.clear();
  CHECK_FALSE(validate_dag(no_rate).ok());

  AppDag bad_slo = dag;
  bad_slo.slo = 0.0;
  CHECK_FALSE(validate_dag(bad_slo).ok());

  AppDag cycle = diamond_dag();
  cycle.edges.push_back({"d", "a"});
  CHECK_FALSE(validate_dag(cycle).ok());

  AppDag dup = dag;
  dup.modules["m3"].entries.push_back(config("m3", 2, 0.2));
  CHECK_FALSE(validate_dag(dup).ok());

  AppDag neg = dag;
  neg.modules["m3"].entries[0].duration = -1.0;
  CHECK_FALSE(validate_dag(neg).ok());
}

TEST_CASE("e2e latency is the longest path of module wcls") {
  AppDag dag = diamond_dag();
  std::map<std::string, double> wcls{
      {"a", 0.1}, {"b", 0.5}, {"c", 0.2}, {"d", 0.3}};
  CHECK(e2e_latency(dag, wcls) == doctest::Approx(0.9));  // a -> b -> d
  wcls["c"] = 1.0;
  CHECK(e2e_latency(dag, wcls) == doctest::Approx(1.4));  // a -> c -> d
}

TEST_CASE("e2e latency on a single module equals its wcl") {
  AppDag dag = m3_single();
  CHECK(e2e_latency(dag, {{"m3", 0.42}}) == doctest::Approx(0.42));
}

TEST_CASE("e2e latency is monotone in each module wcl") {
  AppDag dag = diamond_dag();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int i = 0; i < 50; ++i) {
    std::map<std::string, double> wcls;
    for (const auto& [id, _] : dag.modules) wcls[id] = u(rng);
    double base = e2e_latency(dag, wcls);
    for (const auto& [id, _] : dag.modules) {
      auto bumped = wcls;
      bumped[id] += 0.25;
      CHECK(e2e_latency(dag, bumped) >= base - kEps);
    }
  }
}

TEST_CASE("path latency through a branch module") {
  AppDag dag = diamond_dag();
  std::map<std::string, double> wcls{
      {"a", 0.1}, {"b", 0.5}, {"c", 0.2}, {"d", 0.3}};
  CHECK(path_latency_through(dag, "c", wcls) == doctest::Approx(0.6));
  CHECK(path_latency_through(dag, "b", wcls) == doctest::Approx(0.9));
  CHECK(path_latency_through(dag, "a", wcls) == doctest::Approx(0.9));
}

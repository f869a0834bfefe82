#pragma once

#include "harpagon/harpagon.hpp"

namespace fixtures {

using namespace harpagon;

inline HardwareType unit_hw() { return {"hw0", 1.0}; }

inline ConfigProfile config(const std::string& module, int batch, double duration,
                            HardwareType hw = unit_hw()) {
  ConfigProfile c;
  c.module_id = module;
  c.hardware = hw;
  c.batch = batch;
  c.duration = duration;
  return c;
}

// Profiled modules used throughout: three batch ladders with sub-linear
// duration growth on a single unit-price hardware type.
inline ModuleProfile m1() {
  return {"m1",
          {config("m1", 2, 0.160), config("m1", 4, 0.200), config("m1", 8, 0.320)}};
}

inline ModuleProfile m2() {
  return {"m2",
          {config("m2", 2, 0.125), config("m2", 4, 0.160), config("m2", 8, 0.250)}};
}

inline ModuleProfile m3() {
  return {"m3",
          {config("m3", 2, 0.100), config("m3", 8, 0.250), config("m3", 32, 0.800)}};
}

// Three-machine worked scenario: A and B at batch 6 / 2.0 s, C at batch 2 /
// 1.0 s, serving 8 req/s split 6 + 2.
inline ModuleProfile m4() {
  return {"m4", {config("m4", 6, 2.0), config("m4", 2, 1.0)}};
}

inline ModuleSchedule m4_schedule() {
  ModuleSchedule s;
  s.module_id = "m4";
  s.tiers.push_back({config("m4", 6, 2.0), 2, 0.0, 6.0});
  s.tiers.push_back({config("m4", 2, 1.0), 1, 0.0, 2.0});
  s.cost = schedule_cost(s);
  s.wcl = module_wcl(s, DispatchPolicy::TC);
  return s;
}

inline AppDag single_module_dag(const ModuleProfile& profile, double rate,
                                double slo) {
  AppDag dag;
  dag.modules[profile.module_id] = profile;
  dag.rates[profile.module_id] = rate;
  dag.slo = slo;
  return dag;
}

inline AppDag m3_single() { return single_module_dag(m3(), 198.0, 1.0); }
inline AppDag m1_single() { return single_module_dag(m1(), 100.0, 0.4); }

// Diamond: a feeds b and c in parallel, both join at d.
inline AppDag diamond_dag() {
  AppDag dag;
  for (const char* id : {"a", "b", "c", "d"}) {
    ModuleProfile p = m1();
    p.module_id = id;
    for (ConfigProfile& c : p.entries) c.module_id = id;
    dag.modules[id] = p;
    dag.rates[id] = 50.0;
  }
  dag.edges = {{"a", "b"}, {"a", "c"}, {"b", "d"}, {"c", "d"}};
  dag.slo = 2.0;
  return dag;
}

}  // namespace fixtures

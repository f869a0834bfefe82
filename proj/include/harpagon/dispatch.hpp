#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "harpagon/types.hpp"

namespace harpagon {

// TC: batch-aware dispatch in throughput-cost order.
// RR: one request at a time, batches collected at the machine.
// DT: batch-sized chunks at each machine's own throughput share.
enum class DispatchPolicy { TC, RR, DT };

inline const char* to_string(DispatchPolicy p) {
  switch (p) {
    case DispatchPolicy::TC: return "tc";
    case DispatchPolicy::RR: return "rr";
    case DispatchPolicy::DT: return "dt";
  }
  return "?";
}

// A tier together with its remaining workload w: the total rate assigned to
// this tier and every lower-ratio tier, i.e. the tier's effective batch
// collection rate under TC dispatch.
struct TierView {
  ConfigProfile config;
  double remaining_workload = 0.0;
};

inline std::vector<TierView> remaining_workloads(const ModuleSchedule& schedule) {
  for (size_t i = 0; i + 1 < schedule.tiers.size(); ++i) {
    if (canonical_less(schedule.tiers[i + 1].config, schedule.tiers[i].config))
      throw std::invalid_argument("remaining_workloads: tiers out of canonical order");
    if (schedule.tiers[i].partial_fraction > 0.0)
      throw std::invalid_argument("remaining_workloads: partial tier is not last");
  }
  std::vector<TierView> views(schedule.tiers.size());
  double suffix = 0.0;
  for (size_t i = schedule.tiers.size(); i-- > 0;) {
    suffix += schedule.tiers[i].assigned_rate;
    views[i] = {schedule.tiers[i].config, suffix};
  }
  return views;
}

// Worst-case latency of one tier: TC collects at the remaining workload rate,
// RR and DT at the machine's own throughput (b/t == d, hence 2d).
inline double tier_wcl(const TierView& view, DispatchPolicy policy) {
  const ConfigProfile& c = view.config;
  switch (policy) {
    case DispatchPolicy::TC:
      if (!(view.remaining_workload > 0.0))
        throw std::invalid_argument("tier_wcl: non-positive remaining workload");
      return c.duration + c.batch / view.remaining_workload;
    case DispatchPolicy::RR:
    case DispatchPolicy::DT:
      return 2.0 * c.duration;
  }
  return 0.0;
}

inline double module_wcl(const ModuleSchedule& schedule, DispatchPolicy policy) {
  double worst = 0.0;
  for (const TierView& view : remaining_workloads(schedule))
    worst = std::max(worst, tier_wcl(view, policy));
  return worst;
}

// Prospective worst-case latency of allocating `config` against the current
// unallocated workload, as used while planning (Algorithm GetWCL semantics).
inline double planning_wcl(const ConfigProfile& config, double unallocated_rate,
                           DispatchPolicy policy) {
  switch (policy) {
    case DispatchPolicy::TC:
      if (!(unallocated_rate > 0.0))
        throw std::invalid_argument("planning_wcl: non-positive rate");
      return config.duration + config.batch / unallocated_rate;
    case DispatchPolicy::RR:
    case DispatchPolicy::DT:
      return 2.0 * config.duration;
  }
  return 0.0;
}

namespace detail {

// Feasibility check used inside the greedy allocator. Under TC the upcoming
// machines collect at the unallocated rate. Under RR a full machine collects
// at its own throughput (2d) but a partial machine only receives the residual
// stream, so its collection rate is the residual itself. DT pushes batch
// chunks at throughput rate regardless of the residual.
inline double alloc_wcl(const ConfigProfile& config, double rw,
                        DispatchPolicy policy) {
  switch (policy) {
    case DispatchPolicy::TC:
      return config.duration + config.batch / rw;
    case DispatchPolicy::RR:
      return config.duration +
             config.batch / std::min(config.throughput(), rw);
    case DispatchPolicy::DT:
      return 2.0 * config.duration;
  }
  return 0.0;
}

}  // namespace detail

}  // namespace harpagon

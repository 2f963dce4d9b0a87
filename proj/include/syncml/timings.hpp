#pragma once

#include <chrono>

namespace syncml {

using Nanos = std::chrono::nanoseconds;

// Per-round wall-clock split. t_overhead is the residual, so
// t_tot == t_worker + t_master + t_overhead holds exactly in integer ns.
struct RoundTimings {
  Nanos t_worker{0};    // slowest worker's local compute
  Nanos t_master{0};    // aggregation on the coordinator
  Nanos t_overhead{0};  // everything else: transfers, waiting, injected latency
  Nanos t_tot{0};

  static RoundTimings from_measured(Nanos total, Nanos worker, Nanos master) {
    return {worker, master, total - worker - master, total};
  }

  bool consistent() const { return t_tot == t_worker + t_master + t_overhead; }
};

inline double seconds(Nanos d) { return std::chrono::duration<double>(d).count(); }

}  // namespace syncml

#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "emuspmv/partition.hpp"

namespace emuspmv {

using Cycle = std::uint64_t;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cost model and resource sizes for one simulated node.
///
/// Uncontended, a local access occupies the issuing thread for
/// local_access_cycles. A remote access issues on the current nodelet, waits
/// in its migration queue, occupies that nodelet's ME port for
/// me_context_cycles, spends me_delivery_latency in the fabric, waits for a
/// thread context at the destination and then executes with latency
/// migration_penalty_factor * local_access_cycles.
struct SimConfig {
  Nodelet nodelets = 8;
  Index threads_per_nodelet = 64;
  Cycle local_access_cycles = 1;
  double migration_penalty_factor = 2.0;
  Index migration_queue_capacity = 64;
  Index memory_queue_capacity = 64;
  Index me_accepts_per_cycle = 1;
  Cycle me_delivery_latency = 8;
  Cycle remote_update_ack_latency = 8;
  double throttle_high_watermark = 0.9;
  double throttle_low_watermark = 0.5;
  Cycle occupancy_sample_interval = 100;
  std::uint64_t seed = 0;

  // ~200-byte thread contexts keep the ME port busy longer than an 8-byte
  // remote update or an acknowledgement (one cycle each).
  Cycle me_context_cycles = 4;
  // Acknowledgements take an ME acceptance slot at the servicing nodelet.
  bool acks_use_me = true;
  // Threads from other homes may not migrate to a nodelet once its visitors
  // plus inbound visitors reach its active-thread cap. Returning home is
  // always allowed.
  bool throttle_admission = true;
  // 0 selects a budget derived from the plan size.
  Cycle max_cycles = 0;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;

  Cycle migrated_access_cycles() const {
    const double c = migration_penalty_factor * static_cast<double>(local_access_cycles);
    return std::max<Cycle>(1, static_cast<Cycle>(c + 0.5));
  }

  void validate() const {
    auto positive = [](auto v, const char* name) {
      if (v < 1) throw ConfigError(std::string(name) + " must be at least 1");
    };
    positive(nodelets, "nodelets");
    positive(threads_per_nodelet, "threads_per_nodelet");
    positive(local_access_cycles, "local_access_cycles");
    positive(migration_queue_capacity, "migration_queue_capacity");
    positive(memory_queue_capacity, "memory_queue_capacity");
    positive(me_accepts_per_cycle, "me_accepts_per_cycle");
    positive(me_delivery_latency, "me_delivery_latency");
    positive(remote_update_ack_latency, "remote_update_ack_latency");
    positive(occupancy_sample_interval, "occupancy_sample_interval");
    positive(me_context_cycles, "me_context_cycles");
    if (!(throttle_low_watermark > 0.0 && throttle_low_watermark <= throttle_high_watermark &&
          throttle_high_watermark <= 1.0)) {
      throw ConfigError("watermarks must satisfy 0 < low <= high <= 1");
    }
    if (!(migration_penalty_factor >= 1.0)) throw ConfigError("migration_penalty_factor must be at least 1");
  }
};

/// Hysteresis throttle on migration-queue pressure: above the high watermark
/// the active-thread cap halves (minimum 1); below the low watermark it grows
/// by one up to threads_per_nodelet; in between it holds.
inline Index throttle_policy(double occupied_fraction, Index current_cap, const SimConfig& cfg) {
  if (occupied_fraction > cfg.throttle_high_watermark) return std::max<Index>(1, current_cap / 2);
  if (occupied_fraction < cfg.throttle_low_watermark) return std::min<Index>(cfg.threads_per_nodelet, current_cap + 1);
  return current_cap;
}

}  // namespace emuspmv

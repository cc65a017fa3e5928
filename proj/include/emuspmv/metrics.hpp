#pragma once

// Derived statistics, experiment records and their JSON/CSV forms.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emuspmv/machine.hpp"
#include "emuspmv/sim_config.hpp"
#include "emuspmv/sparse.hpp"
#include "emuspmv/stats.hpp"

namespace emuspmv {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr double kDefaultClockHz = 150e6;

struct BandwidthEstimate {
  double bytes = 0.0;
  double seconds = 0.0;
  double mbs = 0.0;
  std::string formula;
};

/// Bytes the kernel must move: values and col_index per non-zero, row_ptr,
/// one x read per non-zero and one b write per row, all 8-byte words.
inline double spmv_traffic_bytes(const CsrMatrix& m) {
  const double nnz = static_cast<double>(m.nnz());
  const double rows = static_cast<double>(m.num_rows);
  return 8.0 * (2.0 * nnz) + 8.0 * (rows + 1.0) + 8.0 * nnz + 8.0 * rows;
}

inline BandwidthEstimate bandwidth_estimate(const MetricsReport& report, const CsrMatrix& m,
                                            double clock_hz = kDefaultClockHz) {
  if (report.cycles == 0) throw std::invalid_argument("bandwidth estimate needs a report with non-zero cycles");
  if (!(clock_hz > 0.0)) throw std::invalid_argument("clock frequency must be positive");
  BandwidthEstimate e;
  e.bytes = spmv_traffic_bytes(m);
  e.seconds = static_cast<double>(report.cycles) / clock_hz;
  e.mbs = e.bytes / e.seconds / 1e6;
  e.formula = "bytes = 8*(2*NNZ) + 8*(M+1) + 8*NNZ + 8*M; seconds = cycles / clock_hz; MB/s = bytes / seconds / 1e6";
  return e;
}

/// Averages over the trials of one run.
struct TrialSummary {
  Index trials = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<Cycle> cycles;
  double mean_cycles = 0.0;
  double mean_migrations = 0.0;
  double mean_mem_instr_cv = 0.0;
  double mean_bandwidth_mbs = 0.0;
  std::vector<double> mean_migrations_per_nodelet;

  friend bool operator==(const TrialSummary&, const TrialSummary&) = default;
};

struct ExperimentRecord {
  std::string matrix;
  std::string reorder;
  std::string layout_x;
  std::string layout_b;
  std::string distribution;
  Index num_rows = 0;
  Index num_cols = 0;
  Index nnz = 0;
  SimConfig config;
  double clock_hz = kDefaultClockHz;
  TrialSummary summary;
  MetricsReport report;  // first trial, complete
  // Run-dependent details (timestamp, wall clock) and provenance notes.
  // Excluded when comparing runs for determinism.
  nlohmann::json metadata = nlohmann::json::object();

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

/// Summary of a single report, as if it were a one-trial run.
inline TrialSummary summarize(const std::vector<MetricsReport>& reports, const std::vector<std::uint64_t>& seeds,
                              const CsrMatrix& m, double clock_hz) {
  TrialSummary s;
  s.trials = reports.size();
  s.seeds = seeds;
  if (reports.empty()) return s;
  const double n = static_cast<double>(reports.size());
  s.mean_migrations_per_nodelet.assign(reports.front().nodelets.size(), 0.0);
  for (const auto& r : reports) {
    s.cycles.push_back(r.cycles);
    s.mean_cycles += static_cast<double>(r.cycles) / n;
    s.mean_migrations += static_cast<double>(r.migrations_total) / n;
    s.mean_mem_instr_cv += r.mem_instr_cv / n;
    s.mean_bandwidth_mbs += (r.cycles ? bandwidth_estimate(r, m, clock_hz).mbs : 0.0) / n;
    for (std::size_t k = 0; k < r.nodelets.size(); ++k) {
      s.mean_migrations_per_nodelet[k] += static_cast<double>(r.nodelets[k].migrations_in) / n;
    }
  }
  return s;
}

struct RecordComparison {
  double cycle_ratio = 1.0;      // baseline / candidate
  double migration_ratio = 1.0;  // baseline / candidate
  double cv_delta = 0.0;         // baseline - candidate
};

inline double safe_ratio(double num, double den) {
  if (num == 0.0 && den == 0.0) return 1.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

inline RecordComparison compare_records(const ExperimentRecord& baseline, const ExperimentRecord& candidate) {
  if (baseline.num_rows != candidate.num_rows || baseline.num_cols != candidate.num_cols) {
    throw DimensionError("cannot compare runs on matrices of different dimensions");
  }
  RecordComparison c;
  c.cycle_ratio = safe_ratio(baseline.summary.mean_cycles, candidate.summary.mean_cycles);
  c.migration_ratio = safe_ratio(baseline.summary.mean_migrations, candidate.summary.mean_migrations);
  c.cv_delta = baseline.summary.mean_mem_instr_cv - candidate.summary.mean_mem_instr_cv;
  return c;
}

// ---- JSON -------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json{{"nodelets", c.nodelets},
                     {"threads_per_nodelet", c.threads_per_nodelet},
                     {"local_access_cycles", c.local_access_cycles},
                     {"migration_penalty_factor", c.migration_penalty_factor},
                     {"migration_queue_capacity", c.migration_queue_capacity},
                     {"memory_queue_capacity", c.memory_queue_capacity},
                     {"me_accepts_per_cycle", c.me_accepts_per_cycle},
                     {"me_delivery_latency", c.me_delivery_latency},
                     {"remote_update_ack_latency", c.remote_update_ack_latency},
                     {"throttle_high_watermark", c.throttle_high_watermark},
                     {"throttle_low_watermark", c.throttle_low_watermark},
                     {"occupancy_sample_interval", c.occupancy_sample_interval},
                     {"seed", c.seed},
                     {"me_context_cycles", c.me_context_cycles},
                     {"acks_use_me", c.acks_use_me},
                     {"throttle_admission", c.throttle_admission},
                     {"max_cycles", c.max_cycles}};
}

inline void from_json(const nlohmann::json& j, SimConfig& c) {
  j.at("nodelets").get_to(c.nodelets);
  j.at("threads_per_nodelet").get_to(c.threads_per_nodelet);
  j.at("local_access_cycles").get_to(c.local_access_cycles);
  j.at("migration_penalty_factor").get_to(c.migration_penalty_factor);
  j.at("migration_queue_capacity").get_to(c.migration_queue_capacity);
  j.at("memory_queue_capacity").get_to(c.memory_queue_capacity);
  j.at("me_accepts_per_cycle").get_to(c.me_accepts_per_cycle);
  j.at("me_delivery_latency").get_to(c.me_delivery_latency);
  j.at("remote_update_ack_latency").get_to(c.remote_update_ack_latency);
  j.at("throttle_high_watermark").get_to(c.throttle_high_watermark);
  j.at("throttle_low_watermark").get_to(c.throttle_low_watermark);
  j.at("occupancy_sample_interval").get_to(c.occupancy_sample_interval);
  j.at("seed").get_to(c.seed);
  j.at("me_context_cycles").get_to(c.me_context_cycles);
  j.at("acks_use_me").get_to(c.acks_use_me);
  j.at("throttle_admission").get_to(c.throttle_admission);
  j.at("max_cycles").get_to(c.max_cycles);
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NodeletCounters, mem_instructions, migrations_in, migrations_out,
                                   remote_updates_serviced, remote_x_reads, instructions_issued,
                                   peak_migration_queue, peak_memory_queue)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(OccupancySample, cycle, resident, migration_queue, memory_queue, active_cap)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MetricsReport, cycles, nodelets, occupancy, mem_instr_cv, migrations_total,
                                   threads_spawned, packets_enqueued, packets_delivered, b)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrialSummary, trials, seeds, cycles, mean_cycles, mean_migrations,
                                   mean_mem_instr_cv, mean_bandwidth_mbs, mean_migrations_per_nodelet)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentRecord, matrix, reorder, layout_x, layout_b, distribution, num_rows,
                                   num_cols, nnz, config, clock_hz, summary, report, metadata)

inline std::string record_to_json(const ExperimentRecord& r) { return nlohmann::json(r).dump(2) + "\n"; }

inline ExperimentRecord record_from_json(std::string_view text) {
  return nlohmann::json::parse(text.begin(), text.end()).get<ExperimentRecord>();
}

// ---- CSV --------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string aggregate_csv_header() {
  return "schema_version,matrix,reorder,layout_x,layout_b,distribution,nodelets,threads,trials,cycles,"
         "migrations_total,migrations_per_nodelet,mem_instr_cv,bandwidth_mbs\n";
}

inline std::string aggregate_csv_row(const ExperimentRecord& r) {
  using detail::csv_field;
  using detail::format_double;
  std::string per;
  for (std::size_t k = 0; k < r.summary.mean_migrations_per_nodelet.size(); ++k) {
    if (k) per += ';';
    per += format_double(r.summary.mean_migrations_per_nodelet[k]);
  }
  std::ostringstream os;
  os << kCsvSchemaVersion << ',' << csv_field(r.matrix) << ',' << csv_field(r.reorder) << ',' << r.layout_x << ','
     << r.layout_b << ',' << r.distribution << ',' << r.config.nodelets << ',' << r.config.threads_per_nodelet << ','
     << r.summary.trials << ',' << format_double(r.summary.mean_cycles) << ','
     << format_double(r.summary.mean_migrations) << ',' << per << ',' << format_double(r.summary.mean_mem_instr_cv)
     << ',' << format_double(r.summary.mean_bandwidth_mbs) << '\n';
  return os.str();
}

inline std::string occupancy_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "cycle,nodelet,resident_threads,migration_queue,memory_queue,active_cap\n";
  for (const auto& s : r.occupancy) {
    for (std::size_t k = 0; k < s.resident.size(); ++k) {
      os << s.cycle << ',' << k << ',' << s.resident[k] << ',' << s.migration_queue[k] << ',' << s.memory_queue[k]
         << ',' << s.active_cap[k] << '\n';
    }
  }
  return os.str();
}

}  // namespace emuspmv

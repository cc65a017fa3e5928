// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace emuspmv;
using scenarios::make_plan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

SimConfig machine(Nodelet P = 8, Index T = 64) {
  SimConfig c;
  c.nodelets = P;
  c.threads_per_nodelet = T;
  return c;
}

MetricsReport sim(const CsrMatrix& m, LayoutKind xl, LayoutKind bl, Distribution d, const DenseVector& x,
                  SimConfig cfg = machine()) {
  return simulate(make_plan(m, xl, bl, d, cfg.nodelets, cfg.threads_per_nodelet), x, cfg);
}

// ---- criteria 1 and 2 share one sweep ----------------------------------------

struct RandomSuite {
  int configs = 0;
  int b_mismatches = 0;
  int count_mismatches = 0;
  double seconds = 0.0;
};

RandomSuite run_random_suite() {
  RandomSuite s;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  const LayoutKind layouts[] = {LayoutKind::Cyclic, LayoutKind::Block};
  const Distribution dists[] = {Distribution::Row, Distribution::Nnz};
  for (int i = 0; i < 50; ++i) {
    const Index rows = 1 + rng.below(256), cols = 1 + rng.below(256);
    const double density = 0.05 * (1.0 - rng.uniform01());  // (0, 0.05]
    const CsrMatrix m = scenarios::random_sparse(rng, rows, cols, density);
    const DenseVector x = scenarios::random_vector(rng, cols);
    const DenseVector want = spmv_reference(m, x);
    for (auto xl : layouts) {
      for (auto bl : layouts) {
        for (auto d : dists) {
          const DistributedPlan plan = make_plan(m, xl, bl, d);
          SimConfig cfg = machine();
          cfg.seed = static_cast<std::uint64_t>(i);
          const MetricsReport r = simulate(plan, x, cfg);
          const MigrationTrace t = trace_migrations(plan);
          ++s.configs;
          if (r.b != want) ++s.b_mismatches;
          if (r.per_nodelet(&NodeletCounters::migrations_in) != t.migrations_in ||
              r.per_nodelet(&NodeletCounters::mem_instructions) != t.mem_instructions) {
            ++s.count_mismatches;
          }
        }
      }
    }
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

// ---- criterion 7 and 8 scenario -------------------------------------------------

struct OccupancyRow {
  Cycle cycle;
  Nodelet nodelet;
  Index resident, migration_queue;
};

std::vector<OccupancyRow> parse_occupancy(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::vector<OccupancyRow> rows;
  while (std::getline(in, line)) {
    OccupancyRow r{};
    char comma;
    Index memq, cap;
    std::istringstream ls(line);
    ls >> r.cycle >> comma >> r.nodelet >> comma >> r.resident >> comma >> r.migration_queue >> comma >> memq >>
        comma >> cap;
    rows.push_back(r);
  }
  return rows;
}

const CsrMatrix& hot_matrix() {
  static const CsrMatrix m = scenarios::hot_spot(512, 1);
  return m;
}

const DenseVector& hot_x() {
  static const DenseVector x = [] {
    Rng rng(7);
    return scenarios::random_vector(rng, hot_matrix().num_cols);
  }();
  return x;
}

const MetricsReport& hot_report() {
  static const MetricsReport r =
      sim(hot_matrix(), LayoutKind::Block, LayoutKind::Block, Distribution::Row, hot_x());
  return r;
}

double max_remote_share(const MetricsReport& r) {
  const auto reads = r.per_nodelet(&NodeletCounters::remote_x_reads);
  double total = 0, peak = 0;
  for (Index v : reads) total += static_cast<double>(v);
  for (Index v : reads) peak = std::max(peak, static_cast<double>(v));
  return total > 0 ? peak / total : 0.0;
}

// ---- individual criteria -------------------------------------------------------

Outcome criterion1(const RandomSuite& s) {
  const bool ok = s.b_mismatches == 0 && s.seconds < 30.0;
  return {ok, std::to_string(s.configs) + " simulations, " + std::to_string(s.b_mismatches) +
                  " result mismatches, " + fmt(s.seconds, 1) + " s"};
}

Outcome criterion2(const RandomSuite& s) {
  return {s.count_mismatches == 0,
          std::to_string(s.count_mismatches) + " of " + std::to_string(s.configs) + " counter mismatches vs trace"};
}

Outcome criterion3() {
  const CsrMatrix m = scenarios::banded(1024, 32);
  const DenseVector x(1024, 1.0);
  const Index bw = matrix_bandwidth(m);
  const auto cyc = sim(m, LayoutKind::Cyclic, LayoutKind::Cyclic, Distribution::Row, x).migrations_total;
  const auto blk = sim(m, LayoutKind::Block, LayoutKind::Block, Distribution::Row, x).migrations_total;
  const double ratio = blk ? static_cast<double>(cyc) / static_cast<double>(blk) : INFINITY;
  const bool ok = bw <= 1024 / 16 && blk <= cyc && ratio >= 1.4;
  return {ok, "bandwidth " + std::to_string(bw) + ", cyclic " + std::to_string(cyc) + " vs block " +
                  std::to_string(blk) + " migrations, ratio " + fmt(ratio, 2)};
}

Outcome criterion4() {
  const CsrMatrix m = scenarios::block_diagonal(1024, 8);
  const auto r = sim(m, LayoutKind::Block, LayoutKind::Block, Distribution::Row, DenseVector(1024, 1.0));
  return {r.migrations_total == 0, std::to_string(r.migrations_total) + " migrations"};
}

Outcome criterion5() {
  const CsrMatrix m = scenarios::arrowhead(1024, 128, 4);
  const DenseVector x(1024, 1.0);
  const auto row = sim(m, LayoutKind::Cyclic, LayoutKind::Cyclic, Distribution::Row, x);
  const auto nnz = sim(m, LayoutKind::Cyclic, LayoutKind::Cyclic, Distribution::Nnz, x);
  const WorkAssignment a = distribute_by_nnz(m, 8, 64);
  Index max_row = 0, max_thread = 0;
  for (Index r = 0; r < m.num_rows; ++r) max_row = std::max(max_row, m.row_nnz(r));
  for (const RowRange& rr : a.thread_rows) max_thread = std::max(max_thread, m.row_ptr[rr.last] - m.row_ptr[rr.first]);
  const Index bound = ceil_div(m.nnz(), a.total_threads()) + max_row;
  const bool ok = nnz.mem_instr_cv < row.mem_instr_cv && max_thread < bound && nnz.cycles < row.cycles;
  return {ok, "CV row " + fmt(row.mem_instr_cv) + " vs nnz " + fmt(nnz.mem_instr_cv) + "; max thread nnz " +
                  std::to_string(max_thread) + " < " + std::to_string(bound) + "; cycles row " +
                  std::to_string(row.cycles) + " vs nnz " + std::to_string(nnz.cycles)};
}

Outcome criterion6() {
  const CsrMatrix m = scenarios::tapered_band(1024, 48);
  const DenseVector x(1024, 1.0);
  const auto row = sim(m, LayoutKind::Block, LayoutKind::Block, Distribution::Row, x).migrations_total;
  const auto nnz = sim(m, LayoutKind::Block, LayoutKind::Block, Distribution::Nnz, x).migrations_total;
  return {nnz >= row, "block layout, migrations row " + std::to_string(row) + " vs nnz " + std::to_string(nnz)};
}

Outcome criterion7() {
  const CsrMatrix& m = hot_matrix();
  const VectorLayout xl(LayoutKind::Block, m.num_cols, 8);
  Index hot = 0;
  for (Index c : m.col_index) hot += xl.owner(c) == 0;
  const bool quota = hot * 4 == m.nnz();

  const MetricsReport& r = hot_report();
  const SimConfig cfg = machine();
  const auto rows = parse_occupancy(occupancy_csv(r));
  const double threshold = cfg.throttle_high_watermark * static_cast<double>(cfg.migration_queue_capacity);
  std::optional<Cycle> saturated;
  double hot_sum = 0, other_sum = 0;
  Index hot_n = 0, other_n = 0;
  for (const auto& row : rows) {
    if (row.nodelet == 0 && !saturated && static_cast<double>(row.migration_queue) >= threshold) saturated = row.cycle;
    if (2 * row.cycle > r.cycles) continue;
    if (row.nodelet == 0) {
      hot_sum += static_cast<double>(row.resident);
      ++hot_n;
    } else {
      other_sum += static_cast<double>(row.resident);
      ++other_n;
    }
  }
  const bool early = saturated && 10 * *saturated <= r.cycles;
  const double hot_mean = hot_n ? hot_sum / hot_n : 0, other_mean = other_n ? other_sum / other_n : 0;
  const bool ok = quota && early && hot_mean < other_mean;
  return {ok, std::string(quota ? "" : "quota missed; ") + "nodelet 0 queue >= " + fmt(threshold, 1) + " at cycle " +
                  (saturated ? std::to_string(*saturated) : std::string("never")) + " of " + std::to_string(r.cycles) +
                  "; first-half resident " + fmt(hot_mean, 1) + " vs others " + fmt(other_mean, 1)};
}

Outcome criterion8() {
  const CsrMatrix& m = hot_matrix();
  const Permutation p = random_order(m.num_rows, 1);
  const CsrMatrix pm = apply_permutation(m, p);
  DenseVector px(m.num_cols);
  for (Index i = 0; i < m.num_cols; ++i) px[p[i]] = hot_x()[i];
  const MetricsReport& base = hot_report();
  const MetricsReport mixed = sim(pm, LayoutKind::Block, LayoutKind::Block, Distribution::Row, px);
  const double s0 = max_remote_share(base), s1 = max_remote_share(mixed);
  const bool ok = s1 < s0 && mixed.cycles < base.cycles;
  return {ok, "max remote-read share " + fmt(s0) + " -> " + fmt(s1) + ", cycles " + std::to_string(base.cycles) +
                  " -> " + std::to_string(mixed.cycles)};
}

Outcome criterion9() {
  const Index n = 4096;
  const CsrMatrix shuffled = apply_permutation(scenarios::path_graph(n), random_order(n, 11));
  Index start = 0;
  while (start < n && shuffled.row_nnz(start) != 2) ++start;
  const CsrMatrix banded = apply_permutation(shuffled, bfs_order(shuffled, start));
  const Index bw = matrix_bandwidth(banded);
  const DenseVector x(n, 1.0);
  const auto before = sim(shuffled, LayoutKind::Block, LayoutKind::Block, Distribution::Row, x).migrations_total;
  const auto after = sim(banded, LayoutKind::Block, LayoutKind::Block, Distribution::Row, x).migrations_total;
  const bool ok = bw == 1 && before >= 10 * after;
  return {ok, "bandwidth " + std::to_string(bw) + ", migrations " + std::to_string(before) + " -> " +
                  std::to_string(after)};
}

Outcome criterion10() {
  Rng rng(10);
  int checks = 0, bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Index n = 1 + rng.below(256);
    const CsrMatrix a = scenarios::random_sparse(rng, n, n, 0.05 * (1.0 - rng.uniform01()));
    const DenseVector x = scenarios::random_vector(rng, n);
    const DenseVector ax = spmv_reference(a, x);
    for (int j = 0; j < 20; ++j) {
      const Permutation p = random_order(n, rng.next());
      const CsrMatrix pa = apply_permutation(a, p);
      DenseVector px(n), pax(n);
      for (Index k = 0; k < n; ++k) {
        px[p[k]] = x[k];
        pax[p[k]] = ax[k];
      }
      const DenseVector got = spmv_reference(pa, px);
      ++checks;
      bool ok = pa.nnz() == a.nnz();
      for (Index k = 0; k < n; ++k) {
        const double scale = std::max(std::fabs(got[k]), std::fabs(pax[k]));
        const double rel = scale > 0 ? std::fabs(got[k] - pax[k]) / scale : 0.0;
        worst = std::max(worst, rel);
        ok = ok && rel <= 1e-12;
      }
      bad += !ok;
    }
  }
  return {bad == 0, std::to_string(bad) + " of " + std::to_string(checks) + " failed, worst relative error " +
                        [&] {
                          char buf[32];
                          std::snprintf(buf, sizeof buf, "%.2e", worst);
                          return std::string(buf);
                        }()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string strip_timing(const std::string& json) {
  auto j = nlohmann::json::parse(json);
  j["metadata"].erase("timestamp");
  j["metadata"].erase("simulation_wall_seconds");
  return j.dump(2);
}

Outcome criterion11() {
  const fs::path root = fs::temp_directory_path() / "emuspmv_acceptance_determinism";
  fs::remove_all(root);
  RunSpec s;
  s.matrix = parse_rmat_spec("rmat:scale=11,nnz=16000");
  s.reorder = parse_reorder_spec("random");
  s.distribution = Distribution::Nnz;
  s.x_layout = LayoutKind::Block;
  s.trials = 2;
  s.out_dir = root / "a";
  run(s);
  s.out_dir = root / "b";
  run(s);
  const std::string tag = s.tag();
  const bool csv_same = read_file(root / "a" / "results.csv") == read_file(root / "b" / "results.csv");
  const bool occ_same =
      read_file(root / "a" / (tag + ".occupancy.csv")) == read_file(root / "b" / (tag + ".occupancy.csv"));
  const bool json_same = strip_timing(read_file(root / "a" / (tag + ".json"))) ==
                         strip_timing(read_file(root / "b" / (tag + ".json")));
  fs::remove_all(root);
  return {csv_same && occ_same && json_same, std::string("results.csv ") + (csv_same ? "same" : "differs") +
                                                 ", occupancy " + (occ_same ? "same" : "differs") + ", json " +
                                                 (json_same ? "same" : "differs") + " (timing fields excluded)"};
}

Outcome criterion12(double elapsed_before) {
  const auto t0 = std::chrono::steady_clock::now();
  RmatParams p;
  p.scale = 14;
  p.target_nnz = 262144;
  p.seed = 12;
  const CsrMatrix m = coo_to_csr(generate_rmat(p));
  Rng rng(12);
  const DenseVector x = scenarios::random_vector(rng, m.num_cols);
  const auto r = sim(m, LayoutKind::Cyclic, LayoutKind::Cyclic, Distribution::Nnz, x);
  const bool correct = r.b == spmv_reference(m, x);
  const double total = elapsed_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {correct && total < 300.0, "scale-14 RMAT with " + std::to_string(m.nnz()) + " nnz simulated in " +
                                        std::to_string(r.cycles) + " cycles; suite total " + fmt(total, 1) + " s"};
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  int failures = 0;
  auto report = [&](int n, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
  };

  const RandomSuite suite = run_random_suite();
  report(1, [&] { return criterion1(suite); });
  report(2, [&] { return criterion2(suite); });
  report(3, criterion3);
  report(4, criterion4);
  report(5, criterion5);
  report(6, criterion6);
  report(7, criterion7);
  report(8, criterion8);
  report(9, criterion9);
  report(10, criterion10);
  report(11, criterion11);
  report(12, [&] {
    return criterion12(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  });
  return failures == 0 ? 0 : 1;
}

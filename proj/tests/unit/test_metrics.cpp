#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace emuspmv;
using Catch::Matchers::WithinRel;

namespace {

ExperimentRecord record_with(double cycles, double migrations, double cv, Index rows = 10) {
  ExperimentRecord r;
  r.num_rows = rows;
  r.num_cols = rows;
  r.summary.mean_cycles = cycles;
  r.summary.mean_migrations = migrations;
  r.summary.mean_mem_instr_cv = cv;
  return r;
}

RunSpec banded_spec(LayoutKind layout) {
  RunSpec s;
  s.matrix = std::filesystem::path(EMUSPMV_FIXTURE_DIR) / "band96.mtx";
  s.x_layout = s.b_layout = layout;
  s.config.threads_per_nodelet = 4;
  s.trials = 2;
  return s;
}

}  // namespace

TEST_CASE("coefficient of variation examples", "[metrics][cv]") {
  const std::vector<double> flat{4, 4, 4, 4};
  CHECK(coefficient_of_variation(flat) == 0.0);
  const std::vector<double> two{2, 4};
  CHECK_THAT(coefficient_of_variation(two), WithinRel(1.0 / 3.0, 1e-12));
  const std::vector<double> zeros{0, 0, 0};
  CHECK_THROWS_AS(coefficient_of_variation(zeros), UndefinedCvError);
  CHECK_THROWS_AS(coefficient_of_variation(std::vector<double>{}), UndefinedCvError);
  CHECK_THROWS_AS(coefficient_of_variation(std::vector<double>{1, -1}), std::invalid_argument);
}

TEST_CASE("cv matches a two-pass oracle and ignores scale", "[metrics][cv][property]") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(1 + rng.below(16));
    for (auto& x : v) x = 1.0 + static_cast<double>(rng.below(1000));
    const double cv = coefficient_of_variation(v);
    CHECK(oracles::relative_close(cv, oracles::population_cv(v), 1e-12));
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= 7.5;
    CHECK(oracles::relative_close(coefficient_of_variation(scaled), cv, 1e-12));
  }
}

TEST_CASE("traffic model by hand for a 4x4 identity", "[metrics][bandwidth]") {
  const CsrMatrix eye = scenarios::from_triplets(4, 4, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}, {3, 3, 1}});
  // x and values per non-zero (64), row_ptr (40), col_index (32), b (32)
  CHECK(spmv_traffic_bytes(eye) == 168.0);
  MetricsReport r;
  r.cycles = 150;  // one microsecond at 150 MHz
  const auto e = bandwidth_estimate(r, eye);
  CHECK_THAT(e.seconds, WithinRel(1e-6, 1e-12));
  CHECK_THAT(e.mbs, WithinRel(168.0, 1e-12));
  CHECK(e.formula.find("8*(M+1)") != std::string::npos);
}

TEST_CASE("bandwidth scales with clock and inversely with cycles", "[metrics][bandwidth]") {
  const CsrMatrix m = scenarios::banded(100, 3);
  MetricsReport r;
  r.cycles = 1000;
  const double base = bandwidth_estimate(r, m, 100e6).mbs;
  CHECK_THAT(bandwidth_estimate(r, m, 200e6).mbs, WithinRel(2 * base, 1e-12));
  r.cycles = 4000;
  CHECK_THAT(bandwidth_estimate(r, m, 100e6).mbs, WithinRel(base / 4, 1e-12));
  r.cycles = 0;
  CHECK_THROWS_AS(bandwidth_estimate(r, m), std::invalid_argument);
  r.cycles = 10;
  CHECK_THROWS_AS(bandwidth_estimate(r, m, 0.0), std::invalid_argument);
}

TEST_CASE("summaries average over trials", "[metrics]") {
  const CsrMatrix m = scenarios::banded(10, 1);
  MetricsReport a, b;
  a.cycles = 100;
  b.cycles = 300;
  a.migrations_total = 4;
  b.migrations_total = 8;
  a.nodelets.resize(2);
  b.nodelets.resize(2);
  a.nodelets[1].migrations_in = 4;
  b.nodelets[0].migrations_in = 8;
  a.mem_instr_cv = 0.5;
  b.mem_instr_cv = 0.25;
  const auto s = summarize({a, b}, {0, 1}, m, 1e6);
  CHECK(s.trials == 2);
  CHECK(s.cycles == std::vector<Cycle>{100, 300});
  CHECK(s.mean_cycles == 200.0);
  CHECK(s.mean_migrations == 6.0);
  CHECK(s.mean_mem_instr_cv == 0.375);
  CHECK(s.mean_migrations_per_nodelet == std::vector<double>{4.0, 2.0});
  const double bytes = spmv_traffic_bytes(m);
  CHECK_THAT(s.mean_bandwidth_mbs, WithinRel((bytes / 1e-4 + bytes / 3e-4) / 2 / 1e6, 1e-12));
}

TEST_CASE("comparison examples", "[metrics][compare]") {
  const auto base = record_with(1000, 40, 0.3);
  const auto same = compare_records(base, base);
  CHECK(same.cycle_ratio == 1.0);
  CHECK(same.migration_ratio == 1.0);
  CHECK(same.cv_delta == 0.0);

  const auto faster = compare_records(base, record_with(500, 10, 0.1));
  CHECK(faster.cycle_ratio == 2.0);
  CHECK(faster.migration_ratio == 4.0);
  CHECK_THAT(faster.cv_delta, WithinRel(0.2, 1e-12));

  const auto none = compare_records(record_with(10, 0, 0), record_with(10, 0, 0));
  CHECK(none.migration_ratio == 1.0);
  CHECK(std::isinf(compare_records(record_with(10, 5, 0), record_with(10, 0, 0)).migration_ratio));

  CHECK_THROWS_AS(compare_records(base, record_with(1, 1, 0, 11)), DimensionError);
}

TEST_CASE("comparison is antisymmetric", "[metrics][compare][property]") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto a = record_with(1 + rng.below(10000), 1 + rng.below(500), rng.uniform01());
    const auto b = record_with(1 + rng.below(10000), 1 + rng.below(500), rng.uniform01());
    const auto ab = compare_records(a, b), ba = compare_records(b, a);
    CHECK_THAT(ab.cycle_ratio * ba.cycle_ratio, WithinRel(1.0, 1e-12));
    CHECK_THAT(ab.migration_ratio * ba.migration_ratio, WithinRel(1.0, 1e-12));
    CHECK(ab.cv_delta == -ba.cv_delta);
  }
}

TEST_CASE("block layout beats cyclic on a band, as the trace predicts", "[metrics][compare][oracle]") {
  const auto cyc = execute(banded_spec(LayoutKind::Cyclic)).record;
  const auto blk = execute(banded_spec(LayoutKind::Block)).record;
  const auto c = compare_records(cyc, blk);

  const MatrixMarketData mm = read_matrix_market_file(std::string(EMUSPMV_FIXTURE_DIR) + "/band96.mtx");
  const CsrMatrix m = coo_to_csr(mm.matrix);
  auto trace_total = [&](LayoutKind k) {
    return static_cast<double>(
        trace_migrations(scenarios::make_plan(m, k, k, Distribution::Row, 8, 4)).total_migrations());
  };
  const double expected = trace_total(LayoutKind::Cyclic) / trace_total(LayoutKind::Block);
  CHECK(expected > 1.0);
  CHECK_THAT(c.migration_ratio, WithinRel(expected, 1e-12));
}

TEST_CASE("records survive a JSON round trip", "[metrics][json]") {
  RunSpec s = banded_spec(LayoutKind::Block);
  s.trials = 1;
  const RunOutputs out = execute(s);
  const ExperimentRecord back = record_from_json(out.json);
  CHECK(back == out.record);
  CHECK(record_to_json(back) == out.json);
  const auto j = nlohmann::json::parse(out.json);
  for (const char* key : {"matrix", "reorder", "layout_x", "layout_b", "distribution", "config", "summary", "report",
                          "metadata"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["metadata"].contains("cv_convention"));
}

TEST_CASE("aggregate csv carries the schema version", "[metrics][csv]") {
  const std::string header = aggregate_csv_header();
  CHECK(header.rfind("schema_version,", 0) == 0);
  CHECK(header.back() == '\n');
  const auto columns = std::count(header.begin(), header.end(), ',') + 1;

  ExperimentRecord r = record_with(10, 2, 0.5);
  r.matrix = "has,comma";
  r.summary.mean_migrations_per_nodelet = {1.5, 0.5};
  r.config.threads_per_nodelet = 64;
  const std::string row = aggregate_csv_row(r);
  CHECK(row.rfind(std::to_string(kCsvSchemaVersion) + ",\"has,comma\",", 0) == 0);
  CHECK(row.find("1.5;0.5") != std::string::npos);
  // one quoted comma rides along inside the matrix field
  CHECK(std::count(row.begin(), row.end(), ',') + 1 == columns + 1);
}

TEST_CASE("occupancy csv has one line per nodelet per sample", "[metrics][csv]") {
  MetricsReport r;
  OccupancySample s;
  s.cycle = 7;
  s.resident = {1, 2};
  s.migration_queue = {0, 3};
  s.memory_queue = {0, 0};
  s.active_cap = {64, 32};
  r.occupancy = {s};
  CHECK(occupancy_csv(r) ==
        "cycle,nodelet,resident_threads,migration_queue,memory_queue,active_cap\n"
        "7,0,1,0,0,64\n"
        "7,1,2,3,0,32\n");
}

// emuspmv: run simulated SpMV experiments on a migratory-thread machine model.
//
//   emuspmv run   --matrix A.mtx --reorder bfs --x-layout block --out results/
//   emuspmv sweep --rmat 10,40000,0.45,0.22,0.22 --reorder none --reorder random:1 --dist row --dist nnz
//   emuspmv order --matrix A.mtx --reorder bfs --perm-out A.bfs.perm
//
// Every flag can also come from a TOML/INI file given with --config (flags
// win) or from an EMUSPMV_<FLAG> environment variable.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "emuspmv/emuspmv.hpp"

namespace {

using namespace emuspmv;

struct Options {
  std::string matrix;
  std::string rmat;
  std::vector<std::string> reorders{"none"};
  std::vector<std::string> x_layouts{"cyclic"};
  std::vector<std::string> b_layouts{"cyclic"};
  std::vector<std::string> dists{"row"};
  Index trials = 10;
  std::uint64_t seed = 0;
  std::string out = "results";
  std::string trace_events;
  std::string perm_out;
  double clock_mhz = kDefaultClockHz / 1e6;
  unsigned jobs = 1;
  bool free_acks = false;
  bool no_admission = false;
  SimConfig cfg;
};

std::string env(const std::string& flag) {
  std::string name = "EMUSPMV_";
  for (char c : flag) name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

void add_options(CLI::App& app, Options& o) {
  const CLI::IsMember layouts({"cyclic", "block"});
  auto opt = [&](const std::string& flag, auto& target, const std::string& help) {
    return app.add_option("--" + flag, target, help)->envname(env(flag));
  };

  auto* matrix = opt("matrix", o.matrix, "Matrix Market file")->check(CLI::ExistingFile);
  auto* rmat = opt("rmat", o.rmat, "RMAT source: scale,nnz,a,b,c");
  matrix->excludes(rmat);
  opt("reorder", o.reorders, "none | bfs[:start] | random[:seed] | file:PATH (repeat in sweeps)");
  opt("x-layout", o.x_layouts, "cyclic | block")->check(layouts);
  opt("b-layout", o.b_layouts, "cyclic | block")->check(layouts);
  opt("dist", o.dists, "row | nnz")->check(CLI::IsMember({"row", "nnz"}));
  opt("nodelets", o.cfg.nodelets, "nodelets per node")->capture_default_str()->check(CLI::PositiveNumber);
  opt("threads", o.cfg.threads_per_nodelet, "worker threads per nodelet")->capture_default_str()->check(CLI::PositiveNumber);
  opt("trials", o.trials, "trials per run, seed_i = seed + i")->capture_default_str()->check(CLI::PositiveNumber);
  opt("seed", o.seed, "base seed")->capture_default_str();
  opt("occupancy-interval", o.cfg.occupancy_sample_interval, "cycles between occupancy samples")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  opt("out", o.out, "output directory")->capture_default_str();

  opt("penalty-factor", o.cfg.migration_penalty_factor, "migrated access cost relative to a local one")->capture_default_str();
  opt("migration-queue", o.cfg.migration_queue_capacity, "migration queue capacity (packets)")->capture_default_str();
  opt("memory-queue", o.cfg.memory_queue_capacity, "memory queue capacity (packets)")->capture_default_str();
  opt("me-accepts", o.cfg.me_accepts_per_cycle, "ME acceptances per nodelet per cycle")->capture_default_str();
  opt("me-latency", o.cfg.me_delivery_latency, "ME delivery latency (cycles)")->capture_default_str();
  opt("ack-latency", o.cfg.remote_update_ack_latency, "acknowledgement latency (cycles)")->capture_default_str();
  opt("me-context-cycles", o.cfg.me_context_cycles, "ME port cycles per thread context")->capture_default_str();
  opt("high-watermark", o.cfg.throttle_high_watermark, "throttle high watermark")->capture_default_str();
  opt("low-watermark", o.cfg.throttle_low_watermark, "throttle low watermark")->capture_default_str();
  opt("max-cycles", o.cfg.max_cycles, "cycle budget, 0 = automatic")->capture_default_str();
  opt("clock-mhz", o.clock_mhz, "clock used for the bandwidth estimate")->capture_default_str();
  app.add_flag("--free-acks", o.free_acks, "acknowledgements bypass the ME port")->envname(env("free-acks"));
  app.add_flag("--no-admission", o.no_admission, "disable visitor admission control")->envname(env("no-admission"));
}

RunSpec base_spec(const Options& o) {
  RunSpec s;
  if (!o.matrix.empty()) {
    s.matrix = std::filesystem::path(o.matrix);
  } else if (!o.rmat.empty()) {
    s.matrix = parse_rmat_spec(o.rmat);
  } else {
    throw SpecError("one of --matrix or --rmat is required");
  }
  s.config = o.cfg;
  s.config.acks_use_me = !o.free_acks;
  s.config.throttle_admission = !o.no_admission;
  s.trials = o.trials;
  s.base_seed = o.seed;
  s.clock_hz = o.clock_mhz * 1e6;
  s.out_dir = o.out;
  return s;
}

template <class T>
const T& only(const std::vector<T>& v, const char* flag) {
  if (v.size() != 1) throw SpecError(std::string(flag) + " takes a single value here; use sweep for several");
  return v.front();
}

int cmd_run(const Options& o) {
  RunSpec s = base_spec(o);
  s.reorder = parse_reorder_spec(only(o.reorders, "--reorder"));
  s.x_layout = parse_layout(only(o.x_layouts, "--x-layout"));
  s.b_layout = parse_layout(only(o.b_layouts, "--b-layout"));
  s.distribution = parse_distribution(only(o.dists, "--dist"));
  if (!o.trace_events.empty()) s.event_log = std::filesystem::path(o.trace_events);
  const RunOutputs r = run(s);
  std::printf("%s: %.1f cycles, %.1f migrations, cv %.4f, %.2f MB/s -> %s\n", s.tag().c_str(),
              r.record.summary.mean_cycles, r.record.summary.mean_migrations, r.record.summary.mean_mem_instr_cv,
              r.record.summary.mean_bandwidth_mbs, s.out_dir.string().c_str());
  return 0;
}

int cmd_sweep(const Options& o) {
  RunSpec base = base_spec(o);
  SweepAxes axes;
  axes.reorders.clear();
  for (const auto& r : o.reorders) axes.reorders.push_back(parse_reorder_spec(r));
  axes.x_layouts.clear();
  for (const auto& l : o.x_layouts) axes.x_layouts.push_back(parse_layout(l));
  axes.b_layouts.clear();
  for (const auto& l : o.b_layouts) axes.b_layouts.push_back(parse_layout(l));
  axes.distributions.clear();
  for (const auto& d : o.dists) axes.distributions.push_back(parse_distribution(d));
  const auto specs = expand_sweep(base, axes);
  const auto results = sweep(specs, base.out_dir, o.jobs);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    std::printf("%s: %.1f cycles, %.1f migrations\n", specs[i].tag().c_str(), results[i].record.summary.mean_cycles,
                results[i].record.summary.mean_migrations);
  }
  std::printf("%zu runs -> %s\n", specs.size(), (base.out_dir / "results.csv").string().c_str());
  return 0;
}

int cmd_order(const Options& o) {
  RunSpec s = base_spec(o);
  s.reorder = parse_reorder_spec(only(o.reorders, "--reorder"));
  RunSpec plain = s;
  plain.reorder = ReorderSpec{};
  const PreparedSystem before = prepare_system(plain, s.base_seed);
  const PreparedSystem after = prepare_system(s, s.base_seed);
  std::ofstream out(o.perm_out);
  if (!out) throw std::runtime_error("cannot write " + o.perm_out);
  write_permutation(out, after.permutation);
  out.close();
  if (!out) {
    std::filesystem::remove(o.perm_out);
    throw std::runtime_error("failed writing " + o.perm_out);
  }
  std::printf("%s: matrix bandwidth %llu -> %llu, permutation written to %s\n", s.reorder.canonical().c_str(),
              static_cast<unsigned long long>(matrix_bandwidth(before.matrix)),
              static_cast<unsigned long long>(matrix_bandwidth(after.matrix)), o.perm_out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Simulated SpMV on a migratory-thread machine"};
  app.set_config("--config", "", "TOML/INI file with flag values; command-line flags take precedence");
  app.require_subcommand(1);
  add_options(app, o);

  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  run_cmd->add_option("--trace-events", o.trace_events, "write per-event records of the first trial here");
  auto* sweep_cmd = app.add_subcommand("sweep", "run the cross product of the repeated flags");
  sweep_cmd->add_option("--jobs", o.jobs, "specs simulated concurrently")
      ->capture_default_str()
      ->check(CLI::Range(1u, std::max(1u, std::thread::hardware_concurrency()) * 4));
  auto* order_cmd = app.add_subcommand("order", "compute a reordering and write it as a permutation file");
  order_cmd->add_option("--perm-out", o.perm_out, "permutation file to write")->required();
  for (auto* sub : {run_cmd, sweep_cmd, order_cmd}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(o);
    if (*sweep_cmd) return cmd_sweep(o);
    return cmd_order(o);
  } catch (const SpecError& e) {
    std::fprintf(stderr, "emuspmv: usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "emuspmv: error: %s\n", e.what());
    return 1;
  }
}

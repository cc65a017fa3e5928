#pragma once

// Experiment pipeline: matrix source -> symmetric expansion -> reordering ->
// distributed plan -> simulation over trials -> report files.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "emuspmv/machine.hpp"
#include "emuspmv/matrix_market.hpp"
#include "emuspmv/metrics.hpp"
#include "emuspmv/partition.hpp"
#include "emuspmv/reorder.hpp"
#include "emuspmv/rmat.hpp"

namespace emuspmv {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != end) {
    throw SpecError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Accepts "scale,nnz,a,b,c" or "scale=..,nnz=..,a=..,b=..,c=..", optionally
/// prefixed with "rmat:". The generator seed comes from the trial seed.
inline RmatParams parse_rmat_spec(std::string_view text) {
  if (text.rfind("rmat:", 0) == 0) text.remove_prefix(5);
  const auto parts = detail::split(text, ',');
  RmatParams p;
  const bool keyed = text.find('=') != std::string_view::npos;
  if (!keyed) {
    if (parts.size() != 5) throw SpecError("rmat expects scale,nnz,a,b,c");
    p.scale = detail::parse_number<unsigned>(parts[0], "rmat scale");
    p.target_nnz = detail::parse_number<Index>(parts[1], "rmat nnz");
    p.a = detail::parse_number<double>(parts[2], "rmat a");
    p.b = detail::parse_number<double>(parts[3], "rmat b");
    p.c = detail::parse_number<double>(parts[4], "rmat c");
  } else {
    for (const auto& part : parts) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw SpecError("rmat field '" + part + "' is not key=value");
      const std::string key = part.substr(0, eq);
      const std::string_view val = std::string_view(part).substr(eq + 1);
      if (key == "scale") p.scale = detail::parse_number<unsigned>(val, "rmat scale");
      else if (key == "nnz") p.target_nnz = detail::parse_number<Index>(val, "rmat nnz");
      else if (key == "a") p.a = detail::parse_number<double>(val, "rmat a");
      else if (key == "b") p.b = detail::parse_number<double>(val, "rmat b");
      else if (key == "c") p.c = detail::parse_number<double>(val, "rmat c");
      else throw SpecError("unknown rmat field '" + key + "'");
    }
  }
  p.validate();
  return p;
}

struct ReorderSpec {
  enum class Kind { None, Bfs, Random, File };
  Kind kind = Kind::None;
  std::optional<std::uint64_t> arg;  // bfs start or random seed
  std::string path;

  std::string canonical() const {
    switch (kind) {
      case Kind::None: return "none";
      case Kind::Bfs: return arg ? "bfs:" + std::to_string(*arg) : "bfs";
      case Kind::Random: return arg ? "random:" + std::to_string(*arg) : "random";
      case Kind::File: return "file:" + path;
    }
    return "none";
  }
};

inline ReorderSpec parse_reorder_spec(std::string_view s) {
  ReorderSpec r;
  const auto colon = s.find(':');
  const std::string_view head = s.substr(0, colon);
  const std::string_view tail = colon == std::string_view::npos ? std::string_view{} : s.substr(colon + 1);
  if (head == "none" && colon == std::string_view::npos) return r;
  if (head == "file") {
    if (tail.empty()) throw SpecError("file reordering needs a path");
    r.kind = ReorderSpec::Kind::File;
    r.path = std::string(tail);
    return r;
  }
  if (head == "bfs") r.kind = ReorderSpec::Kind::Bfs;
  else if (head == "random") r.kind = ReorderSpec::Kind::Random;
  else throw SpecError("unknown reordering '" + std::string(s) + "' (expected none|bfs[:start]|random[:seed]|file:PATH)");
  if (colon != std::string_view::npos) r.arg = detail::parse_number<std::uint64_t>(tail, "reorder argument");
  return r;
}

struct RunSpec {
  std::variant<std::filesystem::path, RmatParams> matrix;
  ReorderSpec reorder;
  LayoutKind x_layout = LayoutKind::Cyclic;
  LayoutKind b_layout = LayoutKind::Cyclic;
  Distribution distribution = Distribution::Row;
  SimConfig config;
  Index trials = 10;
  std::uint64_t base_seed = 0;
  double clock_hz = kDefaultClockHz;
  std::filesystem::path out_dir = "results";
  std::optional<std::filesystem::path> event_log;

  std::string matrix_name() const {
    if (const auto* p = std::get_if<std::filesystem::path>(&matrix)) return p->stem().string();
    const auto& r = std::get<RmatParams>(matrix);
    return "rmat-s" + std::to_string(r.scale) + "-n" + std::to_string(r.target_nnz);
  }

  /// File-name-safe identifier, also the sweep sort key.
  std::string tag() const {
    std::string reorder_part = reorder.canonical();
    if (reorder.kind == ReorderSpec::Kind::File) reorder_part = "file-" + std::filesystem::path(reorder.path).stem().string();
    std::string t = matrix_name() + "_" + reorder_part + "_" + std::string(to_string(x_layout)) + "-" +
                    std::string(to_string(b_layout)) + "_" + std::string(to_string(distribution));
    for (char& c : t) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '-';
    }
    return t;
  }

  void validate() const {
    if (trials < 1) throw SpecError("trials must be at least 1");
    if (!(clock_hz > 0)) throw SpecError("clock frequency must be positive");
    config.validate();
  }
};

struct PreparedSystem {
  CsrMatrix matrix;  // after expansion and reordering
  DenseVector x;
  Permutation permutation = Permutation::identity(0);
};

/// Matrix for trial seed `seed`: generated or read, symmetric-expanded, reordered.
inline PreparedSystem prepare_system(const RunSpec& spec, std::uint64_t seed, nlohmann::json* notes = nullptr) {
  CsrMatrix base;
  if (const auto* path = std::get_if<std::filesystem::path>(&spec.matrix)) {
    const MatrixMarketData mm = read_matrix_market_file(path->string());
    base = coo_to_csr(expand_symmetric(mm.matrix, mm.symmetric));
    if (notes) (*notes)["matrix_declared_symmetric"] = mm.symmetric;
  } else {
    RmatParams p = std::get<RmatParams>(spec.matrix);
    p.seed = seed;
    base = coo_to_csr(generate_rmat(p));
  }

  PreparedSystem sys;
  const Index n = base.num_rows;
  switch (spec.reorder.kind) {
    case ReorderSpec::Kind::None:
      sys.permutation = Permutation::identity(n);
      break;
    case ReorderSpec::Kind::Bfs:
      if (!base.square()) throw DimensionError("reordering needs a square matrix");
      sys.permutation = bfs_order(base, spec.reorder.arg.value_or(0));
      break;
    case ReorderSpec::Kind::Random:
      if (!base.square()) throw DimensionError("reordering needs a square matrix");
      sys.permutation = random_order(n, spec.reorder.arg.value_or(seed));
      break;
    case ReorderSpec::Kind::File: {
      if (!base.square()) throw DimensionError("reordering needs a square matrix");
      std::ifstream in(spec.reorder.path);
      if (!in) throw std::runtime_error("cannot open permutation file " + spec.reorder.path);
      sys.permutation = load_permutation(in, n);
      if (notes) {
        (*notes)["reorder_provenance"] = "imported from " + spec.reorder.path +
                                         "; equivalence to any external partitioner is not checked";
      }
      break;
    }
  }
  sys.matrix = spec.reorder.kind == ReorderSpec::Kind::None ? std::move(base) : apply_permutation(base, sys.permutation);

  Rng rng(seed ^ 0x5851f42d4c957f2dULL);
  sys.x.resize(sys.matrix.num_cols);
  for (auto& v : sys.x) v = rng.uniform01() * 2.0 - 1.0;
  return sys;
}

struct RunOutputs {
  ExperimentRecord record;
  std::string json;
  std::string csv_row;
  std::string occupancy_csv;
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run every trial of `spec` in memory. Nothing is written.
inline RunOutputs execute(const RunSpec& spec) {
  spec.validate();
  ExperimentRecord rec;
  rec.matrix = spec.matrix_name();
  rec.reorder = spec.reorder.canonical();
  rec.layout_x = to_string(spec.x_layout);
  rec.layout_b = to_string(spec.b_layout);
  rec.distribution = to_string(spec.distribution);
  rec.clock_hz = spec.clock_hz;
  nlohmann::json notes = nlohmann::json::object();
  notes["cv_convention"] = "population standard deviation / mean over per-nodelet memory instructions";

  std::vector<MetricsReport> reports;
  std::vector<std::uint64_t> seeds;
  CsrMatrix first_matrix;
  double sim_seconds = 0.0;
  std::ofstream events;
  if (spec.event_log) {
    events.open(*spec.event_log);
    if (!events) throw std::runtime_error("cannot open event log " + spec.event_log->string());
  }

  for (Index i = 0; i < spec.trials; ++i) {
    const std::uint64_t seed = spec.base_seed + i;
    PreparedSystem sys = prepare_system(spec, seed, i == 0 ? &notes : nullptr);
    SimConfig cfg = spec.config;
    cfg.seed = seed;
    const WorkAssignment a = distribute(sys.matrix, spec.distribution, cfg.nodelets, cfg.threads_per_nodelet);
    const DistributedPlan plan =
        build_distributed_plan(sys.matrix, a, VectorLayout(spec.x_layout, sys.matrix.num_cols, cfg.nodelets),
                               VectorLayout(spec.b_layout, sys.matrix.num_rows, cfg.nodelets));
    const auto t0 = std::chrono::steady_clock::now();
    MetricsReport r = simulate(plan, sys.x, cfg, spec.event_log && i == 0 ? &events : nullptr);
    sim_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.b != spmv_reference(sys.matrix, sys.x)) {
      throw IntegrityError("simulated result differs from the reference product on trial " + std::to_string(i));
    }
    if (i == 0) {
      rec.config = cfg;
      first_matrix = std::move(sys.matrix);
    }
    reports.push_back(std::move(r));
    seeds.push_back(seed);
  }

  rec.num_rows = first_matrix.num_rows;
  rec.num_cols = first_matrix.num_cols;
  rec.nnz = first_matrix.nnz();
  rec.summary = summarize(reports, seeds, first_matrix, spec.clock_hz);
  if (!reports.empty() && reports.front().cycles > 0) {
    notes["bandwidth_formula"] = bandwidth_estimate(reports.front(), first_matrix, spec.clock_hz).formula;
  }
  rec.report = std::move(reports.front());
  notes["timestamp"] = utc_timestamp();
  notes["simulation_wall_seconds"] = sim_seconds;
  rec.metadata = std::move(notes);

  RunOutputs out;
  out.json = record_to_json(rec);
  out.csv_row = aggregate_csv_row(rec);
  out.occupancy_csv = occupancy_csv(rec.report);
  out.record = std::move(rec);
  return out;
}

/// Writes a set of files, removing every one of them if any write fails.
class OutputBatch {
 public:
  explicit OutputBatch(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  std::vector<std::filesystem::path> commit() {
    std::filesystem::create_directories(dir_);
    std::vector<std::filesystem::path> written;
    try {
      for (const auto& [name, content] : files_) {
        const auto path = dir_ / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        written.push_back(path);
        f << content;
        f.close();
        if (!f) throw std::runtime_error("failed writing " + path.string());
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) std::filesystem::remove(p, ec);
      throw;
    }
    return written;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Run one spec and write <tag>.json, <tag>.occupancy.csv and results.csv.
inline RunOutputs run(const RunSpec& spec) {
  RunOutputs out;
  try {
    out = execute(spec);
  } catch (...) {
    if (spec.event_log) {
      std::error_code ec;
      std::filesystem::remove(*spec.event_log, ec);
    }
    throw;
  }
  OutputBatch batch(spec.out_dir);
  batch.add(spec.tag() + ".json", out.json);
  batch.add(spec.tag() + ".occupancy.csv", out.occupancy_csv);
  batch.add("results.csv", aggregate_csv_header() + out.csv_row);
  batch.commit();
  return out;
}

struct SweepAxes {
  std::vector<ReorderSpec> reorders{ReorderSpec{}};
  std::vector<LayoutKind> x_layouts{LayoutKind::Cyclic};
  std::vector<LayoutKind> b_layouts{LayoutKind::Cyclic};
  std::vector<Distribution> distributions{Distribution::Row};
};

/// Cross product of the axes over `base`, sorted by tag, duplicates removed.
inline std::vector<RunSpec> expand_sweep(const RunSpec& base, const SweepAxes& axes) {
  std::vector<RunSpec> specs;
  for (const auto& r : axes.reorders) {
    for (auto xl : axes.x_layouts) {
      for (auto bl : axes.b_layouts) {
        for (auto d : axes.distributions) {
          RunSpec s = base;
          s.reorder = r;
          s.x_layout = xl;
          s.b_layout = bl;
          s.distribution = d;
          s.event_log.reset();
          specs.push_back(std::move(s));
        }
      }
    }
  }
  std::stable_sort(specs.begin(), specs.end(), [](const RunSpec& a, const RunSpec& b) { return a.tag() < b.tag(); });
  specs.erase(std::unique(specs.begin(), specs.end(), [](const RunSpec& a, const RunSpec& b) { return a.tag() == b.tag(); }),
              specs.end());
  return specs;
}

/// Run each spec (up to `jobs` at once) and write one results.csv plus the
/// per-spec files. Nothing is written unless every spec succeeds.
inline std::vector<RunOutputs> sweep(const std::vector<RunSpec>& specs, const std::filesystem::path& out_dir,
                                     unsigned jobs = 1) {
  std::vector<std::optional<RunOutputs>> results(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  jobs = std::max(1u, jobs);
  for (std::size_t start = 0; start < specs.size(); start += jobs) {
    const std::size_t stop = std::min(specs.size(), start + jobs);
    std::vector<std::future<void>> running;
    for (std::size_t i = start; i < stop; ++i) {
      running.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, [&, i] {
        try {
          results[i] = execute(specs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }));
    }
    for (auto& f : running) f.get();
    for (std::size_t i = start; i < stop; ++i) {
      if (!errors[i]) continue;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw std::runtime_error("sweep aborted at " + specs[i].tag() + ": " + e.what());
      }
    }
  }

  OutputBatch batch(out_dir);
  std::string csv = aggregate_csv_header();
  std::vector<RunOutputs> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    csv += results[i]->csv_row;
    batch.add(specs[i].tag() + ".json", results[i]->json);
    batch.add(specs[i].tag() + ".occupancy.csv", results[i]->occupancy_csv);
    out.push_back(std::move(*results[i]));
  }
  batch.add("results.csv", std::move(csv));
  batch.commit();
  return out;
}

}  // namespace emuspmv

#pragma once

// Cycle-stepped simulator of one node of migratory-thread nodelets running
// the distributed CSR SpMV.
//
// Every nodelet has one core issuing at most one instruction per cycle, a
// run queue of threads waiting for a thread context, a migration queue of
// outbound packets and a memory queue of remote updates waiting for the
// memory-side processor. A cycle runs these phases in a fixed order:
//
//   1. issue     admit run-queue threads up to the active cap, then issue one
//                instruction per nodelet, round-robin among eligible threads
//   2. transfer  deliver packets whose fabric latency has elapsed, then let
//                each nodelet's ME port accept outbound packets
//   3. memory    each memory-side processor retires one remote update
//   4. acks      deliver acknowledgements back to their threads
//   5. throttle  re-evaluate each nodelet's active-thread cap
//
// Worker threads follow the access sequence documented in trace.hpp, so the
// migration and memory-instruction counters match trace_migrations exactly.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emuspmv/partition.hpp"
#include "emuspmv/sim_config.hpp"
#include "emuspmv/stats.hpp"

namespace emuspmv {

using ThreadId = std::uint32_t;

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ThreadState { Running, Ready, InMigration, BlockedOnAck, Done };
enum class ThreadKind { Main, Parent, Worker };

inline std::string_view to_string(ThreadState s) {
  switch (s) {
    case ThreadState::Running: return "running";
    case ThreadState::Ready: return "ready";
    case ThreadState::InMigration: return "in_migration";
    case ThreadState::BlockedOnAck: return "blocked_on_ack";
    case ThreadState::Done: return "done";
  }
  return "?";
}

struct ThreadContext {
  enum class Pc { Prologue, BoundCheck, ColIndex, Value, XRead, BWrite, Spawn, Finished };

  ThreadId id = 0;
  ThreadKind kind = ThreadKind::Worker;
  Nodelet home = 0;
  Nodelet current = 0;
  ThreadState state = ThreadState::Ready;
  Pc pc = Pc::Finished;

  RowRange rows;
  Index row = 0;  // absolute row being processed
  Index pos = 0;  // shard-relative non-zero position
  double acc = 0.0;

  Index pending_acks = 0;
  Cycle busy_until = 0;
  bool arrived = false;  // next access is the one it migrated for

  Index spawned = 0;  // main/parent: children created so far
};

struct NodeletCounters {
  Index mem_instructions = 0;
  Index migrations_in = 0;
  Index migrations_out = 0;
  Index remote_updates_serviced = 0;
  Index remote_x_reads = 0;
  Index instructions_issued = 0;
  Index peak_migration_queue = 0;
  Index peak_memory_queue = 0;

  friend bool operator==(const NodeletCounters&, const NodeletCounters&) = default;
};

struct OccupancySample {
  Cycle cycle = 0;
  std::vector<Index> resident;         // running + run queue, per nodelet
  std::vector<Index> migration_queue;  // packets waiting to depart
  std::vector<Index> memory_queue;
  std::vector<Index> active_cap;

  friend bool operator==(const OccupancySample&, const OccupancySample&) = default;
};

struct MetricsReport {
  Cycle cycles = 0;
  std::vector<NodeletCounters> nodelets;
  std::vector<OccupancySample> occupancy;
  double mem_instr_cv = 0.0;
  Index migrations_total = 0;
  Index threads_spawned = 0;
  Index packets_enqueued = 0;
  Index packets_delivered = 0;
  DenseVector b;

  std::vector<Index> per_nodelet(Index NodeletCounters::*field) const {
    std::vector<Index> v;
    v.reserve(nodelets.size());
    for (const auto& n : nodelets) v.push_back(n.*field);
    return v;
  }

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

class Machine {
 public:
  Machine(const DistributedPlan& plan, std::span<const double> x, const SimConfig& cfg)
      : plan_(plan), x_(x.begin(), x.end()), cfg_(cfg) {
    cfg_.validate();
    if (plan.nodelets() != cfg.nodelets) {
      throw ConfigError("plan has " + std::to_string(plan.nodelets()) + " nodelets, config " +
                        std::to_string(cfg.nodelets));
    }
    if (plan.assignment.threads_per_nodelet != cfg.threads_per_nodelet) {
      throw ConfigError("plan and config disagree on threads per nodelet");
    }
    if (x.size() != plan.num_cols) throw DimensionError("x length does not match the matrix column count");

    nodes_.resize(cfg.nodelets);
    for (Nodelet n = 0; n < cfg.nodelets; ++n) {
      nodes_[n].cap = cfg.threads_per_nodelet;
      // seed staggers where each nodelet's round-robin scan starts
      nodes_[n].rr = splitmix(cfg.seed + n) % cfg.threads_per_nodelet;
    }
    b_.assign(plan.num_rows, 0.0);
  }

  /// Spawn the main thread on nodelet 0; it spawns one parent per nodelet,
  /// and each parent spawns that nodelet's workers.
  void launch() {
    ThreadContext& t = new_thread(ThreadKind::Main, 0);
    t.pc = ThreadContext::Pc::Spawn;
    nodes_[0].run_queue.push_back(t.id);
  }

  /// Place a worker for `rows` directly in the run queue of `home`.
  ThreadId add_worker(Nodelet home, RowRange rows) {
    if (home >= cfg_.nodelets) throw std::out_of_range("no such nodelet");
    const RowRange owned = plan_.assignment.nodelet_rows(home);
    if (rows.first < owned.first || rows.last > owned.last || rows.first > rows.last) {
      throw std::out_of_range("worker rows must lie within the home nodelet's shard");
    }
    ThreadContext& t = new_thread(ThreadKind::Worker, home);
    init_worker(t, rows);
    nodes_[home].run_queue.push_back(t.id);
    return t.id;
  }

  void set_event_log(std::ostream* out) { events_ = out; }

  Cycle cycle() const { return now_; }
  const SimConfig& config() const { return cfg_; }
  const ThreadContext& thread(ThreadId id) const { return threads_.at(id); }
  std::size_t thread_count() const { return threads_.size(); }
  const NodeletCounters& counters(Nodelet n) const { return nodes_.at(n).counters; }
  Index active_cap(Nodelet n) const { return nodes_.at(n).cap; }
  Index migration_queue_size(Nodelet n) const { return nodes_.at(n).migration_queue.size(); }
  Index memory_queue_size(Nodelet n) const { return nodes_.at(n).memory_queue.size(); }
  Index packets_enqueued() const { return packets_enqueued_; }
  Index packets_delivered() const { return packets_delivered_; }
  const DenseVector& b() const { return b_; }

  bool finished() const {
    if (live_threads_ != 0 || !in_flight_.empty() || !acks_in_flight_.empty()) return false;
    for (const auto& n : nodes_) {
      if (!n.migration_queue.empty() || !n.memory_queue.empty() || !n.ack_outbox.empty()) return false;
    }
    return true;
  }

  /// Advance exactly one cycle.
  void step() {
    for (Nodelet n = 0; n < cfg_.nodelets; ++n) issue_phase(n);
    transfer_phase();
    for (Nodelet n = 0; n < cfg_.nodelets; ++n) memory_phase(n);
    ack_phase();
    for (Nodelet n = 0; n < cfg_.nodelets; ++n) throttle_phase(n);
    ++now_;
  }

  /// Threads holding a context or waiting in the run queue, per nodelet.
  /// Threads in a migration queue or in the fabric belong to no nodelet.
  std::vector<Index> sample_occupancy() const {
    std::vector<Index> v(cfg_.nodelets);
    for (Nodelet n = 0; n < cfg_.nodelets; ++n) v[n] = resident(n);
    return v;
  }

  OccupancySample snapshot() const {
    OccupancySample s;
    s.cycle = now_;
    s.resident = sample_occupancy();
    for (const auto& n : nodes_) {
      s.migration_queue.push_back(n.migration_queue.size());
      s.memory_queue.push_back(n.memory_queue.size());
      s.active_cap.push_back(n.cap);
    }
    return s;
  }

  /// Throws SimulationError if a structural invariant is broken: thread
  /// conservation, queue capacities, cap bounds, ack barrier.
  void audit() const {
    std::size_t by_state[5] = {0, 0, 0, 0, 0};
    for (const auto& t : threads_) ++by_state[static_cast<int>(t.state)];
    std::size_t placed = 0;
    for (const auto& n : nodes_) {
      placed += n.active.size() + n.run_queue.size();
      if (n.migration_queue.size() > cfg_.migration_queue_capacity) fail("migration queue over capacity");
      if (n.memory_queue.size() + n.memory_reserved > cfg_.memory_queue_capacity) fail("memory queue over capacity");
      if (n.cap < 1 || n.cap > cfg_.threads_per_nodelet) fail("active cap out of range");
    }
    const std::size_t total = by_state[0] + by_state[1] + by_state[2] + by_state[3] + by_state[4];
    if (total != threads_.size()) fail("thread conservation violated");
    if (placed != by_state[0] + by_state[1] + by_state[3]) fail("resident threads do not match thread states");
    for (const auto& t : threads_) {
      if (t.state == ThreadState::InMigration && t.pending_acks > 0 && t.kind == ThreadKind::Worker) {
        fail("thread migrating with outstanding acknowledgements");
      }
    }
  }

  MetricsReport run() {
    const Cycle budget = cfg_.max_cycles ? cfg_.max_cycles : default_budget();
    MetricsReport r;
    r.occupancy.push_back(snapshot());
    while (!finished()) {
      if (now_ >= budget) fail("cycle budget of " + std::to_string(budget) + " exceeded");
      step();
      if (now_ % cfg_.occupancy_sample_interval == 0) r.occupancy.push_back(snapshot());
    }
    if (r.occupancy.back().cycle != now_) r.occupancy.push_back(snapshot());
    if (packets_enqueued_ != packets_delivered_) fail("packets lost in transit");

    r.cycles = now_;
    std::vector<double> mem;
    for (const auto& n : nodes_) {
      r.nodelets.push_back(n.counters);
      r.migrations_total += n.counters.migrations_in;
      mem.push_back(static_cast<double>(n.counters.mem_instructions));
    }
    double total_mem = 0;
    for (double m : mem) total_mem += m;
    r.mem_instr_cv = total_mem > 0 ? coefficient_of_variation(mem) : 0.0;
    r.threads_spawned = threads_.size();
    r.packets_enqueued = packets_enqueued_;
    r.packets_delivered = packets_delivered_;
    r.b = b_;
    return r;
  }

  std::string dump_state() const {
    std::ostringstream os;
    os << "cycle " << now_ << ", live threads " << live_threads_ << ", in flight " << in_flight_.size()
       << ", acks in flight " << acks_in_flight_.size() << '\n';
    for (Nodelet n = 0; n < cfg_.nodelets; ++n) {
      const auto& nd = nodes_[n];
      os << "  nodelet " << n << ": active " << nd.active.size() << ", run queue " << nd.run_queue.size()
         << ", migration queue " << nd.migration_queue.size() << ", memory queue " << nd.memory_queue.size()
         << " (+" << nd.memory_reserved << " reserved), cap " << nd.cap << ", visitors " << nd.visitors << " (+" << nd.inbound << " inbound)\n";
    }
    return os.str();
  }

 private:
  struct Packet {
    enum class Kind { Context, RemoteUpdate, Ack };
    Kind kind = Kind::Context;
    Nodelet src = 0;
    Nodelet dst = 0;
    ThreadId thread = 0;
    bool spawn = false;
    Index b_row = 0;
    double value = 0.0;
  };

  struct InFlight {
    Cycle arrival;
    std::uint64_t seq;
    Packet packet;
    bool operator>(const InFlight& o) const { return arrival != o.arrival ? arrival > o.arrival : seq > o.seq; }
  };
  using FlightQueue = std::priority_queue<InFlight, std::vector<InFlight>, std::greater<>>;

  struct NodeletState {
    std::vector<ThreadId> active;  // threads holding a context
    std::deque<ThreadId> run_queue;
    std::deque<Packet> migration_queue;
    std::deque<Packet> memory_queue;
    std::deque<Packet> ack_outbox;
    Index memory_reserved = 0;  // remote updates accepted by the ME, not yet delivered
    Index visitors = 0;         // resident threads whose home is elsewhere
    Index inbound = 0;          // visitor contexts headed here (queued or in the fabric)
    Index cap = 1;
    std::size_t rr = 0;
    Cycle port_free_at = 0;
    NodeletCounters counters;
  };

  enum class AccessKind { Local, Migrate, RemoteUpdate, LocalSpawn, RemoteSpawn };

  static std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw SimulationError(what + "\n" + dump_state());
  }

  Cycle default_budget() const {
    const Cycle work = plan_.nnz() * 4 + plan_.num_rows * 2 + threads_.size() + cfg_.nodelets * cfg_.threads_per_nodelet;
    const Cycle per_access = cfg_.me_context_cycles + cfg_.me_delivery_latency + cfg_.migrated_access_cycles() + 8;
    return 100000 + work * per_access * 4;
  }

  ThreadContext& new_thread(ThreadKind kind, Nodelet where) {
    ThreadContext t;
    t.id = static_cast<ThreadId>(threads_.size());
    t.kind = kind;
    t.home = where;
    t.current = where;
    t.state = ThreadState::Ready;
    threads_.push_back(t);
    ++live_threads_;
    return threads_.back();
  }

  void init_worker(ThreadContext& t, RowRange rows) {
    t.rows = rows;
    t.row = rows.first;
    t.pc = rows.empty() ? ThreadContext::Pc::Finished : ThreadContext::Pc::Prologue;
  }

  Index resident(Nodelet n) const { return nodes_[n].active.size() + nodes_[n].run_queue.size(); }

  bool throttled(Nodelet n) const { return nodes_[n].cap < cfg_.threads_per_nodelet; }

  // Returning home is never refused. A visitor's next move is always back
  // home, so visitors drain and a refused thread cannot wait forever.
  bool admits(const ThreadContext& t, Nodelet dst) const {
    if (dst == t.home || !cfg_.throttle_admission) return true;
    return nodes_[dst].visitors + nodes_[dst].inbound < nodes_[dst].cap;
  }

  const CsrShard& shard_of(const ThreadContext& t) const { return plan_.shards[t.home]; }

  // Where the thread's next instruction executes.
  Nodelet target_of(const ThreadContext& t) const {
    using Pc = ThreadContext::Pc;
    switch (t.pc) {
      case Pc::XRead: return plan_.x_layout.owner(shard_of(t).col_index[t.pos]);
      case Pc::BWrite: return plan_.b_layout.owner(t.row);
      case Pc::Spawn: return t.kind == ThreadKind::Main ? static_cast<Nodelet>(t.spawned) : t.current;
      default: return t.home;
    }
  }

  AccessKind classify(const ThreadContext& t, Nodelet target) const {
    using Pc = ThreadContext::Pc;
    if (t.pc == Pc::Spawn) return target == t.current ? AccessKind::LocalSpawn : AccessKind::RemoteSpawn;
    if (target == t.current) return AccessKind::Local;
    return t.pc == Pc::BWrite ? AccessKind::RemoteUpdate : AccessKind::Migrate;
  }

  void log(Nodelet n, std::string_view kind, ThreadId id) {
    if (events_) *events_ << now_ << ' ' << n << ' ' << kind << ' ' << id << '\n';
  }

  void enqueue(Nodelet n, const Packet& p) {
    auto& q = nodes_[n].migration_queue;
    if (q.size() >= cfg_.migration_queue_capacity) fail("enqueue into a full migration queue");
    q.push_back(p);
    ++packets_enqueued_;
    auto& c = nodes_[n].counters;
    c.peak_migration_queue = std::max<Index>(c.peak_migration_queue, q.size());
  }

  // Whether `t` may issue this cycle; updates blocked-on-ack state as a side effect.
  bool eligible(ThreadContext& t, Nodelet n) {
    if (t.state != ThreadState::Running || t.busy_until > now_) return false;
    if (t.pc == ThreadContext::Pc::Finished) return false;
    const Nodelet target = target_of(t);
    switch (classify(t, target)) {
      case AccessKind::Local:
      case AccessKind::LocalSpawn:
        return true;
      case AccessKind::RemoteUpdate:
      case AccessKind::RemoteSpawn:
        return nodes_[n].migration_queue.size() < cfg_.migration_queue_capacity;
      case AccessKind::Migrate:
        if (t.pending_acks > 0) {
          t.state = ThreadState::BlockedOnAck;
          return false;
        }
        return nodes_[n].migration_queue.size() < cfg_.migration_queue_capacity && admits(t, target);
    }
    return false;
  }

  void retire_if_finished(ThreadContext& t, Nodelet n) {
    if (t.pc != ThreadContext::Pc::Finished) return;
    if (t.pending_acks > 0) {
      t.state = ThreadState::BlockedOnAck;
      return;
    }
    auto& active = nodes_[n].active;
    auto it = std::find(active.begin(), active.end(), t.id);
    if (it != active.end()) {
      const std::size_t pos = static_cast<std::size_t>(it - active.begin());
      active.erase(it);
      if (nodes_[n].rr > pos) --nodes_[n].rr;
    }
    if (n != t.home) --nodes_[n].visitors;
    t.state = ThreadState::Done;
    --live_threads_;
    log(n, "done", t.id);
  }

  void leave_active(Nodelet n, ThreadId id) {
    auto& active = nodes_[n].active;
    auto it = std::find(active.begin(), active.end(), id);
    const std::size_t pos = static_cast<std::size_t>(it - active.begin());
    active.erase(it);
    if (nodes_[n].rr > pos) --nodes_[n].rr;
  }

  void issue_phase(Nodelet n) {
    NodeletState& node = nodes_[n];
    while (node.active.size() < node.cap && !node.run_queue.empty()) {
      const ThreadId id = node.run_queue.front();
      node.run_queue.pop_front();
      ThreadContext& t = threads_[id];
      t.state = ThreadState::Running;
      node.active.push_back(id);
      if (t.pc == ThreadContext::Pc::Finished) retire_if_finished(t, n);
    }
    const std::size_t count = node.active.size();
    if (count == 0) return;
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = (node.rr + k) % count;
      ThreadContext& t = threads_[node.active[idx]];
      if (!eligible(t, n)) continue;
      node.rr = idx + 1;
      issue(t, n);
      if (node.rr > node.active.size()) node.rr = 0;
      return;
    }
  }

  void issue(ThreadContext& t, Nodelet n) {
    using Pc = ThreadContext::Pc;
    NodeletState& node = nodes_[n];
    ++node.counters.instructions_issued;
    const Nodelet target = target_of(t);

    switch (classify(t, target)) {
      case AccessKind::LocalSpawn:
      case AccessKind::RemoteSpawn: {
        spawn_child(t, n, target);
        t.busy_until = now_ + cfg_.local_access_cycles;
        retire_if_finished(t, n);
        return;
      }
      case AccessKind::Migrate: {
        if (t.pending_acks > 0) throw std::logic_error("ack barrier: migration with outstanding acknowledgements");
        leave_active(n, t.id);
        if (n != t.home) --node.visitors;
        t.state = ThreadState::InMigration;
        ++node.counters.migrations_out;
        if (target != t.home) ++nodes_[target].inbound;
        enqueue(n, Packet{Packet::Kind::Context, n, target, t.id, false, 0, 0.0});
        log(n, "migrate", t.id);
        return;
      }
      case AccessKind::RemoteUpdate: {
        ++t.pending_acks;
        enqueue(n, Packet{Packet::Kind::RemoteUpdate, n, target, t.id, false, t.row, t.acc});
        log(n, "remote_update", t.id);
        t.busy_until = now_ + cfg_.local_access_cycles;
        finish_row(t);
        retire_if_finished(t, n);
        return;
      }
      case AccessKind::Local:
        break;
    }

    ++node.counters.mem_instructions;
    t.busy_until = now_ + (t.arrived ? cfg_.migrated_access_cycles() : cfg_.local_access_cycles);
    t.arrived = false;
    const CsrShard& shard = shard_of(t);
    switch (t.pc) {
      case Pc::Prologue:
        t.pos = shard.row_ptr[t.row - shard.first_row];
        t.acc = 0.0;
        t.pc = Pc::BoundCheck;
        break;
      case Pc::BoundCheck:
        t.pc = t.pos < shard.row_ptr[t.row - shard.first_row + 1] ? Pc::ColIndex : Pc::BWrite;
        break;
      case Pc::ColIndex:
        t.pc = Pc::Value;
        break;
      case Pc::Value:
        t.pc = Pc::XRead;
        break;
      case Pc::XRead:
        if (n != t.home) ++node.counters.remote_x_reads;
        t.acc += shard.values[t.pos] * x_[shard.col_index[t.pos]];
        ++t.pos;
        t.pc = Pc::BoundCheck;
        break;
      case Pc::BWrite:
        b_[t.row] = t.acc;
        finish_row(t);
        break;
      default:
        fail("issued an instruction from an invalid program counter");
    }
    retire_if_finished(t, n);
  }

  void finish_row(ThreadContext& t) {
    ++t.row;
    t.acc = 0.0;
    t.pc = t.row < t.rows.last ? ThreadContext::Pc::BoundCheck : ThreadContext::Pc::Finished;
  }

  void spawn_child(ThreadContext& parent, Nodelet n, Nodelet target) {
    ThreadKind kind = parent.kind == ThreadKind::Main ? ThreadKind::Parent : ThreadKind::Worker;
    const Index index = parent.spawned++;
    const Index limit = parent.kind == ThreadKind::Main ? cfg_.nodelets : cfg_.threads_per_nodelet;
    if (parent.spawned >= limit) parent.pc = ThreadContext::Pc::Finished;

    ThreadContext& child = new_thread(kind, target);
    const ThreadId child_id = child.id;
    if (kind == ThreadKind::Parent) {
      child.pc = ThreadContext::Pc::Spawn;
    } else {
      init_worker(child, plan_.assignment.rows(target, index));
    }
    if (target == n) {
      nodes_[n].run_queue.push_back(child_id);
      log(n, "spawn", child_id);
    } else {
      threads_[child_id].state = ThreadState::InMigration;
      enqueue(n, Packet{Packet::Kind::Context, n, target, child_id, true, 0, 0.0});
      log(n, "spawn_remote", child_id);
    }
  }

  void deliver(const Packet& p) {
    ++packets_delivered_;
    NodeletState& dst = nodes_[p.dst];
    switch (p.kind) {
      case Packet::Kind::Context: {
        ThreadContext& t = threads_[p.thread];
        t.current = p.dst;
        t.state = ThreadState::Ready;
        t.arrived = !p.spawn;
        if (p.dst != t.home) {
          --dst.inbound;
          ++dst.visitors;
        }
        if (!p.spawn) ++dst.counters.migrations_in;
        dst.run_queue.push_back(p.thread);
        log(p.dst, "arrive", p.thread);
        break;
      }
      case Packet::Kind::RemoteUpdate:
        --dst.memory_reserved;
        dst.memory_queue.push_back(p);
        dst.counters.peak_memory_queue = std::max<Index>(dst.counters.peak_memory_queue, dst.memory_queue.size());
        break;
      case Packet::Kind::Ack:
        break;
    }
  }

  void transfer_phase() {
    while (!in_flight_.empty() && in_flight_.top().arrival <= now_) {
      const Packet p = in_flight_.top().packet;
      in_flight_.pop();
      deliver(p);
    }
    for (Nodelet n = 0; n < cfg_.nodelets; ++n) {
      NodeletState& node = nodes_[n];
      for (Index accepted = 0; accepted < cfg_.me_accepts_per_cycle && node.port_free_at <= now_; ++accepted) {
        Packet p;
        if (!node.ack_outbox.empty()) {
          p = node.ack_outbox.front();
          node.ack_outbox.pop_front();
          acks_in_flight_.push({now_ + cfg_.remote_update_ack_latency, seq_++, p});
        } else {
          auto& q = node.migration_queue;
          auto it = std::find_if(q.begin(), q.end(), [&](const Packet& c) {
            return c.kind != Packet::Kind::RemoteUpdate ||
                   nodes_[c.dst].memory_queue.size() + nodes_[c.dst].memory_reserved < cfg_.memory_queue_capacity;
          });
          if (it == q.end()) break;
          p = *it;
          q.erase(it);
          if (p.kind == Packet::Kind::RemoteUpdate) ++nodes_[p.dst].memory_reserved;
          in_flight_.push({now_ + cfg_.me_delivery_latency, seq_++, p});
        }
        const Cycle cost = p.kind == Packet::Kind::Context ? cfg_.me_context_cycles : 1;
        if (cost > 1) {
          node.port_free_at = now_ + cost;
          break;
        }
      }
    }
  }

  void memory_phase(Nodelet n) {
    NodeletState& node = nodes_[n];
    if (node.memory_queue.empty()) return;
    const Packet p = node.memory_queue.front();
    node.memory_queue.pop_front();
    b_[p.b_row] = p.value;
    ++node.counters.mem_instructions;
    ++node.counters.remote_updates_serviced;
    Packet ack{Packet::Kind::Ack, n, p.src, p.thread, false, 0, 0.0};
    ++packets_enqueued_;
    if (cfg_.acks_use_me) {
      node.ack_outbox.push_back(ack);
    } else {
      acks_in_flight_.push({now_ + cfg_.remote_update_ack_latency, seq_++, ack});
    }
  }

  void ack_phase() {
    while (!acks_in_flight_.empty() && acks_in_flight_.top().arrival <= now_) {
      const Packet p = acks_in_flight_.top().packet;
      acks_in_flight_.pop();
      ++packets_delivered_;
      ThreadContext& t = threads_[p.thread];
      if (t.pending_acks == 0) fail("acknowledgement for a thread with none outstanding");
      --t.pending_acks;
      if (t.pending_acks == 0 && t.state == ThreadState::BlockedOnAck) {
        t.state = ThreadState::Running;
        retire_if_finished(t, t.current);
      }
    }
  }

  void throttle_phase(Nodelet n) {
    NodeletState& node = nodes_[n];
    const double fraction =
        static_cast<double>(node.migration_queue.size()) / static_cast<double>(cfg_.migration_queue_capacity);
    const Index cap = throttle_policy(fraction, node.cap, cfg_);
    if (cap != node.cap) {
      node.cap = cap;
      if (events_) *events_ << now_ << ' ' << n << " throttle " << cap << '\n';
    }
  }

  const DistributedPlan& plan_;
  std::vector<double> x_;
  SimConfig cfg_;
  std::vector<NodeletState> nodes_;
  std::deque<ThreadContext> threads_;  // deque: spawning never invalidates a live reference
  FlightQueue in_flight_;
  FlightQueue acks_in_flight_;
  DenseVector b_;
  Cycle now_ = 0;
  std::uint64_t seq_ = 0;
  Index live_threads_ = 0;
  Index packets_enqueued_ = 0;
  Index packets_delivered_ = 0;
  std::ostream* events_ = nullptr;
};

/// Run the full spawn tree and SpMV to completion.
inline MetricsReport simulate(const DistributedPlan& plan, std::span<const double> x, const SimConfig& cfg,
                              std::ostream* event_log = nullptr) {
  Machine m(plan, x, cfg);
  m.set_event_log(event_log);
  m.launch();
  return m.run();
}

}  // namespace emuspmv

#pragma once

// Analytic migration count for a distributed plan.
//
// Each worker thread starts on the nodelet that owns its rows (its home) and
// runs the CSR loop one memory access at a time, in program order:
//
//   row_ptr[first]                        once, before the first row
//   for each row r:
//     for each non-zero j of r:
//       row_ptr[r + 1]                    loop bound check (home)
//       col_index[j], values[j]           (home)
//       x[col_index[j]]                   (owner of that x element)
//     row_ptr[r + 1]                      bound check that exits the loop (home)
//     b[r] = sum                          local store or remote update
//
// A migration happens whenever an access other than the b store targets a
// nodelet different from the one the thread currently occupies; it is
// charged to the destination. The b store never migrates: it is a local
// write or a remote update executed at b's owner. Every access counts as one
// memory instruction on the nodelet where it executes.

#include <vector>

#include "emuspmv/partition.hpp"

namespace emuspmv {

struct MigrationTrace {
  std::vector<Index> migrations_in;       // per destination nodelet
  std::vector<Index> mem_instructions;    // per executing nodelet
  std::vector<Index> remote_x_reads;      // x reads executed away from the thread's home, per owner
  std::vector<Index> remote_updates;      // b stores executed as remote updates, per owner
  std::vector<Index> thread_nnz;          // non-zeros handled by each worker thread

  Index total_migrations() const {
    Index t = 0;
    for (Index m : migrations_in) t += m;
    return t;
  }
  Index total_mem_instructions() const {
    Index t = 0;
    for (Index m : mem_instructions) t += m;
    return t;
  }
};

inline MigrationTrace trace_migrations(const DistributedPlan& plan) {
  const Nodelet P = plan.nodelets();
  MigrationTrace out;
  out.migrations_in.assign(P, 0);
  out.mem_instructions.assign(P, 0);
  out.remote_x_reads.assign(P, 0);
  out.remote_updates.assign(P, 0);

  const WorkAssignment& a = plan.assignment;
  for (Nodelet home = 0; home < P; ++home) {
    const CsrShard& shard = plan.shards[home];
    for (Index t = 0; t < a.threads_per_nodelet; ++t) {
      const RowRange rows = a.rows(home, t);
      Index handled = 0;
      if (rows.empty()) {
        out.thread_nnz.push_back(0);
        continue;
      }
      Nodelet at = home;
      auto touch = [&](Nodelet where) {
        if (where != at) {
          ++out.migrations_in[where];
          at = where;
        }
        ++out.mem_instructions[where];
      };

      touch(home);  // row_ptr[first]
      for (Index r = rows.first; r < rows.last; ++r) {
        const Index local = r - shard.first_row;
        for (Index j = shard.row_ptr[local]; j < shard.row_ptr[local + 1]; ++j) {
          touch(home);  // bound check
          touch(home);  // col_index
          touch(home);  // values
          const Nodelet owner = plan.x_layout.owner(shard.col_index[j]);
          touch(owner);
          if (owner != home) ++out.remote_x_reads[owner];
          ++handled;
        }
        touch(home);  // exiting bound check
        const Nodelet b_owner = plan.b_layout.owner(r);
        ++out.mem_instructions[b_owner];
        if (b_owner != at) ++out.remote_updates[b_owner];
      }
      out.thread_nnz.push_back(handled);
    }
  }
  return out;
}

}  // namespace emuspmv

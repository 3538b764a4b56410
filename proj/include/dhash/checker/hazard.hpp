#ifndef DHASH_CHECKER_HAZARD_HPP
#define DHASH_CHECKER_HAZARD_HPP

/// \file
/// Exhaustive interleavings of one operation with the rebuild steps that
/// move a single node (the node's hazard period).
///
/// The rebuilder is parked right before it publishes the target node in
/// rebuild_cur; the operation thread is parked at its first stage. From
/// there the rebuilder has four steps (publish, unlink from old, link into
/// new, clear) and the operation has one step per stage. Every merge of the
/// two step sequences is executed, and the outcome plus the final table
/// contents are checked against what the operation must return.
///
/// Needs DHASH_SCHEDULE_POINTS.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dhash/dhash.hpp"

namespace dhash::checker {

enum class HazardOp : std::uint8_t {
  kLookup,          // lookup of the moving key: must be Found
  kDelete,          // delete of the moving key: Success, key gone afterwards
  kInsertPresent,   // insert of the moving key: Exists, one copy afterwards
  kInsertFresh,     // insert of another key in the same bucket: Success
  kDoubleDelete,    // delete, then a second delete on another thread afterwards
};

inline const char* to_string(HazardOp op) {
  switch (op) {
    case HazardOp::kLookup: return "lookup";
    case HazardOp::kDelete: return "delete";
    case HazardOp::kInsertPresent: return "insert-present";
    case HazardOp::kInsertFresh: return "insert-fresh";
    case HazardOp::kDoubleDelete: return "double-delete";
  }
  return "?";
}

struct HazardCase {
  std::vector<bool> schedule;  // true = rebuilder step, false = operation step
  bool passed = false;
  std::string detail;
};

struct HazardReport {
  HazardOp op = HazardOp::kLookup;
  std::vector<HazardCase> cases;

  [[nodiscard]] std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(cases.begin(), cases.end(), [](const HazardCase& c) { return !c.passed; }));
  }
};

/// Every sequence with `a` true entries and `b` false entries.
inline std::vector<std::vector<bool>> interleavings(int a, int b) {
  std::vector<bool> v(static_cast<std::size_t>(a + b), false);
  std::fill(v.begin(), v.begin() + a, true);
  std::sort(v.begin(), v.end());
  std::vector<std::vector<bool>> out;
  do out.push_back(v);
  while (std::next_permutation(v.begin(), v.end()));
  return out;
}

#ifdef DHASH_SCHEDULE_POINTS

namespace hazard_detail {

inline bool is_rebuild_point(SchedulePoint p) {
  switch (p) {
    case SchedulePoint::kRebuildBeforeWriteCur:
    case SchedulePoint::kRebuildAfterWriteCur:
    case SchedulePoint::kRebuildAfterOldDelete:
    case SchedulePoint::kRebuildAfterNewInsert:
    case SchedulePoint::kRebuildAfterClearCur: return true;
    default: return false;
  }
}

inline bool is_op_point(SchedulePoint p) {
  switch (p) {
    case SchedulePoint::kLookupBeforeOldFind:
    case SchedulePoint::kLookupBeforeCurCheck:
    case SchedulePoint::kLookupBeforeNewFind:
    case SchedulePoint::kDeleteBeforeOldDelete:
    case SchedulePoint::kDeleteBeforeCurCheck:
    case SchedulePoint::kDeleteBeforeNewDelete:
    case SchedulePoint::kInsertBegin:
    case SchedulePoint::kInsertBeforeLink: return true;
    default: return false;
  }
}

// One gated thread: it stops at each of its points until granted a step.
struct Gate {
  std::atomic<std::thread::id> owner{};
  std::atomic<int> arrivals{0};
  std::atomic<int> grants{0};
  std::atomic<bool> finished{false};
  std::atomic<bool> open{false};  // stop gating entirely

  void arrive() {
    const int n = arrivals.fetch_add(1, std::memory_order_acq_rel) + 1;
    while (grants.load(std::memory_order_acquire) < n && !open.load(std::memory_order_acquire))
      std::this_thread::yield();
  }
};

class Controller final : public ScheduleHook {
 public:
  explicit Controller(Key target) : target_(target) {}

  void at(SchedulePoint p, Key key) override {
    const auto self = std::this_thread::get_id();
    if (self == rebuild_.owner.load() && is_rebuild_point(p) && key == target_) {
      rebuild_.arrive();
    } else if (self == op_.owner.load() && is_op_point(p)) {
      op_.arrive();
    }
  }

  Gate rebuild_;
  Gate op_;

 private:
  Key target_;
};

// Waits until the gate's thread stops at a new point or finishes.
inline bool await(Gate& g, int granted, std::chrono::steady_clock::time_point until) {
  while (g.arrivals.load(std::memory_order_acquire) <= granted &&
         !g.finished.load(std::memory_order_acquire)) {
    if (std::chrono::steady_clock::now() > until) return false;
    std::this_thread::yield();
  }
  return true;
}

}  // namespace hazard_detail

/// Runs every interleaving for `op`. Each case uses a fresh table with keys
/// {target-2, target, target+2} in one bucket.
inline HazardReport explore_hazard_window(HazardOp op) {
  using namespace hazard_detail;
  using namespace std::chrono;
  constexpr Key kTarget = 10;
  constexpr Key kFresh = 12 + 2;  // same parity as kTarget, absent initially
  constexpr int kRebuildSteps = 4;
  const int op_steps = op == HazardOp::kInsertPresent || op == HazardOp::kInsertFresh ? 2 : 3;

  HazardReport report;
  report.op = op;
  for (const auto& schedule : interleavings(kRebuildSteps, op_steps)) {
    HazardCase hc;
    hc.schedule = schedule;
    std::ostringstream why;
    {
      DHash<std::uint64_t> table(2, hashes::identity());
      for (Key k : {kTarget - 2, kTarget, kTarget + 2}) table.insert(k, k);

      Controller ctl(kTarget);
      set_schedule_hook(&ctl);
      const auto until = steady_clock::now() + seconds(10);

      std::thread rebuilder([&] {
        ctl.rebuild_.owner.store(std::this_thread::get_id());
        table.rebuild(3, hashes::multiplicative(hashes::kAltMultiplier));
        ctl.rebuild_.finished.store(true, std::memory_order_release);
      });
      bool ok = await(ctl.rebuild_, 0, until);  // parked before publishing the target

      std::optional<bool> result;
      std::thread worker([&] {
        ctl.op_.owner.store(std::this_thread::get_id());
        switch (op) {
          case HazardOp::kLookup: result = table.lookup(kTarget) == LookupResult::kFound; break;
          case HazardOp::kDelete:
          case HazardOp::kDoubleDelete:
            result = table.remove(kTarget) == DeleteResult::kSuccess;
            break;
          case HazardOp::kInsertPresent:
            result = table.insert(kTarget, 0) == InsertResult::kExists;
            break;
          case HazardOp::kInsertFresh:
            result = table.insert(kFresh, kFresh) == InsertResult::kSuccess;
            break;
        }
        ctl.op_.finished.store(true, std::memory_order_release);
      });
      ok = ok && await(ctl.op_, 0, until);

      int rb_granted = 0, op_granted = 0;
      for (bool rebuild_step : schedule) {
        if (!ok) break;
        Gate& g = rebuild_step ? ctl.rebuild_ : ctl.op_;
        int& granted = rebuild_step ? rb_granted : op_granted;
        if (g.finished.load(std::memory_order_acquire)) continue;
        ++granted;
        g.grants.store(granted, std::memory_order_release);
        // After its last step the rebuilder parks at the post-clear point,
        // still before its final grace period.
        ok = await(g, granted, until);
      }
      ctl.rebuild_.open = true;
      ctl.op_.open = true;
      worker.join();
      rebuilder.join();
      set_schedule_hook(nullptr);
      if (!ok) why << "schedule stalled; ";

      if (!result.value_or(false)) why << "operation returned the wrong result; ";
      if (op == HazardOp::kDoubleDelete && table.remove(kTarget) != DeleteResult::kNotFound)
        why << "second delete succeeded; ";

      const auto keys = table.census_quiescent();
      std::vector<Key> want{kTarget - 2, kTarget, kTarget + 2};
      if (op == HazardOp::kDelete || op == HazardOp::kDoubleDelete) want = {kTarget - 2, kTarget + 2};
      if (op == HazardOp::kInsertFresh) want = {kTarget - 2, kTarget, kTarget + 2, kFresh};
      if (keys != want) why << "final contents wrong; ";
      if (!table.placement_ok_quiescent()) why << "node in wrong bucket; ";
      if (table.bucket_count() != 3) why << "rebuild did not complete; ";
    }
    hc.detail = why.str();
    hc.passed = hc.detail.empty();
    report.cases.push_back(std::move(hc));
  }
  reclaim::drain();
  return report;
}

#endif  // DHASH_SCHEDULE_POINTS

}  // namespace dhash::checker

#endif  // DHASH_CHECKER_HAZARD_HPP

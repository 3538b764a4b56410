#ifndef DHASH_CONFORMANCE_HPP
#define DHASH_CONFORMANCE_HPP

/// \file
/// Contract checks for bucket-set implementations. Each clause runs on its
/// own fresh instances and is reported separately:
///
///   oracle-equivalence  random single-threaded ops agree with std::set
///   flag-semantics      set/clean flag, reclamation of kLogicallyRemoved
///                       nodes, surrender of kBeingDistributed nodes
///   snapshot-contract   find() positions at the lower bound, first() at min
///   suspension          a thread parked before a CAS does not stop others
///
/// The suspension clause needs DHASH_SCHEDULE_POINTS; without it the clause
/// is reported as skipped.

#include <algorithm>
#include <chrono>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dhash/bucket_set.hpp"
#include "dhash/ordered_set_list.hpp"
#include "dhash/reclaim.hpp"
#include "dhash/schedule_point.hpp"

namespace dhash {

struct ClauseResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

struct ConformanceReport {
  std::vector<ClauseResult> clauses;

  [[nodiscard]] bool passed() const {
    return std::all_of(clauses.begin(), clauses.end(),
                       [](const ClauseResult& c) { return c.passed || c.skipped; });
  }

  [[nodiscard]] const ClauseResult* clause(std::string_view name) const {
    for (const auto& c : clauses)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace conformance_detail {

template <class S>
typename S::node_type* make(Key k) {
  return new typename S::node_type(k, typename S::value_type{});
}

template <class S>
bool insert_key(S& s, Key k) {
  reclaim::ReadGuard g;
  auto* n = make<S>(k);
  if (s.insert(n) == InsertResult::kSuccess) return true;
  delete n;
  return false;
}

template <class S>
bool remove_key(S& s, Key k) {
  reclaim::ReadGuard g;
  return s.remove(k, kLogicallyRemoved).ok();
}

template <class S>
bool find_key(S& s, Key k) {
  reclaim::ReadGuard g;
  typename S::snapshot_type snap;
  return s.find(k, snap) == FindResult::kFound;
}

template <class S>
std::vector<Key> live_keys(const S& s) {
  std::vector<Key> out;
  s.for_each_linked([&](const typename S::node_type& n, std::uintptr_t marks) {
    if (marks == 0) out.push_back(n.key);
  });
  return out;
}

template <class S>
ClauseResult oracle_equivalence(std::uint64_t seed) {
  ClauseResult r{"oracle-equivalence", false, false, {}};
  S s;
  std::set<Key> oracle;
  std::mt19937_64 rng(seed);
  std::size_t mismatches = 0;
  constexpr int kOps = 100000;
  for (int i = 0; i < kOps; ++i) {
    const Key k = rng() % 512;
    switch (rng() % 3) {
      case 0: mismatches += find_key(s, k) != (oracle.count(k) == 1); break;
      case 1: mismatches += insert_key(s, k) != oracle.insert(k).second; break;
      default: mismatches += remove_key(s, k) != (oracle.erase(k) == 1); break;
    }
  }
  const bool contents = live_keys(s) == std::vector<Key>(oracle.begin(), oracle.end());
  r.passed = mismatches == 0 && contents;
  std::ostringstream d;
  d << kOps << " ops, " << mismatches << " mismatches, contents "
    << (contents ? "match" : "differ");
  r.detail = d.str();
  return r;
}

template <class S>
ClauseResult flag_semantics() {
  ClauseResult r{"flag-semantics", false, false, {}};
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failures.emplace_back(what);
  };

  {
    typename S::node_type n(1, typename S::value_type{});
    expect(set_flag(n, kLogicallyRemoved) == 0, "set on clean node reports 00");
    expect(set_flag(n, kLogicallyRemoved) == kLogicallyRemoved, "second set reports prior bit");
    expect(clean_flag(n, kBeingDistributed) == kLogicallyRemoved, "clean of unset bit is a no-op");
    expect((n.next.load() & kMarkBits) == kLogicallyRemoved, "unrelated bit survives clean");
  }

  reclaim::drain();
  const std::int64_t base = live_nodes();
  {
    S s;
    for (Key k : {3, 5, 7}) insert_key(s, k);
    expect(remove_key(s, 5), "remove present key succeeds");
    expect(!remove_key(s, 5), "second remove reports not found");
    expect(!find_key(s, 5), "removed key is invisible");

    Removal<typename S::node_type> moved;
    {
      reclaim::ReadGuard g;
      moved = s.remove(7, kBeingDistributed);
    }
    expect(moved.ok(), "distribution remove succeeds");
    expect(moved.node != nullptr, "distribution remove surrenders the node");
    expect(live_keys(s) == std::vector<Key>{3}, "surrendered node is unlinked");
    reclaim::drain();
    // Logically removed node reclaimed; surrendered node still owned by us.
    expect(live_nodes() - base == 2, "only the logically removed node is reclaimed");
    if (moved.node != nullptr && live_nodes() - base == 2) {
      expect(moved.node->key == 7, "surrendered node intact");
      expect((moved.node->next.load() & kBeingDistributed) != 0, "surrendered node carries the mark");
      delete moved.node;
    }
  }
  reclaim::drain();
  expect(live_nodes() == base, "no nodes leaked");

  r.passed = failures.empty();
  r.detail = failures.empty() ? "all flag checks hold" : "failed: " + failures.front();
  return r;
}

template <class S>
ClauseResult snapshot_contract(std::uint64_t seed) {
  ClauseResult r{"snapshot-contract", false, false, {}};
  S s;
  std::mt19937_64 rng(seed);
  std::set<Key> keys;
  while (keys.size() < 200) {
    const Key k = 2 * (rng() % 1000) + 1;  // odd keys only
    if (keys.insert(k).second) insert_key(s, k);
  }
  std::size_t bad = 0;
  {
    reclaim::ReadGuard g;
    for (Key probe = 0; probe < 2002; ++probe) {
      typename S::snapshot_type snap;
      const FindResult fr = s.find(probe, snap);
      const auto lb = keys.lower_bound(probe);
      const bool want_found = lb != keys.end() && *lb == probe;
      const Key* got = snap.cur != nullptr ? &snap.cur->key : nullptr;
      const bool pos_ok = (lb == keys.end()) ? got == nullptr : (got != nullptr && *got == *lb);
      bad += (fr == FindResult::kFound) != want_found || !pos_ok;
    }
    auto* f = s.first();
    bad += f == nullptr || f->key != *keys.begin();
  }
  r.passed = bad == 0;
  r.detail = std::to_string(bad) + " snapshot positions disagree with the lower bound";
  return r;
}

#ifdef DHASH_SCHEDULE_POINTS
// Parks one chosen thread the first time it reaches `point`.
class ParkOnce final : public ScheduleHook {
 public:
  ParkOnce(std::thread::id target, SchedulePoint point) : target_(target), point_(point) {}

  void at(SchedulePoint p, Key) override {
    if (p != point_ || std::this_thread::get_id() != target_ || used_.exchange(true)) return;
    parked_.store(true, std::memory_order_release);
    while (!released_.load(std::memory_order_acquire)) std::this_thread::yield();
  }
  void set_target(std::thread::id id) { target_ = id; }
  bool parked() const { return parked_.load(std::memory_order_acquire); }
  void release() { released_.store(true, std::memory_order_release); }

 private:
  std::thread::id target_;
  SchedulePoint point_;
  std::atomic<bool> used_{false};
  std::atomic<bool> parked_{false};
  std::atomic<bool> released_{false};
};
#endif

template <class S>
ClauseResult suspension() {
  ClauseResult r{"suspension", false, false, {}};
#ifndef DHASH_SCHEDULE_POINTS
  r.skipped = true;
  r.detail = "schedule points not compiled in";
  return r;
#else
  using namespace std::chrono;
  struct Scenario {
    const char* name;
    SchedulePoint point;
    int op;  // 0 insert, 1 remove, 2 find
  };
  const Scenario scenarios[] = {
      {"insert parked before link CAS", SchedulePoint::kListBeforeInsertCas, 0},
      {"remove parked before mark CAS", SchedulePoint::kListBeforeMarkCas, 1},
      {"find parked mid-traversal", SchedulePoint::kListAdvance, 2},
      {"remove parked before unlink CAS", SchedulePoint::kListBeforeUnlinkCas, 1},
  };
  std::vector<std::string> failures;
  for (const auto& sc : scenarios) {
    S s;
    for (Key k = 0; k < 64; k += 2) insert_key(s, k);
    ParkOnce hook({}, sc.point);
    set_schedule_hook(&hook);
    std::atomic<bool> target_started{false};
    std::thread victim([&] {
      hook.set_target(std::this_thread::get_id());
      target_started = true;
      if (sc.point == SchedulePoint::kListBeforeUnlinkCas) {
        // Leave a marked node behind so the cleaning pass has work to do.
        typename S::node_type* n = nullptr;
        {
          reclaim::ReadGuard g;
          typename S::snapshot_type snap;
          if (s.find(20, snap) == FindResult::kFound) n = snap.cur;
          if (n != nullptr) set_flag(*n, kLogicallyRemoved);
        }
      }
      switch (sc.op) {
        case 0: insert_key(s, 31); break;
        case 1: remove_key(s, 40); break;
        default: find_key(s, 62); break;
      }
    });
    const auto park_deadline = steady_clock::now() + seconds(5);
    while (!hook.parked() && steady_clock::now() < park_deadline) std::this_thread::yield();
    const bool reached = hook.parked();
    bool ok = reached;
    if (ok) {
      // Others must make progress while the victim sits before its step.
      const auto deadline = steady_clock::now() + seconds(10);
      int done = 0;
      for (Key k = 1; k < 400 && steady_clock::now() < deadline; ++k) {
        insert_key(s, 1000 + k);
        find_key(s, 1000 + k / 2);
        remove_key(s, 1000 + k / 3);
        insert_key(s, k % 64);
        remove_key(s, (k * 7) % 64);
        ++done;
      }
      ok = done == 399;
    }
    hook.release();
    victim.join();
    set_schedule_hook(nullptr);
    const auto keys = live_keys(s);
    ok = ok && std::is_sorted(keys.begin(), keys.end()) &&
         std::adjacent_find(keys.begin(), keys.end()) == keys.end();
    if (!ok) failures.emplace_back(std::string(sc.name) + (reached ? "" : " (point never reached)"));
  }
  reclaim::drain();
  r.passed = failures.empty();
  r.detail = failures.empty() ? "4 suspension schedules completed" : "stalled: " + failures.front();
  return r;
#endif
}

}  // namespace conformance_detail

/// Runs every contract clause against `S`.
template <class S>
  requires BucketSet<S>
ConformanceReport conformance_suite(std::uint64_t seed = 1) {
  ConformanceReport report;
  report.clauses.push_back(conformance_detail::oracle_equivalence<S>(seed));
  report.clauses.push_back(conformance_detail::flag_semantics<S>());
  report.clauses.push_back(conformance_detail::snapshot_contract<S>(seed));
  report.clauses.push_back(conformance_detail::suspension<S>());
  return report;
}

}  // namespace dhash

#endif  // DHASH_CONFORMANCE_HPP

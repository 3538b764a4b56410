#ifndef DHASH_CHECKER_LEMMAS_HPP
#define DHASH_CHECKER_LEMMAS_HPP

/// \file
/// Stress suites for the three completeness properties under continuous
/// rebuild:
///   lemma1  lookups of resident (never deleted) keys always find them
///   lemma2  deletes of keys known present always succeed; racing deletes
///           of one key succeed exactly once
///   lemma3  inserted keys are found right away by the inserter and appear
///           exactly once in the final census
/// A rebuild thread alternates geometry and hash for the whole run. With
/// schedule points compiled in, random yields are injected to widen races.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <latch>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dhash/checker/perturb.hpp"
#include "dhash/dhash.hpp"

namespace dhash::checker {

struct StressConfig {
  double seconds = 10;
  std::uint64_t seed = 1;
  unsigned threads = 4;
  bool rebuild = true;
  unsigned yield_one_in = 64;  // 0 disables perturbation
};

struct StressResult {
  std::string name;
  bool passed = false;
  std::uint64_t operations = 0;
  std::uint64_t violations = 0;
  std::uint64_t rebuilds = 0;
  double seconds = 0;
  std::string detail;
};

namespace lemma_detail {

using Table = DHash<std::uint64_t>;

/// Rebuilds `t` back and forth until stopped.
class RebuildThread {
 public:
  RebuildThread(Table& t, std::uint64_t seed, bool enabled) {
    if (!enabled) return;
    thread_ = std::thread([this, &t, seed] {
      std::mt19937_64 rng(seed);
      for (std::size_t i = 0; !stop_.load(std::memory_order_acquire); ++i) {
        const std::size_t n = i % 2 == 0 ? 97 + rng() % 64 : 16 + rng() % 16;
        if (t.rebuild(n, hashes::multiplicative(rng())) == RebuildResult::kSuccess)
          count_.fetch_add(1, std::memory_order_relaxed);
      }
    });
  }
  ~RebuildThread() { stop(); }
  RebuildThread(const RebuildThread&) = delete;
  RebuildThread& operator=(const RebuildThread&) = delete;

  void stop() {
    stop_.store(true, std::memory_order_release);
    if (thread_.joinable()) thread_.join();
  }
  [[nodiscard]] std::uint64_t count() const { return count_.load(); }

 private:
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> count_{0};
  std::thread thread_;
};

inline bool expired(std::chrono::steady_clock::time_point until) {
  return std::chrono::steady_clock::now() >= until;
}

inline std::chrono::steady_clock::time_point deadline(double seconds) {
  return std::chrono::steady_clock::now() +
         std::chrono::duration_cast<std::chrono::steady_clock::duration>(
             std::chrono::duration<double>(seconds));
}

}  // namespace lemma_detail

inline StressResult lemma1_stress(const StressConfig& cfg) {
  using namespace lemma_detail;
  StressResult r{"lemma1", false, 0, 0, 0, cfg.seconds, {}};
  Table table(64, hashes::identity());
  constexpr Key kResident = 2048;
  for (Key k = 0; k < kResident; ++k) table.insert(k * 2, k);  // even keys stay

  RandomYield perturb(cfg.seed, cfg.yield_one_in);
  ScopedHook hook(cfg.yield_one_in != 0 ? &perturb : nullptr);
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> lookups{0}, misses{0}, churn{0};
  std::vector<std::thread> readers;
  for (unsigned t = 0; t < cfg.threads; ++t)
    readers.emplace_back([&, t] {
      std::mt19937_64 rng(cfg.seed * 31 + t);
      std::uint64_t n = 0, miss = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        for (int i = 0; i < 256; ++i) miss += table.lookup((rng() % kResident) * 2) != LookupResult::kFound;
        n += 256;
      }
      lookups += n;
      misses += miss;
    });
  // Odd keys come and go so buckets see unlinking while readers traverse.
  std::thread mutator([&] {
    std::mt19937_64 rng(cfg.seed + 7);
    std::uint64_t n = 0;
    while (!stop.load(std::memory_order_relaxed)) {
      const Key k = (rng() % kResident) * 2 + 1;
      if (rng() % 2) table.insert(k, k);
      else table.remove(k);
      ++n;
      if (n % 64 == 0) std::this_thread::yield();
    }
    churn += n;
  });
  RebuildThread rebuild(table, cfg.seed, cfg.rebuild);
  std::this_thread::sleep_until(deadline(cfg.seconds));
  rebuild.stop();
  stop = true;
  for (auto& t : readers) t.join();
  mutator.join();

  r.operations = lookups.load();
  r.violations = misses.load();
  r.rebuilds = rebuild.count();
  std::size_t resident_found = 0;
  for (Key k : table.census_quiescent()) resident_found += k % 2 == 0;
  const bool census_ok = resident_found == kResident;
  r.violations += census_ok ? 0 : 1;
  r.passed = r.violations == 0;
  std::ostringstream d;
  d << r.operations << " resident lookups, " << misses.load() << " misses, " << r.rebuilds
    << " rebuilds, " << churn.load() << " churn ops, census " << (census_ok ? "ok" : "WRONG");
  r.detail = d.str();
  return r;
}

inline StressResult lemma2_stress(const StressConfig& cfg) {
  using namespace lemma_detail;
  StressResult r{"lemma2", false, 0, 0, 0, cfg.seconds, {}};
  Table table(32, hashes::identity());
  RandomYield perturb(cfg.seed, cfg.yield_one_in);
  ScopedHook hook(cfg.yield_one_in != 0 ? &perturb : nullptr);

  const unsigned owners = std::max(1U, cfg.threads - 2);
  constexpr Key kRange = 1U << 20;       // owned keys: owner * kRange + i
  constexpr Key kContestBase = 1ULL << 40;
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> ops{0}, bad{0};
  std::vector<std::set<Key>> left(owners);

  std::vector<std::thread> ts;
  for (unsigned o = 0; o < owners; ++o)
    ts.emplace_back([&, o] {
      std::mt19937_64 rng(cfg.seed * 17 + o);
      std::vector<Key> present;
      std::uint64_t n = 0, wrong = 0;
      Key next = o * kRange;
      while (!stop.load(std::memory_order_relaxed)) {
        // Add a batch, then delete a random half; every delete targets a key
        // this thread knows is present.
        for (int i = 0; i < 32; ++i, ++next) {
          wrong += table.insert(next, next) != InsertResult::kSuccess;
          present.push_back(next);
        }
        std::shuffle(present.begin(), present.end(), rng);
        for (int i = 0; i < 16; ++i) {
          wrong += table.remove(present.back()) != DeleteResult::kSuccess;
          present.pop_back();
        }
        n += 48;
        if (next >= (o + 1) * kRange - 64) {
          for (Key k : present) wrong += table.remove(k) != DeleteResult::kSuccess;
          n += present.size();
          present.clear();
          next = o * kRange;
        }
      }
      left[o].insert(present.begin(), present.end());
      ops += n;
      bad += wrong;
    });

  // Contested keys: one inserter publishes, two deleters race on each.
  std::atomic<std::uint64_t> published{0};
  std::vector<std::vector<char>> wins(2);
  std::atomic<std::uint64_t> contested_done[2] = {0, 0};
  ts.emplace_back([&] {
    std::uint64_t i = 0;
    while (!stop.load(std::memory_order_relaxed)) {
      // Stay a bounded distance ahead of both deleters.
      if (i - std::min(contested_done[0].load(), contested_done[1].load()) > 64) {
        std::this_thread::yield();
        continue;
      }
      if (table.insert(kContestBase + i, i) != InsertResult::kSuccess) bad.fetch_add(1);
      published.store(++i, std::memory_order_release);
    }
  });
  for (int d = 0; d < 2; ++d)
    ts.emplace_back([&, d] {
      std::uint64_t i = 0;
      for (;;) {
        const std::uint64_t avail = published.load(std::memory_order_acquire);
        if (i >= avail) {
          if (stop.load(std::memory_order_relaxed)) break;
          std::this_thread::yield();
          continue;
        }
        wins[d].push_back(table.remove(kContestBase + i) == DeleteResult::kSuccess);
        contested_done[d].store(++i, std::memory_order_release);
      }
    });

  RebuildThread rebuild(table, cfg.seed, cfg.rebuild);
  std::this_thread::sleep_until(deadline(cfg.seconds));
  rebuild.stop();
  stop = true;
  for (auto& t : ts) t.join();

  const std::size_t contested = std::min(wins[0].size(), wins[1].size());
  std::uint64_t double_wins = 0, no_wins = 0;
  for (std::size_t i = 0; i < contested; ++i) {
    const int w = wins[0][i] + wins[1][i];
    double_wins += w > 1;
    no_wins += w == 0;
  }
  // Census: exactly the owners' remaining keys plus unfinished contested keys.
  std::set<Key> expected;
  for (const auto& s : left) expected.insert(s.begin(), s.end());
  for (std::size_t i = contested; i < published.load(); ++i) {
    const bool seen = i < wins[0].size() || i < wins[1].size();
    const bool taken = (i < wins[0].size() && wins[0][i]) || (i < wins[1].size() && wins[1][i]);
    no_wins += seen && !taken;  // a lone deleter must succeed
    if (!taken) expected.insert(kContestBase + i);
  }
  const auto census = table.census_quiescent();
  const bool census_ok = census == std::vector<Key>(expected.begin(), expected.end());

  r.operations = ops.load() + 2 * contested;
  r.violations = bad.load() + double_wins + no_wins + (census_ok ? 0 : 1);
  r.rebuilds = rebuild.count();
  r.passed = r.violations == 0;
  std::ostringstream d;
  d << ops.load() << " owned ops, " << bad.load() << " failed, " << contested
    << " contested keys (" << double_wins << " double, " << no_wins << " lost), " << r.rebuilds
    << " rebuilds, census " << (census_ok ? "exact" : "WRONG");
  r.detail = d.str();
  return r;
}

inline StressResult lemma3_stress(const StressConfig& cfg) {
  using namespace lemma_detail;
  StressResult r{"lemma3", false, 0, 0, 0, cfg.seconds, {}};
  Table table(32, hashes::identity());
  RandomYield perturb(cfg.seed, cfg.yield_one_in);
  ScopedHook hook(cfg.yield_one_in != 0 ? &perturb : nullptr);

  const unsigned inserters = std::max(1U, cfg.threads - 1);
  constexpr Key kShared = 1ULL << 40;  // small key set every inserter races on
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> ops{0}, bad{0};
  std::vector<std::vector<Key>> kept(inserters);
  std::vector<std::thread> ts;
  for (unsigned w = 0; w < inserters; ++w)
    ts.emplace_back([&, w] {
      std::mt19937_64 rng(cfg.seed * 13 + w);
      std::uint64_t n = 0, wrong = 0;
      Key next = w;
      while (!stop.load(std::memory_order_relaxed)) {
        const Key k = next;
        next += inserters;
        wrong += table.insert(k, k) != InsertResult::kSuccess;
        wrong += table.lookup(k) != LookupResult::kFound;
        // Drop one in four again so deletes interleave with distribution.
        if (rng() % 4 == 0) {
          wrong += table.remove(k) != DeleteResult::kSuccess;
          ++n;
        } else {
          kept[w].push_back(k);
        }
        // Shared keys are never deleted, so whoever wins the insert race the
        // key must be visible afterwards.
        const Key s = kShared + rng() % 8;
        table.insert(s, s);
        wrong += table.lookup(s) != LookupResult::kFound;
        n += 4;
      }
      ops += n;
      bad += wrong;
    });
  RebuildThread rebuild(table, cfg.seed, cfg.rebuild);
  std::this_thread::sleep_until(deadline(cfg.seconds));
  rebuild.stop();
  stop = true;
  for (auto& t : ts) t.join();

  std::vector<Key> expected;
  for (const auto& v : kept) expected.insert(expected.end(), v.begin(), v.end());
  std::sort(expected.begin(), expected.end());
  auto census = table.census_quiescent();
  const bool unique = std::adjacent_find(census.begin(), census.end()) == census.end();
  std::vector<Key> shared;
  census.erase(std::remove_if(census.begin(), census.end(),
                              [&](Key k) {
                                if (k < kShared) return false;
                                shared.push_back(k);
                                return true;
                              }),
               census.end());
  const bool census_ok = unique && census == expected && !shared.empty();

  r.operations = ops.load();
  r.violations = bad.load() + (census_ok ? 0 : 1);
  r.rebuilds = rebuild.count();
  r.passed = r.violations == 0;
  std::ostringstream d;
  d << r.operations << " ops, " << bad.load() << " failed, " << expected.size()
    << " kept keys, " << shared.size() << " shared keys, " << r.rebuilds << " rebuilds, census "
    << (census_ok ? "exact" : "WRONG");
  r.detail = d.str();
  return r;
}

}  // namespace dhash::checker

#endif  // DHASH_CHECKER_LEMMAS_HPP

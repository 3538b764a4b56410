#ifndef DHASH_CHECKER_RECORDER_HPP
#define DHASH_CHECKER_RECORDER_HPP

/// \file
/// Records small concurrent histories against a live DHash.
///
/// Each worker appends to its own log; timestamps come from one shared
/// atomic counter read just before the call and just after it returns, so
/// every recorded interval contains the real operation. Logs are merged after
/// the run.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <latch>
#include <random>
#include <thread>
#include <vector>

#include "dhash/checker/history.hpp"
#include "dhash/checker/perturb.hpp"
#include "dhash/dhash.hpp"

namespace dhash::checker {

struct RecordConfig {
  unsigned threads = 3;          // 2..4
  unsigned ops_per_thread = 8;   // <= 8
  unsigned key_space = 4;        // <= 4
  bool with_rebuild = true;
  std::uint64_t seed = 1;
  unsigned yield_one_in = 3;     // perturbation strength, 0 = none
  std::chrono::milliseconds hang_timeout{20000};
};

namespace record_detail {

inline void dump_and_abort(const std::vector<std::vector<HistoryEvent>>& logs,
                           const std::vector<std::atomic<std::size_t>>& progress) {
  std::fprintf(stderr, "record_run: operation did not complete; partial schedule:\n");
  for (std::size_t t = 0; t < logs.size(); ++t) {
    const std::size_t n = progress[t].load(std::memory_order_acquire);
    for (std::size_t i = 0; i < n && i < logs[t].size(); ++i) {
      const auto& e = logs[t][i];
      std::fprintf(stderr, "  %llu t%u %s %s %llu\n", static_cast<unsigned long long>(e.ts),
                   e.thread, e.phase == Phase::kInvoke ? "invoke" : "response",
                   to_string(e.op), static_cast<unsigned long long>(e.key));
    }
  }
  std::abort();
}

}  // namespace record_detail

/// Runs the configured workload once and returns its well-formed history.
/// Aborts with a schedule dump if some operation hangs.
template <template <class> class Set = OrderedSetList>
History record_run(const RecordConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  History h;
  DHash<std::uint64_t, Set> table(2, hashes::identity());
  for (Key k = 0; k < cfg.key_space; ++k)
    if (rng() % 2 == 0) {
      table.insert(k, k);
      h.initial.push_back(k);
    }

  struct Planned {
    SetOp op;
    Key key;
  };
  std::vector<std::vector<Planned>> plans(cfg.threads);
  for (auto& p : plans)
    for (unsigned i = 0; i < cfg.ops_per_thread; ++i)
      p.push_back({static_cast<SetOp>(rng() % 3), rng() % cfg.key_space});

  RandomYield perturb(cfg.seed, cfg.yield_one_in);
  ScopedHook hook(cfg.yield_one_in != 0 ? &perturb : nullptr);

  std::atomic<std::uint64_t> clock{1};
  std::vector<std::vector<HistoryEvent>> logs(cfg.threads);
  std::vector<std::atomic<std::size_t>> progress(cfg.threads);
  for (unsigned t = 0; t < cfg.threads; ++t) logs[t].resize(2 * cfg.ops_per_thread);
  std::latch start(cfg.threads + (cfg.with_rebuild ? 1 : 0));
  std::atomic<unsigned> finished{0};
  std::atomic<bool> stop_rebuild{false};

  std::vector<std::thread> workers;
  for (unsigned t = 0; t < cfg.threads; ++t)
    workers.emplace_back([&, t] {
      start.arrive_and_wait();
      std::size_t n = 0;
      for (const Planned& p : plans[t]) {
        logs[t][n] = {t, p.op, p.key, Phase::kInvoke, false, clock.fetch_add(1)};
        progress[t].store(++n, std::memory_order_release);
        bool ok = false;
        switch (p.op) {
          case SetOp::kLookup: ok = table.lookup(p.key) == LookupResult::kFound; break;
          case SetOp::kInsert: ok = table.insert(p.key, p.key) == InsertResult::kSuccess; break;
          case SetOp::kDelete: ok = table.remove(p.key) == DeleteResult::kSuccess; break;
        }
        logs[t][n] = {t, p.op, p.key, Phase::kResponse, ok, clock.fetch_add(1)};
        progress[t].store(++n, std::memory_order_release);
      }
      finished.fetch_add(1, std::memory_order_release);
    });

  std::thread rebuilder;
  std::vector<RebuildWindow> windows;
  if (cfg.with_rebuild) {
    rebuilder = std::thread([&] {
      start.arrive_and_wait();
      std::uint64_t mult = cfg.seed * 2 + 1;
      for (std::size_t i = 0; !stop_rebuild.load(std::memory_order_acquire); ++i) {
        const std::uint64_t b = clock.fetch_add(1);
        table.rebuild(i % 2 == 0 ? 3 : 2, hashes::multiplicative(mult += 0x9E3779B97F4A7C16ULL));
        windows.push_back({b, clock.fetch_add(1)});
      }
    });
  }

  const auto deadline = std::chrono::steady_clock::now() + cfg.hang_timeout;
  while (finished.load(std::memory_order_acquire) < cfg.threads) {
    if (std::chrono::steady_clock::now() > deadline)
      record_detail::dump_and_abort(logs, progress);
    std::this_thread::yield();
  }
  for (auto& w : workers) w.join();
  stop_rebuild = true;
  if (rebuilder.joinable()) rebuilder.join();

  for (auto& log : logs) h.events.insert(h.events.end(), log.begin(), log.end());
  std::sort(h.events.begin(), h.events.end(),
            [](const HistoryEvent& a, const HistoryEvent& b) { return a.ts < b.ts; });
  // Only windows that overlap the operations are interesting.
  const std::uint64_t last = h.events.empty() ? 0 : h.events.back().ts;
  for (const auto& w : windows)
    if (w.begin < last) h.rebuilds.push_back(w);
  return h;
}

}  // namespace dhash::checker

#endif  // DHASH_CHECKER_RECORDER_HPP

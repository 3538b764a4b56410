#ifndef DHASH_HARNESS_RUNNER_HPP
#define DHASH_HARNESS_RUNNER_HPP

/// \file
/// Timed benchmark runs and rebuild-time measurements.

#include <time.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <latch>
#include <optional>
#include <thread>
#include <vector>

#include "dhash/harness/pinning.hpp"
#include "dhash/harness/report.hpp"
#include "dhash/harness/workload.hpp"

namespace dhash::harness {

using Table = DHash<std::uint64_t>;

/// Places threads per the config; degrades to unpinned with a note when the
/// platform refuses.
class Placement {
 public:
  explicit Placement(Pinning mode) {
    if (mode == Pinning::kNone) {
      note_ = "disabled";
      return;
    }
    auto cpus = allowed_cpus();
    if (cpus.empty()) {
      note_ = "affinity query failed; running unpinned";
      return;
    }
    planner_.emplace(performance_first_order(std::move(cpus)));
    enabled_ = true;
  }

  /// Pins the calling thread; returns the CPU or -1.
  int pin_worker() {
    if (!enabled_) return -1;
    const int cpu = planner_->assign();
    if (cpu >= 0 && pin_current_thread(cpu)) return cpu;
    failed_.store(true, std::memory_order_relaxed);
    return -1;
  }

  [[nodiscard]] bool pinned() const { return enabled_ && !failed_.load(); }
  [[nodiscard]] std::string note() const {
    if (enabled_ && failed_.load()) return "setaffinity failed; some threads unpinned";
    return note_;
  }

 private:
  std::optional<CorePlanner> planner_;
  bool enabled_ = false;
  std::atomic<bool> failed_{false};
  std::string note_;
};

inline std::string host_name() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

namespace runner_detail {

inline double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

inline void run_op(Table& t, const OpStream::Op& op, ThreadCounts& c) {
  switch (op.kind) {
    case OpKind::kLookup:
      ++c.lookups;
      c.lookup_hits += t.lookup(op.key) == LookupResult::kFound;
      break;
    case OpKind::kInsert:
      ++c.inserts;
      c.insert_success += t.insert(op.key, op.key) == InsertResult::kSuccess;
      break;
    case OpKind::kDelete:
      ++c.deletes;
      c.delete_success += t.remove(op.key) == DeleteResult::kSuccess;
      break;
  }
}

// Alternates the table between the base and the alternate geometry until
// `stop` is set. Holds no critical section between rebuilds.
inline void rebuild_loop(Table& t, const WorkloadConfig& c, const std::atomic<bool>& stop,
                         std::vector<double>& durations) {
  bool to_alt = true;
  while (!stop.load(std::memory_order_acquire)) {
    const auto start = std::chrono::steady_clock::now();
    const RebuildResult r = to_alt ? t.rebuild(c.effective_alt_buckets(), alternate_hash(c))
                                   : t.rebuild(c.nbuckets, primary_hash());
    if (r == RebuildResult::kSuccess) {
      durations.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      to_alt = !to_alt;
    }
  }
}

}  // namespace runner_detail

/// Prefills, runs the workers (and optionally the rebuild thread) for the
/// configured duration, and reports. Throws ConfigError on bad configs and
/// std::system_error if a thread cannot be started.
inline ThroughputReport run(const WorkloadConfig& config) {
  validate(config);
  ThroughputReport report;
  report.config = config;
  report.host = host_name();
  report.hardware_threads = std::thread::hardware_concurrency();

  Table table(config.nbuckets, primary_hash());
  report.prefilled = prefill(table, config);

  Placement placement(config.pinning);
  std::atomic<bool> stop{false};
  std::latch ready(config.workers + 1);
  std::vector<ThreadCounts> counts(config.workers);
  std::vector<std::thread> threads;
  threads.reserve(config.workers + 1);

  auto abort_started = [&] {
    stop = true;
    for (auto& th : threads) th.join();
  };
  try {
    for (unsigned w = 0; w < config.workers; ++w) {
      threads.emplace_back([&, w] {
        reclaim::ThreadRegistration registration;
        ThreadCounts local;
        local.thread = static_cast<int>(w);
        local.cpu = placement.pin_worker();
        OpStream ops(config, w);
        ready.arrive_and_wait();
        // Check the stop flag every few ops to keep its cost out of the loop.
        while (!stop.load(std::memory_order_relaxed))
          for (int i = 0; i < 64; ++i) runner_detail::run_op(table, ops.next(), local);
        counts[w] = local;
      });
    }
  } catch (...) {
    for (unsigned i = static_cast<unsigned>(threads.size()); i <= config.workers; ++i)
      ready.count_down();
    abort_started();
    throw;
  }

  const auto start = std::chrono::steady_clock::now();
  std::thread rebuilder;
  std::atomic<bool> stop_rebuild{false};
  if (config.rebuild == RebuildMode::kContinuous) {
    rebuilder = std::thread([&] {
      reclaim::ThreadRegistration registration;
      placement.pin_worker();
      runner_detail::rebuild_loop(table, config, stop_rebuild, report.rebuild_seconds);
    });
  }
  ready.arrive_and_wait();
  std::this_thread::sleep_for(std::chrono::duration<double>(config.seconds));
  stop_rebuild = true;
  if (rebuilder.joinable()) rebuilder.join();
  stop = true;
  for (auto& th : threads) th.join();
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  report.threads = std::move(counts);
  report.rebuilds = report.rebuild_seconds.size();
  report.pinned = placement.pinned();
  report.pin_note = placement.note();
  reclaim::drain();
  report.final_census = static_cast<std::int64_t>(table.census_quiescent().size());
  return report;
}

struct RebuildTiming {
  std::uint64_t nodes = 0;
  std::size_t buckets = 0;
  double mean_seconds = 0;
  double stddev_seconds = 0;
  std::vector<double> samples;
  double mean_cpu_seconds = 0;  // CPU time of the rebuilding thread
  std::vector<double> cpu_samples;
};

/// For each node count: prefill a table at the config's load factor, then
/// time `repetitions` rebuilds to a new hash at the same bucket count while
/// config.workers threads run the config's mix in the background.
inline std::vector<RebuildTiming> measure_rebuild(const WorkloadConfig& config,
                                                  const std::vector<std::uint64_t>& node_counts,
                                                  unsigned repetitions = 5) {
  std::vector<RebuildTiming> out;
  for (const std::uint64_t nodes : node_counts) {
    WorkloadConfig c = config;
    c.nbuckets = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(nodes) / c.load_factor)));
    c.key_range = std::max<std::uint64_t>(2 * nodes, 1);
    Table table(c.nbuckets, primary_hash());
    std::mt19937_64 rng = worker_rng(c.seed, 0);
    for (Key k : sample_distinct(nodes, c.key_range, rng)) table.insert(k, k);

    std::atomic<bool> stop{false};
    std::vector<std::thread> background;
    for (unsigned w = 0; w < c.workers; ++w)
      background.emplace_back([&, w] {
        reclaim::ThreadRegistration registration;
        OpStream ops(c, w);
        ThreadCounts sink;
        while (!stop.load(std::memory_order_relaxed))
          for (int i = 0; i < 64; ++i) runner_detail::run_op(table, ops.next(), sink);
      });

    RebuildTiming t;
    t.nodes = nodes;
    t.buckets = c.nbuckets;
    for (unsigned rep = 0; rep < repetitions; ++rep) {
      const double cpu_start = runner_detail::thread_cpu_seconds();
      const auto start = std::chrono::steady_clock::now();
      table.rebuild(c.nbuckets, rep % 2 == 0 ? alternate_hash(c) : primary_hash());
      t.samples.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      t.cpu_samples.push_back(runner_detail::thread_cpu_seconds() - cpu_start);
    }
    stop = true;
    for (auto& th : background) th.join();

    double sum = 0;
    for (double s : t.samples) sum += s;
    t.mean_seconds = sum / static_cast<double>(t.samples.size());
    double cpu = 0;
    for (double s : t.cpu_samples) cpu += s;
    t.mean_cpu_seconds = cpu / static_cast<double>(t.cpu_samples.size());
    double var = 0;
    for (double s : t.samples) var += (s - t.mean_seconds) * (s - t.mean_seconds);
    t.stddev_seconds =
        t.samples.size() > 1 ? std::sqrt(var / static_cast<double>(t.samples.size() - 1)) : 0.0;
    out.push_back(std::move(t));
    reclaim::drain();
  }
  return out;
}

}  // namespace dhash::harness

#endif  // DHASH_HARNESS_RUNNER_HPP

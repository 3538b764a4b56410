#ifndef DHASH_HARNESS_PINNING_HPP
#define DHASH_HARNESS_PINNING_HPP

// Performance-first thread placement: spread threads over distinct physical
// cores before doubling up on SMT siblings, and never put a thread on a CPU
// that hosts more threads than another allowed CPU.

#include <pthread.h>
#include <sched.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

namespace dhash::harness {

struct CpuInfo {
  int cpu = 0;
  int package = 0;
  int core = 0;
};

namespace pin_detail {
inline int read_topology(int cpu, const char* leaf) {
  std::ifstream in("/sys/devices/system/cpu/cpu" + std::to_string(cpu) + "/topology/" + leaf);
  int v = -1;
  if (in >> v) return v;
  return cpu;  // unknown: treat each CPU as its own core
}
}  // namespace pin_detail

/// CPUs this process may run on.
inline std::vector<CpuInfo> allowed_cpus() {
  std::vector<CpuInfo> out;
  cpu_set_t set;
  CPU_ZERO(&set);
  if (sched_getaffinity(0, sizeof(set), &set) != 0) return out;
  for (int c = 0; c < CPU_SETSIZE; ++c)
    if (CPU_ISSET(c, &set))
      out.push_back({c, pin_detail::read_topology(c, "physical_package_id"),
                     pin_detail::read_topology(c, "core_id")});
  return out;
}

/// Order in which CPUs are handed out: first hardware thread of every core,
/// package by package, then the second hardware threads, and so on.
inline std::vector<int> performance_first_order(std::vector<CpuInfo> cpus) {
  std::sort(cpus.begin(), cpus.end(), [](const CpuInfo& a, const CpuInfo& b) {
    return std::tie(a.package, a.core, a.cpu) < std::tie(b.package, b.core, b.cpu);
  });
  std::vector<std::pair<int, int>> ranked;  // (sibling rank, position)
  std::vector<int> order;
  for (std::size_t i = 0; i < cpus.size(); ++i) {
    int rank = 0;
    for (std::size_t j = 0; j < i; ++j)
      rank += cpus[j].package == cpus[i].package && cpus[j].core == cpus[i].core;
    ranked.emplace_back(rank, static_cast<int>(i));
  }
  std::stable_sort(ranked.begin(), ranked.end());
  for (auto [rank, pos] : ranked) order.push_back(cpus[static_cast<std::size_t>(pos)].cpu);
  return order;
}

/// Hands each new worker the CPU currently hosting the fewest workers; ties
/// go to the earlier CPU in performance-first order.
class CorePlanner {
 public:
  explicit CorePlanner(std::vector<int> order) : order_(std::move(order)), load_(order_.size()) {}

  int assign() {
    std::lock_guard lock(mu_);
    if (order_.empty()) return -1;
    const auto it = std::min_element(load_.begin(), load_.end());
    ++*it;
    return order_[static_cast<std::size_t>(it - load_.begin())];
  }

  [[nodiscard]] std::vector<unsigned> load() const {
    std::lock_guard lock(mu_);
    return load_;
  }

 private:
  std::vector<int> order_;
  std::vector<unsigned> load_;
  mutable std::mutex mu_;
};

inline bool pin_current_thread(int cpu) {
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
}

}  // namespace dhash::harness

#endif  // DHASH_HARNESS_PINNING_HPP

#ifndef DHASH_CHECKER_PERTURB_HPP
#define DHASH_CHECKER_PERTURB_HPP

// Random yields at schedule points. On few cores this is what makes threads
// actually interleave inside the list and rebuild steps.

#include <random>
#include <thread>

#include "dhash/schedule_point.hpp"

namespace dhash::checker {

class RandomYield final : public ScheduleHook {
 public:
  /// Yields with probability 1/one_in at every point.
  RandomYield(std::uint64_t seed, unsigned one_in) : seed_(seed), one_in_(one_in) {}

  void at(SchedulePoint, Key) override {
    thread_local std::minstd_rand rng(static_cast<std::uint32_t>(
        seed_ ^ std::hash<std::thread::id>{}(std::this_thread::get_id())));
    if (one_in_ != 0 && rng() % one_in_ == 0) std::this_thread::yield();
  }

 private:
  std::uint64_t seed_;
  unsigned one_in_;
};

/// Installs a hook for the lifetime of the object (no-op without points).
class ScopedHook {
 public:
  explicit ScopedHook(ScheduleHook* hook) { set_schedule_hook(hook); }
  ~ScopedHook() { set_schedule_hook(nullptr); }
  ScopedHook(const ScopedHook&) = delete;
  ScopedHook& operator=(const ScopedHook&) = delete;
};

}  // namespace dhash::checker

#endif  // DHASH_CHECKER_PERTURB_HPP

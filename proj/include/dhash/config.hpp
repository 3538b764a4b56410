#ifndef DHASH_CONFIG_HPP
#define DHASH_CONFIG_HPP

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <thread>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif

// Misuse checks (foreign guard release, waiting inside a critical section)
// are on in debug builds and whenever DHASH_DEBUG_CHECKS is defined.
#if !defined(NDEBUG) && !defined(DHASH_DEBUG_CHECKS)
#define DHASH_DEBUG_CHECKS 1
#endif

#define DHASH_CHECK(cond, msg)                                                \
  do {                                                                        \
    if (!(cond)) ::dhash::detail::fail(__FILE__, __LINE__, msg);              \
  } while (false)

#ifdef DHASH_DEBUG_CHECKS
#define DHASH_DEBUG_CHECK(cond, msg) DHASH_CHECK(cond, msg)
#else
#define DHASH_DEBUG_CHECK(cond, msg) ((void)0)
#endif

namespace dhash {

using Key = std::uint64_t;

inline constexpr std::size_t kCacheLine = 64;

namespace detail {

[[noreturn]] inline void fail(const char* file, int line, const char* msg) {
  std::fprintf(stderr, "dhash: %s:%d: %s\n", file, line, msg);
  std::fflush(stderr);
  std::abort();
}

inline void cpu_relax() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  _mm_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#endif
}

/// Small per-thread slot index used to spread counters over cache lines.
inline std::size_t thread_slot() noexcept {
  static std::atomic<std::size_t> next{0};
  thread_local const std::size_t slot =
      next.fetch_add(1, std::memory_order_relaxed);
  return slot;
}

}  // namespace detail

/// Counter striped over cache lines so that hot-path increments from many
/// threads do not contend. Reads are approximate while writers are active.
class StripedCounter {
 public:
  static constexpr std::size_t kStripes = 64;

  void add(std::int64_t delta) noexcept {
    cells_[detail::thread_slot() % kStripes].value.fetch_add(
        delta, std::memory_order_relaxed);
  }

  [[nodiscard]] std::int64_t load() const noexcept {
    std::int64_t sum = 0;
    for (const auto& c : cells_) sum += c.value.load(std::memory_order_relaxed);
    return sum;
  }

 private:
  struct alignas(kCacheLine) Cell {
    std::atomic<std::int64_t> value{0};
  };
  std::array<Cell, kStripes> cells_{};
};

}  // namespace dhash

#endif  // DHASH_CONFIG_HPP

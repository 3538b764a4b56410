#ifndef DHASH_RECLAIM_HPP
#define DHASH_RECLAIM_HPP

/// \file
/// Deferred reclamation for readers that never block and never pay for
/// atomic read-modify-write operations.
///
/// Every registered thread owns an epoch word. Entering the outermost
/// read-side critical section publishes the current global epoch there;
/// leaving it stores zero. A grace period bumps the global epoch and waits
/// until no thread is still inside a critical section that started under an
/// older epoch. The store->load ordering that readers would otherwise need on
/// entry is provided from the writer side with membarrier(2), the same trade
/// userspace RCU's "memb" flavor makes.
///
/// Deferred callbacks are queued per thread, collected by a reclaimer thread
/// and executed only after two full grace periods have elapsed since they
/// were collected.

#include <algorithm>
#include <chrono>
#include <climits>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <vector>

#include <linux/futex.h>
#include <linux/membarrier.h>
#include <sys/syscall.h>
#include <time.h>
#include <unistd.h>

#include "dhash/config.hpp"

namespace dhash::reclaim {

struct DeferredCallback {
  void* target;
  void (*action)(void*);
};

struct DomainStats {
  std::uint64_t grace_periods = 0;
  std::uint64_t callbacks_deferred = 0;
  std::uint64_t callbacks_run = 0;
  std::size_t registered_threads = 0;
  bool expedited = false;
};

namespace detail {

struct alignas(kCacheLine) ThreadRecord {
  // 0 while quiescent, otherwise the global epoch seen at outermost entry.
  std::atomic<std::uint64_t> epoch{0};
  std::uint32_t nesting = 0;  // owner thread only; debug checks only
  bool in_use = false;        // guarded by the registry mutex

  alignas(kCacheLine) std::mutex pending_mu;
  std::vector<DeferredCallback> pending;
};

// Epoch counter in steps of kEpochStep; bit 0 set means readers must fence
// on entry (membarrier unavailable). Never zero.
inline constexpr std::uint64_t kNeedFence = 1;
inline constexpr std::uint64_t kEpochStep = 2;
inline std::atomic<std::uint64_t> g_epoch{kEpochStep};
inline std::atomic<std::uint32_t> g_waiters{0};
inline std::atomic<std::uint32_t> g_wake_seq{0};

constinit inline thread_local ThreadRecord* tls_record = nullptr;

ThreadRecord* register_slow();

inline long futex(std::atomic<std::uint32_t>* word, int op, std::uint32_t val,
                  const struct timespec* timeout) {
  return ::syscall(SYS_futex, reinterpret_cast<std::uint32_t*>(word), op, val,
                   timeout, nullptr, 0);
}

inline void wake_waiters() noexcept {
  g_wake_seq.fetch_add(1, std::memory_order_release);
  futex(&g_wake_seq, FUTEX_WAKE_PRIVATE, INT_MAX, nullptr);
  // Give the waiter the core; matters when readers oversubscribe CPUs.
  std::this_thread::yield();
}

// Returns the caller's record if this is the outermost entry, else nullptr.
// Nested entries do nothing: the thread's epoch word is already published.
inline ThreadRecord* enter() noexcept {
  ThreadRecord* r = tls_record;
  if (r == nullptr) [[unlikely]]
    r = register_slow();
  if (r->epoch.load(std::memory_order_relaxed) != 0) return nullptr;
  const std::uint64_t e = g_epoch.load(std::memory_order_acquire);
  r->epoch.store(e, std::memory_order_relaxed);
  std::atomic_signal_fence(std::memory_order_seq_cst);
  if (e & kNeedFence) [[unlikely]]
    std::atomic_thread_fence(std::memory_order_seq_cst);
  return r;
}

inline void exit(ThreadRecord* r) noexcept {
  r->epoch.store(0, std::memory_order_release);
  std::atomic_signal_fence(std::memory_order_seq_cst);
  if (g_waiters.load(std::memory_order_relaxed) != 0) [[unlikely]]
    wake_waiters();
}

}  // namespace detail

class Domain {
 public:
  static Domain& global() {
    static Domain domain;
    return domain;
  }

  Domain(const Domain&) = delete;
  Domain& operator=(const Domain&) = delete;

  ~Domain() {
    {
      std::lock_guard lk(reclaimer_mu_);
      stop_ = true;
    }
    reclaimer_cv_.notify_all();
    if (reclaimer_.joinable()) reclaimer_.join();
    drain();
  }

  detail::ThreadRecord* register_current_thread() {
    if (detail::tls_record != nullptr) return detail::tls_record;
    std::lock_guard lk(registry_mu_);
    detail::ThreadRecord* rec = nullptr;
    for (auto& r : records_) {
      if (!r->in_use) {
        rec = r.get();
        break;
      }
    }
    if (rec == nullptr) {
      records_.push_back(std::make_unique<detail::ThreadRecord>());
      rec = records_.back().get();
    }
    rec->in_use = true;
    rec->nesting = 0;
    rec->epoch.store(0, std::memory_order_relaxed);
    detail::tls_record = rec;
    return rec;
  }

  void unregister_current_thread() {
    detail::ThreadRecord* rec = detail::tls_record;
    if (rec == nullptr) return;
    DHASH_CHECK(rec->epoch.load(std::memory_order_relaxed) == 0,
                "thread unregistered inside a read-side critical section");
    std::vector<DeferredCallback> left;
    {
      std::lock_guard lk(rec->pending_mu);
      left.swap(rec->pending);
    }
    if (!left.empty()) {
      std::lock_guard lk(orphans_mu_);
      orphans_.insert(orphans_.end(), left.begin(), left.end());
    }
    {
      std::lock_guard lk(registry_mu_);
      rec->in_use = false;
    }
    detail::tls_record = nullptr;
  }

  /// Blocks until every critical section active at call time has ended.
  void wait_for_readers() {
    DHASH_CHECK(detail::tls_record == nullptr || detail::tls_record->epoch.load(std::memory_order_relaxed) == 0,
                "wait_for_readers called inside a read-side critical section");
    std::lock_guard gp(gp_mu_);
    const std::uint64_t target =
        detail::g_epoch.fetch_add(detail::kEpochStep, std::memory_order_acq_rel) +
        detail::kEpochStep;
    barrier_all();
    std::vector<detail::ThreadRecord*> snapshot;
    {
      std::lock_guard lk(registry_mu_);
      snapshot.reserve(records_.size());
      for (auto& r : records_)
        if (r->in_use) snapshot.push_back(r.get());
    }
    for (detail::ThreadRecord* r : snapshot) wait_for_record(*r, target);
    grace_periods_.fetch_add(1, std::memory_order_relaxed);
  }

  void defer(DeferredCallback cb) {
    detail::ThreadRecord* rec = detail::tls_record;
    if (rec == nullptr) rec = register_current_thread();
    std::size_t queued;
    {
      std::lock_guard lk(rec->pending_mu);
      rec->pending.push_back(cb);
      queued = rec->pending.size();
    }
    deferred_.add(1);
    start_reclaimer();
    if (queued == kWakeThreshold) reclaimer_cv_.notify_one();
  }

  /// Runs every callback deferred before the call. Must be called outside
  /// any critical section.
  void drain() {
    DHASH_CHECK(detail::tls_record == nullptr || detail::tls_record->epoch.load(std::memory_order_relaxed) == 0,
                "drain called inside a read-side critical section");
    std::lock_guard lk(cycle_mu_);
    while (cycle_locked()) {
    }
  }

  [[nodiscard]] DomainStats stats() const {
    DomainStats s;
    s.grace_periods = grace_periods_.load(std::memory_order_relaxed);
    s.callbacks_deferred = static_cast<std::uint64_t>(deferred_.load());
    s.callbacks_run = callbacks_run_.load(std::memory_order_relaxed);
    s.expedited = expedited_;
    std::lock_guard lk(registry_mu_);
    s.registered_threads = static_cast<std::size_t>(std::count_if(
        records_.begin(), records_.end(), [](const auto& r) { return r->in_use; }));
    return s;
  }

 private:
  static constexpr std::size_t kWakeThreshold = 512;
  static constexpr auto kReclaimInterval = std::chrono::milliseconds(2);

  Domain() {
    const long mask = ::syscall(SYS_membarrier, MEMBARRIER_CMD_QUERY, 0, 0);
    expedited_ = mask > 0 && (mask & MEMBARRIER_CMD_PRIVATE_EXPEDITED) != 0 &&
                 ::syscall(SYS_membarrier,
                           MEMBARRIER_CMD_REGISTER_PRIVATE_EXPEDITED, 0, 0) == 0;
    if (!expedited_) detail::g_epoch.fetch_or(detail::kNeedFence, std::memory_order_relaxed);
    spin_limit_ = std::thread::hardware_concurrency() > 1 ? 256 : 0;
  }

  void barrier_all() const {
    if (expedited_) {
      ::syscall(SYS_membarrier, MEMBARRIER_CMD_PRIVATE_EXPEDITED, 0, 0);
    } else {
      std::atomic_thread_fence(std::memory_order_seq_cst);
    }
  }

  void wait_for_record(const detail::ThreadRecord& r, std::uint64_t target) {
    auto blocking = [&] {
      const std::uint64_t e = r.epoch.load(std::memory_order_acquire);
      return e != 0 && e < target;
    };
    for (unsigned spin = 0; blocking(); ++spin) {
      if (spin < spin_limit_) {
        dhash::detail::cpu_relax();
        continue;
      }
      const std::uint32_t seq = detail::g_wake_seq.load(std::memory_order_acquire);
      detail::g_waiters.fetch_add(1, std::memory_order_seq_cst);
      barrier_all();
      if (blocking()) {
        // Bounded sleep; a lost wakeup only costs one timeout.
        struct timespec ts{0, 1'000'000};
        detail::futex(&detail::g_wake_seq, FUTEX_WAIT_PRIVATE, seq, &ts);
      }
      detail::g_waiters.fetch_sub(1, std::memory_order_relaxed);
    }
  }

  std::vector<DeferredCallback> collect() {
    std::vector<DeferredCallback> out;
    {
      std::lock_guard lk(orphans_mu_);
      out.swap(orphans_);
    }
    std::lock_guard lk(registry_mu_);
    for (auto& r : records_) {
      std::lock_guard plk(r->pending_mu);
      if (r->pending.empty()) continue;
      if (out.empty()) {
        out.swap(r->pending);
      } else {
        out.insert(out.end(), r->pending.begin(), r->pending.end());
        r->pending.clear();
      }
    }
    return out;
  }

  // One pipeline step; returns false when nothing was pending. Callbacks
  // collected in step n run at the end of step n+1, after two grace periods.
  bool cycle_locked() {
    std::vector<DeferredCallback> current = collect();
    if (current.empty() && ready_.empty()) return false;
    wait_for_readers();
    for (const DeferredCallback& cb : ready_) cb.action(cb.target);
    callbacks_run_.fetch_add(ready_.size(), std::memory_order_relaxed);
    ready_ = std::move(current);
    return true;
  }

  void start_reclaimer() {
    if (reclaimer_started_.load(std::memory_order_acquire)) return;
    std::call_once(reclaimer_once_, [this] {
      reclaimer_ = std::thread([this] { reclaimer_loop(); });
      reclaimer_started_.store(true, std::memory_order_release);
    });
  }

  void reclaimer_loop() {
    std::unique_lock lk(reclaimer_mu_);
    while (!stop_) {
      // system_clock deadline: sanitizer runtimes intercept timedwait but not clockwait.
      reclaimer_cv_.wait_until(lk, std::chrono::system_clock::now() + kReclaimInterval);
      if (stop_) break;
      lk.unlock();
      {
        std::lock_guard clk(cycle_mu_);
        cycle_locked();
      }
      lk.lock();
    }
  }

  bool expedited_ = false;
  unsigned spin_limit_ = 0;

  mutable std::mutex registry_mu_;
  std::vector<std::unique_ptr<detail::ThreadRecord>> records_;

  std::mutex gp_mu_;
  std::atomic<std::uint64_t> grace_periods_{0};

  std::mutex orphans_mu_;
  std::vector<DeferredCallback> orphans_;

  std::mutex cycle_mu_;
  std::vector<DeferredCallback> ready_;
  std::atomic<std::uint64_t> callbacks_run_{0};
  StripedCounter deferred_;

  std::mutex reclaimer_mu_;
  std::condition_variable reclaimer_cv_;
  bool stop_ = false;
  std::once_flag reclaimer_once_;
  std::atomic<bool> reclaimer_started_{false};
  std::thread reclaimer_;
};

namespace detail {

struct AutoRegistration {
  bool active = false;
  ~AutoRegistration() {
    if (active) Domain::global().unregister_current_thread();
  }
};

inline ThreadRecord* register_slow() {
  Domain& d = Domain::global();
  thread_local AutoRegistration holder;
  ThreadRecord* r = d.register_current_thread();
  holder.active = true;
  return r;
}

}  // namespace detail

/// RAII read-side critical section. Bound to the creating thread; cannot be
/// moved or copied. Nesting is allowed; nested guards are released in LIFO
/// order.
class [[nodiscard]] ReadGuard {
 public:
  ReadGuard() noexcept : outer_(detail::enter()) {
#ifdef DHASH_DEBUG_CHECKS
    owner_ = detail::tls_record;
    depth_ = owner_->nesting++;
#endif
  }
  ~ReadGuard() {
    if (active_) release();
  }

  ReadGuard(const ReadGuard&) = delete;
  ReadGuard& operator=(const ReadGuard&) = delete;

  void release() noexcept {
    DHASH_DEBUG_CHECK(active_, "read guard released twice");
    if (!active_) return;
#ifdef DHASH_DEBUG_CHECKS
    DHASH_CHECK(owner_ == detail::tls_record, "read guard released by a foreign thread");
    DHASH_CHECK(owner_->nesting == depth_ + 1, "read guards released out of order");
    owner_->nesting = depth_;
#endif
    active_ = false;
    if (outer_ != nullptr) detail::exit(outer_);
  }

  [[nodiscard]] bool active() const noexcept { return active_; }

 private:
  detail::ThreadRecord* outer_;  // null for nested guards
  bool active_ = true;
  // Debug bookkeeping; present in every build so the layout does not vary.
  std::uint32_t depth_ = 0;
  detail::ThreadRecord* owner_ = nullptr;
};

inline ReadGuard enter_critical() noexcept { return ReadGuard{}; }
inline void exit_critical(ReadGuard& guard) noexcept { guard.release(); }

[[nodiscard]] inline bool in_critical_section() noexcept {
  return detail::tls_record != nullptr && detail::tls_record->epoch.load(std::memory_order_relaxed) != 0;
}

inline void wait_for_readers() { Domain::global().wait_for_readers(); }

inline void defer_free(void* target, void (*action)(void*)) {
  Domain::global().defer(DeferredCallback{target, action});
}

template <class T>
void defer_delete(T* p) {
  defer_free(p, [](void* q) { delete static_cast<T*>(q); });
}

inline void drain() { Domain::global().drain(); }

/// Explicit registration for threads that want to control when their record
/// is released (harness workers register on start, unregister on exit).
class ThreadRegistration {
 public:
  ThreadRegistration() : owned_(detail::tls_record == nullptr) {
    Domain::global().register_current_thread();
  }
  ~ThreadRegistration() {
    if (owned_) Domain::global().unregister_current_thread();
  }
  ThreadRegistration(const ThreadRegistration&) = delete;
  ThreadRegistration& operator=(const ThreadRegistration&) = delete;

 private:
  bool owned_;
};

}  // namespace dhash::reclaim

#endif  // DHASH_RECLAIM_HPP

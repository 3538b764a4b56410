#ifndef DHASH_DHASH_HPP
#define DHASH_DHASH_HPP

/// \file
/// A concurrent hash table whose hash function and bucket count can be
/// replaced while lookups, inserts and deletes keep running.
///
/// Rebuild moves nodes one at a time: it publishes the node in rebuild_cur,
/// removes it from its old bucket (without reclaiming it), links it into the
/// new table and clears rebuild_cur. Between removal and insertion the node
/// is reachable only through rebuild_cur (its hazard period). Lookup and
/// delete therefore probe, in this order, the old bucket, rebuild_cur and the
/// new bucket; release/acquire pairs on rebuild_cur and on the list words
/// make the rebuilder's steps visible in the same order.
///
/// Inserts that observe a rebuild only touch the new table once distribution
/// has started, and probe old bucket + rebuild_cur first, so a key can never
/// be live in both tables.
///
/// lookup/insert/remove are lock-free given a lock-free bucket set. rebuild
/// blocks: it is serialized by a per-table lock and waits for grace periods.

#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "dhash/bucket_set.hpp"
#include "dhash/hash.hpp"
#include "dhash/ordered_set_list.hpp"
#include "dhash/reclaim.hpp"
#include "dhash/schedule_point.hpp"

namespace dhash {

enum class LookupResult : std::uint8_t { kFound, kNotFound };
enum class DeleteResult : std::uint8_t { kSuccess, kNotFound };
enum class RebuildResult : std::uint8_t { kSuccess, kBusy, kNotRequired };

struct RebuildContext {
  std::int64_t size = 0;
  std::size_t nbuckets = 0;
};

/// Consulted by rebuild() after it takes the rebuild lock.
using RebuildTrigger = std::function<bool(const RebuildContext&)>;

inline RebuildTrigger load_factor_above(double threshold) {
  return [threshold](const RebuildContext& c) {
    return static_cast<double>(c.size) / static_cast<double>(c.nbuckets) > threshold;
  };
}

template <class V = std::uint64_t, template <class> class Set = OrderedSetList>
class DHash {
 public:
  using value_type = V;
  using set_type = Set<V>;
  using node_type = typename set_type::node_type;

  static_assert(BucketSet<set_type>);
  static_assert(set_type::kDistribution == Distribution::kReuseNode,
                "rebuild distributes nodes in place; copy-distribution sets are not supported");

  DHash(std::size_t nbuckets, HashFn hash) {
    if (nbuckets == 0) throw std::invalid_argument("dhash: bucket count must be positive");
    if (!hash) throw std::invalid_argument("dhash: hash function is empty");
    current_.store(new Table(nbuckets, std::move(hash)), std::memory_order_release);
  }

  DHash(const DHash&) = delete;
  DHash& operator=(const DHash&) = delete;

  /// No operation or rebuild may be running.
  ~DHash() {
    Table* t = current_.load(std::memory_order_acquire);
    DHASH_CHECK(t->ht_new.load(std::memory_order_acquire) == nullptr,
                "table destroyed during a rebuild");
    delete t;
  }

  LookupResult lookup(Key key) {
    reclaim::ReadGuard guard;
    return locate(key) != nullptr ? LookupResult::kFound : LookupResult::kNotFound;
  }

  /// Node holding `key`; the pointer stays valid while `guard` is active.
  const node_type* find_node(const reclaim::ReadGuard& guard, Key key) {
    DHASH_DEBUG_CHECK(guard.active(), "find_node needs an active read guard");
    (void)guard;
    return locate(key);
  }

  /// Runs `reader` on the stored value inside a critical section.
  template <class F>
  auto guarded_read(Key key, F&& reader)
      -> std::optional<std::invoke_result_t<F&, const V&>> {
    reclaim::ReadGuard guard;
    const node_type* n = locate(key);
    if (n == nullptr) return std::nullopt;
    return std::invoke(reader, n->value);
  }

  InsertResult insert(Key key, V value) {
    auto* node = new node_type(key, std::move(value));
    InsertResult r = InsertResult::kExists;
    for (;;) {
      reclaim::ReadGuard guard;
      Table* ht = current_.load(std::memory_order_acquire);
      DHASH_SCHEDULE_POINT(SchedulePoint::kInsertBegin, key);
      Table* htn = ht->ht_new.load(std::memory_order_acquire);
      if (htn == nullptr) {
        r = ht->bucket_for(key).insert(node);
        break;
      }
      if (!ht->migrating.load(std::memory_order_acquire)) {
        // Between publication of the new table and the start of
        // distribution; unaware inserts may still target the old table.
        guard.release();
        std::this_thread::yield();
        continue;
      }
      typename set_type::snapshot_type snap;
      if (ht->bucket_for(key).find(key, snap) == FindResult::kFound) break;
      if (hazard_node_holds(key)) break;
      DHASH_SCHEDULE_POINT(SchedulePoint::kInsertBeforeLink, key);
      r = htn->bucket_for(key).insert(node);
      break;
    }
    if (r == InsertResult::kExists) {
      delete node;
    } else {
      size_.add(1);
    }
    return r;
  }

  DeleteResult remove(Key key) {
    reclaim::ReadGuard guard;
    Table* ht = current_.load(std::memory_order_acquire);
    DHASH_SCHEDULE_POINT(SchedulePoint::kDeleteBeforeOldDelete, key);
    if (ht->bucket_for(key).remove(key, kLogicallyRemoved).ok()) return removed();
    Table* htn = ht->ht_new.load(std::memory_order_acquire);
    if (htn == nullptr) return DeleteResult::kNotFound;
    DHASH_SCHEDULE_POINT(SchedulePoint::kDeleteBeforeCurCheck, key);
    node_type* cur = rebuild_cur_.load(std::memory_order_acquire);
    if (cur != nullptr && cur->key == key &&
        (set_flag(*cur, kLogicallyRemoved) & kLogicallyRemoved) == 0)
      return removed();
    DHASH_SCHEDULE_POINT(SchedulePoint::kDeleteBeforeNewDelete, key);
    if (htn->bucket_for(key).remove(key, kLogicallyRemoved).ok()) return removed();
    return DeleteResult::kNotFound;
  }

  /// Replaces the hash function and bucket count. Must not be called from
  /// inside a read-side critical section.
  RebuildResult rebuild(std::size_t nbuckets, HashFn hash) {
    DHASH_CHECK(!reclaim::in_critical_section(),
                "rebuild called inside a read-side critical section");
    if (nbuckets == 0) throw std::invalid_argument("dhash: bucket count must be positive");
    if (!hash) throw std::invalid_argument("dhash: hash function is empty");
    std::unique_lock lock(rebuild_lock_, std::try_to_lock);
    if (!lock.owns_lock()) return RebuildResult::kBusy;
    if (trigger_ && !trigger_(context())) return RebuildResult::kNotRequired;

    Table* ht = current_.load(std::memory_order_acquire);
    auto fresh = std::make_unique<Table>(nbuckets, std::move(hash));
    ht->ht_new.store(fresh.get(), std::memory_order_release);
    // Wait for operations not aware of the new table.
    reclaim::wait_for_readers();
    ht->migrating.store(true, std::memory_order_release);

    for (std::size_t b = 0; b < ht->nbuckets; ++b) {
      if (b + 1 < ht->nbuckets) prefetch_first(ht->buckets[b + 1]);
      distribute(ht->buckets[b], *fresh);
    }

    // Wait for operations still walking the old buckets.
    reclaim::wait_for_readers();
    current_.store(fresh.release(), std::memory_order_release);
    // Wait for operations still holding the old table.
    reclaim::wait_for_readers();
    rebuilds_.fetch_add(1, std::memory_order_relaxed);
    lock.unlock();
    delete ht;
    return RebuildResult::kSuccess;
  }

  void set_rebuild_trigger(RebuildTrigger trigger) {
    std::lock_guard lock(rebuild_lock_);
    trigger_ = std::move(trigger);
  }

  [[nodiscard]] std::size_t bucket_count() const {
    reclaim::ReadGuard guard;
    return current_.load(std::memory_order_acquire)->nbuckets;
  }

  /// Approximate while updates are in flight.
  [[nodiscard]] std::int64_t size() const { return size_.load(); }

  [[nodiscard]] std::uint64_t rebuild_count() const {
    return rebuilds_.load(std::memory_order_relaxed);
  }

  [[nodiscard]] bool rebuild_in_progress() const {
    reclaim::ReadGuard guard;
    return current_.load(std::memory_order_acquire)->ht_new.load(
               std::memory_order_acquire) != nullptr;
  }

  /// Visits every live (unmarked) node of the current table in bucket order.
  /// Requires quiescence: no concurrent updates or rebuilds.
  template <class F>
  void for_each_quiescent(F&& visit) const {
    const Table* t = current_.load(std::memory_order_acquire);
    for (std::size_t b = 0; b < t->nbuckets; ++b) {
      t->buckets[b].for_each_linked([&](const node_type& n, std::uintptr_t marks) {
        if (marks == 0) visit(n.key, n.value, b);
      });
    }
  }

  /// Sorted keys of all live nodes; duplicates would show up as repeats.
  [[nodiscard]] std::vector<Key> census_quiescent() const {
    std::vector<Key> keys;
    for_each_quiescent([&](Key k, const V&, std::size_t) { keys.push_back(k); });
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  /// Checks the placement invariant: every live node sits in
  /// bucket hash(key) % nbuckets of the current table.
  [[nodiscard]] bool placement_ok_quiescent() const {
    const Table* t = current_.load(std::memory_order_acquire);
    bool ok = true;
    for_each_quiescent([&](Key k, const V&, std::size_t b) {
      ok = ok && t->index_of(k) == b;
    });
    return ok;
  }

  [[nodiscard]] std::size_t bucket_of_quiescent(Key key) const {
    return current_.load(std::memory_order_acquire)->index_of(key);
  }

 private:
  struct Table {
    Table(std::size_t n, HashFn h)
        : nbuckets(n), hash(std::move(h)), buckets(std::make_unique<set_type[]>(n)) {}

    [[nodiscard]] std::size_t index_of(Key k) const { return hash(k) % nbuckets; }
    set_type& bucket_for(Key k) { return buckets[index_of(k)]; }

    std::atomic<Table*> ht_new{nullptr};
    std::atomic<bool> migrating{false};
    const std::size_t nbuckets;
    const HashFn hash;
    std::unique_ptr<set_type[]> buckets;
  };

  // Three-stage probe; caller holds a read guard.
  const node_type* locate(Key key) {
    Table* ht = current_.load(std::memory_order_acquire);
    typename set_type::snapshot_type snap;
    DHASH_SCHEDULE_POINT(SchedulePoint::kLookupBeforeOldFind, key);
    if (ht->bucket_for(key).find(key, snap) == FindResult::kFound) return snap.cur;
    Table* htn = ht->ht_new.load(std::memory_order_acquire);
    if (htn == nullptr) return nullptr;
    DHASH_SCHEDULE_POINT(SchedulePoint::kLookupBeforeCurCheck, key);
    if (node_type* cur = rebuild_cur_.load(std::memory_order_acquire);
        cur != nullptr && cur->key == key &&
        (cur->next.load(std::memory_order_acquire) & kLogicallyRemoved) == 0)
      return cur;
    DHASH_SCHEDULE_POINT(SchedulePoint::kLookupBeforeNewFind, key);
    if (htn->bucket_for(key).find(key, snap) == FindResult::kFound) return snap.cur;
    return nullptr;
  }

  bool hazard_node_holds(Key key) const {
    const node_type* cur = rebuild_cur_.load(std::memory_order_acquire);
    return cur != nullptr && cur->key == key &&
           (cur->next.load(std::memory_order_acquire) & kLogicallyRemoved) == 0;
  }

  DeleteResult removed() {
    size_.add(-1);
    return DeleteResult::kSuccess;
  }

  static void prefetch_first(set_type& bucket) {
    if constexpr (requires { bucket.head(); })
      __builtin_prefetch(node_of<node_type>(bucket.head().load(std::memory_order_relaxed)));
  }

  // Moves every node of `bucket` into `to`, head first. The rebuild thread
  // holds a critical section across each node's hazard period so the node
  // cannot be reclaimed while rebuild_cur may still point at it.
  void distribute(set_type& bucket, Table& to) {
    for (;;) {
      reclaim::ReadGuard guard;
      node_type* node = bucket.first();
      if (node == nullptr) return;
      const Key key = node->key;
      // The next node and the destination bucket are cold on large tables.
      __builtin_prefetch(node_of<node_type>(node->next.load(std::memory_order_relaxed)));
      set_type& dest = to.bucket_for(key);
      __builtin_prefetch(&dest);
      DHASH_SCHEDULE_POINT(SchedulePoint::kRebuildBeforeWriteCur, key);
      rebuild_cur_.store(node, std::memory_order_release);
      DHASH_SCHEDULE_POINT(SchedulePoint::kRebuildAfterWriteCur, key);
      const Removal<node_type> removal = bucket.remove(key, kBeingDistributed);
      if (!removal.ok()) {
        // Deleted concurrently; the deleter owns reclamation.
        rebuild_cur_.store(nullptr, std::memory_order_release);
        continue;
      }
      DHASH_SCHEDULE_POINT(SchedulePoint::kRebuildAfterOldDelete, key);
      DHASH_DEBUG_CHECK(removal.node == node, "distributed an unexpected node");
      prepare_for_reuse(*removal.node);
      if (dest.insert(removal.node) == InsertResult::kExists)
        reclaim::defer_free(removal.node, &delete_node<node_type>);
      DHASH_SCHEDULE_POINT(SchedulePoint::kRebuildAfterNewInsert, key);
      rebuild_cur_.store(nullptr, std::memory_order_release);
      DHASH_SCHEDULE_POINT(SchedulePoint::kRebuildAfterClearCur, key);
    }
  }

  RebuildContext context() const {
    return {size_.load(), current_.load(std::memory_order_acquire)->nbuckets};
  }

  std::atomic<Table*> current_{nullptr};
  // Node in its hazard period, or null.
  alignas(kCacheLine) std::atomic<node_type*> rebuild_cur_{nullptr};
  std::mutex rebuild_lock_;
  RebuildTrigger trigger_;
  std::atomic<std::uint64_t> rebuilds_{0};
  StripedCounter size_;
};

}  // namespace dhash

#endif  // DHASH_DHASH_HPP

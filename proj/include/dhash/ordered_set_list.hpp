#ifndef DHASH_ORDERED_SET_LIST_HPP
#define DHASH_ORDERED_SET_LIST_HPP

/// \file
/// Lock-free ordered linked list (Michael's algorithm) with reclamation by
/// grace periods instead of hazard pointers and tags.
///
/// Deletion is two-stage: a flag bit in the victim's successor word makes it
/// logically absent, then some traversal swings the predecessor past it.
/// Whoever unlinks a kLogicallyRemoved node hands it to defer_free; nodes
/// flagged kBeingDistributed belong to the rebuilder and are never reclaimed
/// here.

#include <utility>

#include "dhash/bucket_set.hpp"
#include "dhash/reclaim.hpp"
#include "dhash/schedule_point.hpp"

namespace dhash {

/// Live node accounting; allocated - freed is the leak oracle used by tests.
inline StripedCounter g_nodes_allocated;
inline StripedCounter g_nodes_freed;

[[nodiscard]] inline std::int64_t live_nodes() noexcept {
  return g_nodes_allocated.load() - g_nodes_freed.load();
}

template <class V>
struct alignas(8) ListNode {
  using value_type = V;

  ListNode(Key k, V v) : key(k), value(std::move(v)) { g_nodes_allocated.add(1); }
  ~ListNode() { g_nodes_freed.add(1); }
  ListNode(const ListNode&) = delete;
  ListNode& operator=(const ListNode&) = delete;

  std::atomic<std::uintptr_t> next{0};
  const Key key;
  const V value;
};

template <class Node>
[[nodiscard]] inline Node* node_of(std::uintptr_t word) noexcept {
  return reinterpret_cast<Node*>(word & ~kTagBits);
}

template <class Node>
[[nodiscard]] inline std::uintptr_t word_of(const Node* n) noexcept {
  return reinterpret_cast<std::uintptr_t>(n);
}

/// Sets `flag` atomically; returns the mark bits seen before.
template <class Node>
std::uintptr_t set_flag(Node& n, std::uintptr_t flag) noexcept {
  return n.next.fetch_or(flag, std::memory_order_acq_rel) & kMarkBits;
}

/// Clears `flag` atomically; returns the mark bits seen before.
template <class Node>
std::uintptr_t clean_flag(Node& n, std::uintptr_t flag) noexcept {
  return n.next.fetch_and(~flag, std::memory_order_acq_rel) & kMarkBits;
}

/// Readies a surrendered node for reinsertion: drops kBeingDistributed, keeps
/// a concurrently set kLogicallyRemoved, flips the reuse parity.
template <class Node>
void prepare_for_reuse(Node& n) noexcept {
  std::uintptr_t w = n.next.load(std::memory_order_acquire);
  while (!n.next.compare_exchange_weak(w, (w & ~kBeingDistributed) ^ kReuseParity,
                                       std::memory_order_acq_rel,
                                       std::memory_order_acquire)) {
  }
}

template <class Node>
void delete_node(void* p) {
  delete static_cast<Node*>(p);
}

template <class Node>
struct ListSnapshot {
  // Word that links to cur, and the value it held when observed.
  std::atomic<std::uintptr_t>* prev = nullptr;
  std::uintptr_t prev_word = 0;
  Node* cur = nullptr;
  Node* next = nullptr;
  std::uintptr_t cur_word = 0;
};

enum class UnlinkPolicy : std::uint8_t {
  kEager,  // every traversal unlinks marked nodes it passes
  kLazy,   // read-only finds skip marked nodes; only updates unlink
};

template <class V, UnlinkPolicy kPolicy = UnlinkPolicy::kEager>
class BasicOrderedList {
 public:
  using value_type = V;
  using node_type = ListNode<V>;
  using snapshot_type = ListSnapshot<node_type>;

  static constexpr TraversalSafety kTraversal = TraversalSafety::kRevalidateSuccessor;
  static constexpr Distribution kDistribution = Distribution::kReuseNode;
  static constexpr Progress kProgress = Progress::kLockFree;

  BasicOrderedList() = default;
  BasicOrderedList(const BasicOrderedList&) = delete;
  BasicOrderedList& operator=(const BasicOrderedList&) = delete;
  ~BasicOrderedList() { clear_quiescent(); }

  /// Positions `snap` at the first unmarked node with key >= `key`.
  FindResult find(Key key, snapshot_type& snap) {
    return search<kPolicy == UnlinkPolicy::kEager>(key, snap);
  }

  /// Links `node` at its sorted position. On kExists the node is untouched
  /// and still owned by the caller.
  InsertResult insert(node_type* node) {
    const Key key = node->key;
    snapshot_type s;
    for (;;) {
      if (search<true>(key, s) == FindResult::kFound) return InsertResult::kExists;
      std::uintptr_t w = node->next.load(std::memory_order_acquire);
      while (!node->next.compare_exchange_weak(
          w, word_of(s.cur) | (w & (kLogicallyRemoved | kReuseParity)),
          std::memory_order_acq_rel, std::memory_order_acquire)) {
      }
      DHASH_SCHEDULE_POINT(SchedulePoint::kListBeforeInsertCas, key);
      std::uintptr_t expected = s.prev_word;
      if (s.prev->compare_exchange_strong(expected,
                                          word_of(node) | (s.prev_word & kReuseParity),
                                          std::memory_order_acq_rel,
                                          std::memory_order_acquire))
        return InsertResult::kSuccess;
    }
  }

  /// Marks the first unmarked node holding `key` with `flag` and unlinks it.
  /// kLogicallyRemoved nodes are reclaimed after a grace period;
  /// kBeingDistributed nodes come back in Removal::node, already unlinked.
  Removal<node_type> remove(Key key, std::uintptr_t flag) {
    DHASH_DEBUG_CHECK(flag == kLogicallyRemoved || flag == kBeingDistributed,
                      "remove flag must be exactly one mark bit");
    snapshot_type s;
    for (;;) {
      if (search<true>(key, s) == FindResult::kNotFound) return {};
      node_type* cur = s.cur;
      std::uintptr_t cw = s.cur_word;
      DHASH_SCHEDULE_POINT(SchedulePoint::kListBeforeMarkCas, key);
      if (!cur->next.compare_exchange_strong(cw, cw | flag, std::memory_order_acq_rel,
                                             std::memory_order_acquire))
        continue;
      bool unlinked = false;
      if constexpr (kPolicy == UnlinkPolicy::kEager) {
        std::uintptr_t expected = s.prev_word;
        unlinked = s.prev->compare_exchange_strong(
            expected, (cw & ~kTagBits) | (s.prev_word & kReuseParity),
            std::memory_order_acq_rel, std::memory_order_acquire);
        if (unlinked) retire(cur, cw | flag);
      }
      // A cleaning pass over the key's position guarantees the node is gone.
      if (!unlinked) search<true>(key, s);
      return {RemoveStatus::kSuccess, flag == kBeingDistributed ? cur : nullptr};
    }
  }

  /// First unmarked node, unlinking marked ones in front of it.
  node_type* first() {
    snapshot_type s;
    search<true>(0, s);
    return s.cur;
  }

  /// Single-threaded walk over every linked node, marked or not.
  template <class F>
  void for_each_linked(F&& visit) const {
    std::uintptr_t w = head_.load(std::memory_order_acquire);
    while (const node_type* n = node_of<node_type>(w)) {
      const std::uintptr_t nw = n->next.load(std::memory_order_acquire);
      visit(*n, nw & kMarkBits);
      w = nw;
    }
  }

  /// Frees every linked node. No concurrent access allowed.
  void clear_quiescent() {
    std::uintptr_t w = head_.exchange(0, std::memory_order_acq_rel);
    while (node_type* n = node_of<node_type>(w)) {
      w = n->next.load(std::memory_order_relaxed);
      delete n;
    }
  }

  std::atomic<std::uintptr_t>& head() noexcept { return head_; }

 private:
  static void retire(node_type* n, std::uintptr_t observed) {
    if ((observed & kBeingDistributed) == 0)
      reclaim::defer_free(n, &delete_node<node_type>);
  }

  template <bool kClean>
  FindResult search(Key key, snapshot_type& s) {
  retry:
    std::atomic<std::uintptr_t>* prev = &head_;
    std::uintptr_t pw = prev->load(std::memory_order_acquire);
    for (;;) {
      node_type* cur = node_of<node_type>(pw);
      if (cur == nullptr) {
        s = {prev, pw, nullptr, nullptr, 0};
        return FindResult::kNotFound;
      }
      DHASH_SCHEDULE_POINT(SchedulePoint::kListAdvance, key);
      const std::uintptr_t cw = cur->next.load(std::memory_order_acquire);
      // prev must still link to cur with the same tag bits, otherwise cur may
      // have been unlinked or moved to another list since we arrived.
      if (prev->load(std::memory_order_acquire) != pw) goto retry;
      if ((cw & kMarkBits) != 0) {
        if constexpr (kClean) {
          DHASH_SCHEDULE_POINT(SchedulePoint::kListBeforeUnlinkCas, key);
          const std::uintptr_t desired = (cw & ~kTagBits) | (pw & kReuseParity);
          if (!prev->compare_exchange_strong(pw, desired, std::memory_order_acq_rel,
                                             std::memory_order_acquire))
            goto retry;
          retire(cur, cw);
          pw = desired;
        } else {
          prev = &cur->next;
          pw = cw;
        }
        continue;
      }
      if (cur->key >= key) {
        s = {prev, pw, cur, node_of<node_type>(cw), cw};
        return cur->key == key ? FindResult::kFound : FindResult::kNotFound;
      }
      prev = &cur->next;
      pw = cw;
    }
  }

  std::atomic<std::uintptr_t> head_{0};
};

template <class V>
using OrderedSetList = BasicOrderedList<V, UnlinkPolicy::kEager>;

/// Same algorithm, but lookups never help with physical deletion.
template <class V>
using LazyUnlinkList = BasicOrderedList<V, UnlinkPolicy::kLazy>;

static_assert(BucketSet<OrderedSetList<std::uint64_t>>);
static_assert(BucketSet<LazyUnlinkList<std::uint64_t>>);

}  // namespace dhash

#endif  // DHASH_ORDERED_SET_LIST_HPP

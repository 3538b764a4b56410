#ifndef DHASH_BUCKET_SET_HPP
#define DHASH_BUCKET_SET_HPP

/// \file
/// The seam between the table and the per-bucket set algorithm.
///
/// A bucket set stores ListNode<V> objects ordered by key and supports
///   - find(key, snapshot)          -> FindResult
///   - insert(node)                 -> InsertResult
///   - remove(key, flag)            -> Removal<node>
///   - first()                      -> first unmarked node (rebuild cursor)
/// plus single-threaded traversal for census and teardown. All concurrent
/// operations require the caller to hold a reclaim::ReadGuard.
///
/// remove() with kBeingDistributed must leave the node physically unlinked
/// and hand it back without reclaiming it. Each implementation declares how
/// it keeps traversals correct when rebuild reuses a node it is standing on,
/// how it distributes nodes, and its progress guarantee.

#include <concepts>
#include <cstdint>
#include <functional>

#include "dhash/config.hpp"

namespace dhash {

// Low bits of a node's successor word.
inline constexpr std::uintptr_t kLogicallyRemoved = std::uintptr_t{1} << 0;
inline constexpr std::uintptr_t kBeingDistributed = std::uintptr_t{1} << 1;
// Flipped each time rebuild re-links a node, so comparisons against a word
// read before the move always fail.
inline constexpr std::uintptr_t kReuseParity = std::uintptr_t{1} << 2;
inline constexpr std::uintptr_t kMarkBits = kLogicallyRemoved | kBeingDistributed;
inline constexpr std::uintptr_t kTagBits = kMarkBits | kReuseParity;

enum class FindResult : std::uint8_t { kFound, kNotFound };
enum class InsertResult : std::uint8_t { kSuccess, kExists };
enum class RemoveStatus : std::uint8_t { kSuccess, kNotFound };

template <class Node>
struct Removal {
  RemoveStatus status = RemoveStatus::kNotFound;
  // Set only for kBeingDistributed removals: the unlinked, unreclaimed node.
  Node* node = nullptr;

  [[nodiscard]] bool ok() const noexcept { return status == RemoveStatus::kSuccess; }
};

enum class TraversalSafety : std::uint8_t {
  kRevalidateSuccessor,  // advance re-checks the departed node's word
  kBucketSentinel,       // list ends carry bucket identity
};

enum class Distribution : std::uint8_t {
  kReuseNode,  // remove(kBeingDistributed) surrenders the node for reinsertion
  kCopyNode,   // rebuild must allocate a replacement node
};

enum class Progress : std::uint8_t { kLockFree, kWaitFree };

template <class S>
concept BucketSet = requires(S& s, const S& cs, typename S::node_type* node,
                             Key key, typename S::snapshot_type& snap,
                             std::function<void(const typename S::node_type&,
                                                std::uintptr_t)> visit) {
  typename S::value_type;
  typename S::node_type;
  typename S::snapshot_type;
  { s.find(key, snap) } -> std::same_as<FindResult>;
  { s.insert(node) } -> std::same_as<InsertResult>;
  { s.remove(key, kLogicallyRemoved) } -> std::same_as<Removal<typename S::node_type>>;
  { s.first() } -> std::same_as<typename S::node_type*>;
  { cs.for_each_linked(visit) };
  { s.clear_quiescent() };
  { S::kTraversal } -> std::convertible_to<TraversalSafety>;
  { S::kDistribution } -> std::convertible_to<Distribution>;
  { S::kProgress } -> std::convertible_to<Progress>;
};

}  // namespace dhash

#endif  // DHASH_BUCKET_SET_HPP

#include <gtest/gtest.h>

#include "dhash/conformance.hpp"
#include "dhash/dhash.hpp"

namespace {

using dhash::Key;

// Seeded fault: distribution removal reclaims the node instead of handing it
// back.
template <class V>
class ReclaimsDistributed : public dhash::OrderedSetList<V> {
  using Base = dhash::OrderedSetList<V>;

 public:
  dhash::Removal<typename Base::node_type> remove(Key key, std::uintptr_t flag) {
    auto r = Base::remove(key, flag);
    if (r.node != nullptr) {
      dhash::reclaim::defer_free(r.node, &dhash::delete_node<typename Base::node_type>);
      r.node = nullptr;
    }
    return r;
  }
};

// Seeded fault: find scans without using the order, so a miss leaves the
// snapshot at the head instead of the lower bound.
template <class V>
class UnorderedFind : public dhash::OrderedSetList<V> {
  using Base = dhash::OrderedSetList<V>;

 public:
  dhash::FindResult find(Key key, typename Base::snapshot_type& snap) {
    auto* head = dhash::node_of<typename Base::node_type>(
        this->head().load(std::memory_order_acquire));
    for (auto* n = head; n != nullptr;
         n = dhash::node_of<typename Base::node_type>(n->next.load())) {
      if (n->key == key && (n->next.load() & dhash::kMarkBits) == 0) {
        snap.cur = n;
        return dhash::FindResult::kFound;
      }
    }
    snap.cur = head;
    return dhash::FindResult::kNotFound;
  }
};

static_assert(dhash::BucketSet<ReclaimsDistributed<std::uint64_t>>);
static_assert(dhash::BucketSet<UnorderedFind<std::uint64_t>>);

void print(const dhash::ConformanceReport& r) {
  for (const auto& c : r.clauses)
    std::printf("  %-20s %s  %s\n", c.name.c_str(),
                c.skipped ? "SKIP" : (c.passed ? "PASS" : "FAIL"), c.detail.c_str());
}

TEST(Conformance, ShippedListPasses) {
  const auto r = dhash::conformance_suite<dhash::OrderedSetList<std::uint64_t>>();
  print(r);
  EXPECT_TRUE(r.passed());
  for (const auto& c : r.clauses) EXPECT_FALSE(c.skipped) << c.name;
}

TEST(Conformance, LazyUnlinkVariantPasses) {
  const auto r = dhash::conformance_suite<dhash::LazyUnlinkList<std::uint64_t>>();
  print(r);
  EXPECT_TRUE(r.passed());
}

TEST(Conformance, ReclaimingMutantFailsFlagClause) {
  const auto r = dhash::conformance_suite<ReclaimsDistributed<std::uint64_t>>();
  print(r);
  EXPECT_FALSE(r.passed());
  ASSERT_NE(r.clause("flag-semantics"), nullptr);
  EXPECT_FALSE(r.clause("flag-semantics")->passed);
  EXPECT_TRUE(r.clause("snapshot-contract")->passed);
}

TEST(Conformance, UnorderedFindMutantFailsSnapshotClause) {
  const auto r = dhash::conformance_suite<UnorderedFind<std::uint64_t>>();
  print(r);
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.clause("snapshot-contract")->passed);
  EXPECT_TRUE(r.clause("flag-semantics")->passed);
}

TEST(Conformance, TableWorksOverBothConformantSets) {
  dhash::DHash<std::uint64_t, dhash::LazyUnlinkList> t(4, dhash::hashes::identity());
  for (Key k = 0; k < 100; ++k) t.insert(k, k);
  t.rebuild(7, dhash::hashes::multiplicative(dhash::hashes::kAltMultiplier));
  EXPECT_EQ(t.census_quiescent().size(), 100U);
}

}  // namespace

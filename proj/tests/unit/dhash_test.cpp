#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <latch>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "dhash/dhash.hpp"

namespace {

using dhash::DeleteResult;
using dhash::InsertResult;
using dhash::Key;
using dhash::LookupResult;
using dhash::RebuildResult;

template <class T>
class DHashTest : public ::testing::Test {};

using Tables = ::testing::Types<dhash::DHash<std::uint64_t, dhash::OrderedSetList>,
                                dhash::DHash<std::uint64_t, dhash::LazyUnlinkList>>;
TYPED_TEST_SUITE(DHashTest, Tables);

dhash::HashFn mod_hash() { return dhash::hashes::identity(); }

TEST(DHash, ZeroBucketsRejected) {
  EXPECT_THROW(dhash::DHash<>(0, mod_hash()), std::invalid_argument);
  dhash::DHash<> t(2, mod_hash());
  EXPECT_THROW(t.rebuild(0, mod_hash()), std::invalid_argument);
}

TYPED_TEST(DHashTest, FiveKeysMoveFromTwoToThreeBuckets) {
  TypeParam t(2, mod_hash());
  const std::vector<Key> keys{10, 11, 12, 13, 14};  // a..e
  for (Key k : keys) EXPECT_EQ(t.insert(k, k), InsertResult::kSuccess);
  for (Key k : keys) EXPECT_EQ(t.bucket_of_quiescent(k), k % 2);
  EXPECT_EQ(t.rebuild(3, mod_hash()), RebuildResult::kSuccess);
  EXPECT_EQ(t.bucket_count(), 3U);
  EXPECT_EQ(t.census_quiescent(), keys);
  for (Key k : keys) {
    EXPECT_EQ(t.bucket_of_quiescent(k), k % 3);
    EXPECT_EQ(t.lookup(k), LookupResult::kFound);
  }
  EXPECT_TRUE(t.placement_ok_quiescent());
}

TYPED_TEST(DHashTest, SequentialOracle) {
  TypeParam t(16, mod_hash());
  std::set<Key> oracle;
  std::mt19937_64 rng(3);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    const Key k = rng() % 1024;
    const auto r = rng() % 100;
    if (r < 50) {
      mismatches += (t.lookup(k) == LookupResult::kFound) != (oracle.count(k) == 1);
    } else if (r < 75) {
      mismatches += (t.insert(k, k) == InsertResult::kSuccess) != oracle.insert(k).second;
    } else {
      mismatches += (t.remove(k) == DeleteResult::kSuccess) != (oracle.erase(k) == 1);
    }
    if (i % 10000 == 9999) t.rebuild(8 + rng() % 64, dhash::hashes::multiplicative(rng()));
  }
  EXPECT_EQ(mismatches, 0U);
  EXPECT_EQ(t.census_quiescent(), std::vector<Key>(oracle.begin(), oracle.end()));
  EXPECT_EQ(t.size(), static_cast<std::int64_t>(oracle.size()));
}

TYPED_TEST(DHashTest, GuardedReadSeesValue) {
  TypeParam t(4, mod_hash());
  t.insert(5, 25);
  EXPECT_EQ(t.guarded_read(5, [](const std::uint64_t& v) { return v + 1; }), 26U);
  EXPECT_FALSE(t.guarded_read(6, [](const std::uint64_t& v) { return v; }).has_value());
  dhash::reclaim::ReadGuard g;
  const auto* n = t.find_node(g, 5);
  ASSERT_NE(n, nullptr);
  EXPECT_EQ(n->value, 25U);
}

TYPED_TEST(DHashTest, TriggerDecidesWhetherRebuildRuns) {
  TypeParam t(4, mod_hash());
  t.set_rebuild_trigger(dhash::load_factor_above(2.0));
  for (Key k = 0; k < 8; ++k) t.insert(k, k);
  EXPECT_EQ(t.rebuild(8, mod_hash()), RebuildResult::kNotRequired);
  EXPECT_EQ(t.bucket_count(), 4U);
  t.insert(8, 8);
  EXPECT_EQ(t.rebuild(8, mod_hash()), RebuildResult::kSuccess);
  EXPECT_EQ(t.bucket_count(), 8U);
}

TEST(DHash, ConcurrentRebuildIsBusy) {
  dhash::DHash<> t(4, mod_hash());
  std::latch in_trigger(1);
  std::latch release(1);
  t.set_rebuild_trigger([&](const dhash::RebuildContext&) {
    in_trigger.count_down();
    release.wait();
    return true;
  });
  std::thread first([&] { EXPECT_EQ(t.rebuild(8, mod_hash()), RebuildResult::kSuccess); });
  in_trigger.wait();
  EXPECT_EQ(t.rebuild(16, mod_hash()), RebuildResult::kBusy);
  release.count_down();
  first.join();
  EXPECT_EQ(t.bucket_count(), 8U);
}

TYPED_TEST(DHashTest, ReadersNeverMissStableKeysDuringRebuild) {
  TypeParam t(64, mod_hash());
  constexpr Key kKeys = 4096;
  for (Key k = 0; k < kKeys; ++k) t.insert(k, k);
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> misses{0};
  std::atomic<std::uint64_t> lookups{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r)
    readers.emplace_back([&, r] {
      std::mt19937_64 rng(r);
      std::uint64_t local = 0;
      while (!stop) {
        misses += t.lookup(rng() % kKeys) != LookupResult::kFound;
        ++local;
      }
      lookups += local;
    });
  const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(400);
  for (int i = 0; std::chrono::steady_clock::now() < until; ++i)
    t.rebuild(i % 2 ? 64 : 97, dhash::hashes::multiplicative(dhash::hashes::kAltMultiplier + i));
  stop = true;
  for (auto& th : readers) th.join();
  EXPECT_EQ(misses.load(), 0U);
  EXPECT_GT(lookups.load(), 0U);
  EXPECT_EQ(t.census_quiescent().size(), kKeys);
}

TYPED_TEST(DHashTest, UpdatesDuringRebuildKeepExactCensus) {
  // Each worker owns a key range, so its final contents are known exactly.
  TypeParam t(32, mod_hash());
  constexpr int kWorkers = 3;
  constexpr Key kRange = 512;
  std::atomic<bool> stop{false};
  std::vector<std::set<Key>> truth(kWorkers);
  std::vector<std::thread> ws;
  for (int w = 0; w < kWorkers; ++w)
    ws.emplace_back([&, w] {
      std::mt19937_64 rng(100 + w);
      auto& mine = truth[w];
      std::size_t wrong = 0;
      while (!stop) {
        const Key k = w * kRange + rng() % kRange;
        if (rng() % 2) {
          wrong += (t.insert(k, k) == InsertResult::kSuccess) != mine.insert(k).second;
        } else {
          wrong += (t.remove(k) == DeleteResult::kSuccess) != (mine.erase(k) == 1);
        }
        wrong += (t.lookup(k) == LookupResult::kFound) != (mine.count(k) == 1);
      }
      EXPECT_EQ(wrong, 0U);
    });
  const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(400);
  for (int i = 0; std::chrono::steady_clock::now() < until; ++i)
    t.rebuild(16 + (i * 37) % 113, dhash::hashes::multiplicative(i * 2654435761ULL));
  stop = true;
  for (auto& th : ws) th.join();
  std::set<Key> all;
  for (auto& s : truth) all.insert(s.begin(), s.end());
  EXPECT_EQ(t.census_quiescent(), std::vector<Key>(all.begin(), all.end()));
  EXPECT_TRUE(t.placement_ok_quiescent());
}

TEST(DHash, NoLeaksAfterDrain) {
  dhash::reclaim::drain();
  const auto before = dhash::live_nodes();
  {
    dhash::DHash<> t(8, mod_hash());
    for (Key k = 0; k < 1000; ++k) t.insert(k, k);
    for (Key k = 0; k < 1000; k += 3) t.remove(k);
    t.rebuild(33, dhash::hashes::multiplicative(dhash::hashes::kGoldenMultiplier));
    for (Key k = 0; k < 1000; k += 5) t.insert(k, k);
  }
  dhash::reclaim::drain();
  EXPECT_EQ(dhash::live_nodes(), before);
}

}  // namespace

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "dhash/reclaim.hpp"

namespace {

using namespace std::chrono_literals;
namespace rc = dhash::reclaim;

TEST(Reclaim, NestedSectionsTrackDepth) {
  EXPECT_FALSE(rc::in_critical_section());
  {
    rc::ReadGuard outer;
    EXPECT_TRUE(rc::in_critical_section());
    {
      rc::ReadGuard inner;
      EXPECT_TRUE(rc::in_critical_section());
    }
    EXPECT_TRUE(rc::in_critical_section());
  }
  EXPECT_FALSE(rc::in_critical_section());
}

TEST(Reclaim, ExplicitReleaseEndsSection) {
  auto g = rc::enter_critical();
  EXPECT_TRUE(g.active());
  rc::exit_critical(g);
  EXPECT_FALSE(g.active());
  EXPECT_FALSE(rc::in_critical_section());
}

TEST(Reclaim, GracePeriodWaitsForPreexistingReader) {
  std::atomic<bool> inside{false};
  std::atomic<bool> leave{false};
  std::atomic<bool> reader_done{false};
  std::thread reader([&] {
    rc::ReadGuard g;
    inside = true;
    while (!leave) std::this_thread::sleep_for(1ms);
    reader_done = true;
  });
  while (!inside) std::this_thread::yield();

  std::atomic<bool> gp_done{false};
  std::thread writer([&] {
    rc::wait_for_readers();
    gp_done = true;
    EXPECT_TRUE(reader_done.load());
  });
  std::this_thread::sleep_for(30ms);
  EXPECT_FALSE(gp_done.load());
  leave = true;
  writer.join();
  reader.join();
  EXPECT_TRUE(gp_done.load());
}

TEST(Reclaim, GracePeriodIgnoresLaterReaders) {
  std::atomic<bool> stop{false};
  std::thread churn([&] {
    while (!stop) {
      rc::ReadGuard g;
      std::this_thread::yield();
    }
  });
  for (int i = 0; i < 20; ++i) rc::wait_for_readers();
  stop = true;
  churn.join();
}

struct Tracked {
  static inline std::atomic<int> freed{0};
  std::atomic<bool>* observed_by_reader;
  static void release(void* p) {
    auto* t = static_cast<Tracked*>(p);
    freed.fetch_add(1);
    delete t;
  }
};

TEST(Reclaim, DeferredCallbackRunsOnlyAfterReadersLeave) {
  Tracked::freed = 0;
  std::atomic<bool> inside{false};
  std::atomic<bool> leave{false};
  std::thread reader([&] {
    rc::ReadGuard g;
    inside = true;
    while (!leave) std::this_thread::sleep_for(1ms);
  });
  while (!inside) std::this_thread::yield();
  rc::defer_free(new Tracked{}, &Tracked::release);
  std::this_thread::sleep_for(50ms);
  EXPECT_EQ(Tracked::freed.load(), 0);
  leave = true;
  reader.join();
  rc::drain();
  EXPECT_EQ(Tracked::freed.load(), 1);
}

TEST(Reclaim, DrainRunsEverythingFromManyThreads) {
  Tracked::freed = 0;
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t)
    ts.emplace_back([] {
      for (int i = 0; i < 1000; ++i) {
        rc::ReadGuard g;
        rc::defer_free(new Tracked{}, &Tracked::release);
      }
    });
  for (auto& t : ts) t.join();
  rc::drain();
  EXPECT_EQ(Tracked::freed.load(), 4000);
  const auto st = rc::Domain::global().stats();
  EXPECT_GE(st.callbacks_run, 4000U);
  EXPECT_GE(st.grace_periods, 1U);
}

#ifdef DHASH_DEBUG_CHECKS
TEST(ReclaimDeathTest, WaitInsideSectionAborts) {
  ::testing::FLAGS_gtest_death_test_style = "threadsafe";
  EXPECT_DEATH(
      {
        rc::ReadGuard g;
        rc::wait_for_readers();
      },
      "critical section");
}
#endif

}  // namespace

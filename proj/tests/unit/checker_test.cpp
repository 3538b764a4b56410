#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dhash/checker/hazard.hpp"
#include "dhash/checker/lemmas.hpp"
#include "dhash/checker/linearizability.hpp"
#include "dhash/checker/recorder.hpp"

namespace {

using namespace dhash::checker;
using Status = Verdict::Status;

History parse(const std::string& text) {
  std::istringstream in(text);
  return read_history(in);
}

TEST(History, TextRoundTrip) {
  const History h = parse(
      "initial 1 2\n"
      "rebuild 3 9\n"
      "1 0 invoke insert 3\n"
      "2 1 invoke lookup 3\n"
      "4 0 response insert 3 ok\n"
      "5 1 response lookup 3 fail\n");
  std::stringstream out;
  write_history(out, h);
  EXPECT_EQ(read_history(out), h);
  EXPECT_TRUE(well_formed(h));
  EXPECT_EQ(operations(h).size(), 2U);
}

TEST(History, MalformedHistoriesDetected) {
  std::string why;
  EXPECT_FALSE(well_formed(parse("1 0 invoke insert 1\n2 0 invoke insert 2\n"), &why));
  EXPECT_FALSE(well_formed(parse("1 0 response insert 1 ok\n"), &why));
  EXPECT_FALSE(well_formed(parse("1 0 invoke insert 1\n2 0 response lookup 1 ok\n"), &why));
  EXPECT_FALSE(well_formed(parse("1 0 invoke insert 1\n"), &why));
  EXPECT_EQ(check_linearizable(parse("1 0 invoke insert 1\n")).status, Status::kMalformed);
}

TEST(Linearizability, SequentialHistoryHasIdentityWitness) {
  const History h = parse(
      "initial\n"
      "1 0 invoke insert 1\n2 0 response insert 1 ok\n"
      "3 1 invoke lookup 1\n4 1 response lookup 1 ok\n"
      "5 0 invoke delete 1\n6 0 response delete 1 ok\n"
      "7 1 invoke insert 1\n8 1 response insert 1 ok\n");
  const auto v = check_linearizable(h);
  ASSERT_EQ(v.status, Status::kLinearizable);
  const auto ops = operations(h);
  ASSERT_EQ(v.witness.size(), ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) EXPECT_EQ(v.witness[i].invoked, ops[i].invoked);
}

TEST(Linearizability, StaleLookupAfterInsertIsViolation) {
  const History h = parse(
      "1 0 invoke insert 7\n2 0 response insert 7 ok\n"
      "3 1 invoke lookup 5\n4 1 response lookup 5 fail\n"
      "5 1 invoke lookup 7\n6 1 response lookup 7 fail\n");
  const auto v = check_linearizable(h);
  ASSERT_EQ(v.status, Status::kViolation);
  ASSERT_EQ(v.violation.size(), 2U);  // the insert and the stale lookup
  EXPECT_EQ(v.violation[0].op, SetOp::kInsert);
  EXPECT_EQ(v.violation[1].op, SetOp::kLookup);
  EXPECT_EQ(v.violation[1].key, 7U);
}

TEST(Linearizability, OverlapAllowsEitherOrder) {
  const History h = parse(
      "initial 1\n"
      "1 0 invoke delete 1\n2 1 invoke lookup 1\n"
      "3 0 response delete 1 ok\n4 1 response lookup 1 ok\n");
  EXPECT_EQ(check_linearizable(h).status, Status::kLinearizable);
}

TEST(Linearizability, BudgetExhaustionIsInconclusive) {
  std::ostringstream text;
  // Six overlapping successful inserts of one key: no order works, but every
  // first choice has to be tried before the search can say so.
  std::uint64_t ts = 1;
  for (int t = 0; t < 6; ++t) text << ts++ << ' ' << t << " invoke insert 0\n";
  for (int t = 0; t < 6; ++t) text << ts++ << ' ' << t << " response insert 0 ok\n";
  EXPECT_EQ(check_linearizable(parse(text.str()), 3).status, Status::kInconclusive);
  EXPECT_EQ(check_linearizable(parse(text.str())).status, Status::kViolation);
}

TEST(Linearizability, GoldenCorpus) {
  namespace fs = std::filesystem;
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(DHASH_GOLDEN_DIR)) {
    const auto name = entry.path().filename().string();
    std::ifstream in(entry.path());
    const auto v = check_linearizable(read_history(in));
    if (name.rfind("good_", 0) == 0) {
      EXPECT_EQ(v.status, Status::kLinearizable) << name << ": " << v.message;
      ++seen;
    } else if (name.rfind("bad_", 0) == 0) {
      EXPECT_EQ(v.status, Status::kViolation) << name;
      ++seen;
    }
  }
  EXPECT_GE(seen, 10U);
}

TEST(Recorder, TwoThreadsInsertThenLookupGiveEightEvents) {
  RecordConfig c;
  c.threads = 2;
  c.ops_per_thread = 2;
  c.with_rebuild = false;
  const History h = record_run(c);
  EXPECT_EQ(h.events.size(), 8U);
  EXPECT_TRUE(well_formed(h));
  EXPECT_TRUE(h.rebuilds.empty());
}

TEST(Recorder, RacingThreadsGiveWellFormedLinearizableHistories) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    RecordConfig c;
    c.threads = 2 + seed % 3;
    c.key_space = 1 + seed % 4;
    c.seed = seed;
    const History h = record_run(c);
    std::string why;
    ASSERT_TRUE(well_formed(h, &why)) << why;
    EXPECT_FALSE(h.rebuilds.empty());
    const auto v = check_linearizable(h);
    ASSERT_EQ(v.status, Status::kLinearizable) << "seed " << seed << ": " << v.message;
  }
}

TEST(Recorder, LazyListHistoriesLinearizable) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    RecordConfig c;
    c.seed = seed;
    const auto v = check_linearizable(record_run<dhash::LazyUnlinkList>(c));
    ASSERT_EQ(v.status, Status::kLinearizable) << "seed " << seed << ": " << v.message;
  }
}

TEST(Hazard, InterleavingCount) {
  EXPECT_EQ(interleavings(4, 3).size(), 35U);
  EXPECT_EQ(interleavings(4, 2).size(), 15U);
}

class HazardWindow : public ::testing::TestWithParam<HazardOp> {};

TEST_P(HazardWindow, EveryInterleavingCorrect) {
  const auto report = explore_hazard_window(GetParam());
  EXPECT_GE(report.cases.size(), 15U);
  std::printf("  %zu interleavings, %zu failures\n", report.cases.size(), report.failures());
  for (const auto& c : report.cases) {
    std::string s;
    for (bool b : c.schedule) s += b ? 'R' : 'O';
    EXPECT_TRUE(c.passed) << s << ": " << c.detail;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, HazardWindow,
                         ::testing::Values(HazardOp::kLookup, HazardOp::kDelete,
                                           HazardOp::kInsertPresent, HazardOp::kInsertFresh,
                                           HazardOp::kDoubleDelete),
                         [](const auto& info) {
                           std::string n = to_string(info.param);
                           std::replace(n.begin(), n.end(), '-', '_');
                           return n;
                         });

TEST(Lemmas, ShortRunsPass) {
  StressConfig c;
  c.seconds = 0.5;
  for (auto fn : {&lemma1_stress, &lemma2_stress, &lemma3_stress}) {
    const auto r = fn(c);
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    EXPECT_GT(r.operations, 0U) << r.name;
    EXPECT_GT(r.rebuilds, 0U) << r.name;
  }
}

TEST(Lemmas, RebuildOffIsBaseline) {
  StressConfig c;
  c.seconds = 0.2;
  c.rebuild = false;
  for (auto fn : {&lemma1_stress, &lemma2_stress, &lemma3_stress}) {
    const auto r = fn(c);
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    EXPECT_EQ(r.rebuilds, 0U);
  }
}

}  // namespace

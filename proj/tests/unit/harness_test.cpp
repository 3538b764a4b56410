#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "dhash/harness/runner.hpp"

namespace {

using namespace dhash::harness;

WorkloadConfig small(double seconds = 0.3) {
  WorkloadConfig c;
  c.load_factor = 2;
  c.nbuckets = 4;
  c.workers = 1;
  c.seconds = seconds;
  c.key_range = 0;
  c.pinning = Pinning::kNone;
  return c;
}

TEST(Workload, DefaultKeyRangeIsTenMillion) {
  WorkloadConfig c;
  EXPECT_EQ(c.effective_key_range(), 10'000'000U);
  c.key_range = 0;
  EXPECT_EQ(c.effective_key_range(), 2 * c.prefill_count());
}

TEST(Workload, PrefillCounts) {
  auto c = small();
  Table t(c.nbuckets, primary_hash());
  EXPECT_EQ(prefill(t, c), 8U);
  EXPECT_EQ(t.census_quiescent().size(), 8U);

  c.load_factor = 200;
  c.nbuckets = 1024;
  Table big(c.nbuckets, primary_hash());
  EXPECT_EQ(prefill(big, c), 204800U);
  const auto keys = big.census_quiescent();
  EXPECT_EQ(keys.size(), 204800U);
  EXPECT_LT(keys.back(), c.effective_key_range());
}

TEST(Workload, PrefillBeyondKeyRangeIsAnError) {
  auto c = small();
  c.key_range = 7;
  Table t(c.nbuckets, primary_hash());
  EXPECT_THROW(prefill(t, c), ConfigError);
}

TEST(Workload, ValidationRejectsBadConfigs) {
  auto c = small();
  c.mix = {50, 30, 30};
  EXPECT_THROW(validate(c), ConfigError);
  c = small();
  c.load_factor = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = small();
  c.workers = 0;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_NO_THROW(validate(small()));
}

TEST(Workload, MixParsing) {
  EXPECT_EQ(parse_mix("90,5,5"), (OpMix{90, 5, 5}));
  EXPECT_EQ(parse_mix("34/33/33"), (OpMix{34, 33, 33}));
  EXPECT_THROW(parse_mix("90,5"), ConfigError);
  EXPECT_THROW(parse_mix("90,5,5x"), ConfigError);
}

TEST(Workload, StreamsAreDeterministicPerSeed) {
  auto c = small();
  c.mix = {34, 33, 33};
  OpStream a(c, 2), b(c, 2), other(c, 3);
  std::size_t differ = 0;
  std::array<int, 3> kinds{};
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differ += !(x == other.next());
    ++kinds[static_cast<int>(x.kind)];
    EXPECT_LT(x.key, c.effective_key_range());
  }
  EXPECT_GT(differ, 9000U);
  for (int k : kinds) EXPECT_NEAR(k, 3333, 300);
}

TEST(Pinning, FewestLoadedCoreWins) {
  CorePlanner four({0, 1, 2, 3});
  std::set<int> used;
  for (int i = 0; i < 4; ++i) used.insert(four.assign());
  EXPECT_EQ(used.size(), 4U);

  CorePlanner eight({0, 1, 2, 3});
  for (int i = 0; i < 8; ++i) eight.assign();
  for (unsigned l : eight.load()) EXPECT_EQ(l, 2U);
}

TEST(Pinning, SpreadsOverCoresBeforeSiblings) {
  // cpu0/cpu2 share core 0, cpu1/cpu3 share core 1.
  const std::vector<CpuInfo> cpus{{0, 0, 0}, {1, 0, 1}, {2, 0, 0}, {3, 0, 1}};
  EXPECT_EQ(performance_first_order(cpus), (std::vector<int>{0, 1, 2, 3}));
  const std::vector<CpuInfo> same_core{{0, 0, 0}, {1, 0, 0}, {2, 0, 1}, {3, 0, 1}};
  EXPECT_EQ(performance_first_order(same_core), (std::vector<int>{0, 2, 1, 3}));
}

TEST(Pinning, UnsupportedFallsBackUnpinned) {
  Placement none(Pinning::kNone);
  EXPECT_EQ(none.pin_worker(), -1);
  EXPECT_FALSE(none.pinned());
  EXPECT_FALSE(none.note().empty());
}

TEST(Runner, LookupOnlyRunCountsOnlyLookups) {
  auto c = small();
  c.mix = {100, 0, 0};
  const auto r = run(c);
  const auto t = r.totals();
  EXPECT_GT(t.lookups, 0U);
  EXPECT_EQ(t.inserts, 0U);
  EXPECT_EQ(t.deletes, 0U);
  EXPECT_EQ(r.rebuilds, 0U);
  EXPECT_EQ(r.final_census, 8);
}

TEST(Runner, ContinuousRebuildKeepsPopulationSteady) {
  auto c = small(1.0);
  c.nbuckets = 512;
  c.workers = 2;
  c.rebuild = RebuildMode::kContinuous;
  c.pinning = Pinning::kPerformanceFirst;
  const auto r = run(c);
  EXPECT_GT(r.rebuilds, 0U);
  EXPECT_EQ(r.rebuild_seconds.size(), r.rebuilds);
  const double target = static_cast<double>(c.prefill_count());
  EXPECT_NEAR(static_cast<double>(r.final_census), target, 0.05 * target);
  ASSERT_EQ(r.threads.size(), 2U);
  // Conservation: counts balance against census.
  const auto t = r.totals();
  EXPECT_EQ(static_cast<std::int64_t>(r.prefilled + t.insert_success - t.delete_success),
            r.final_census);
}

ThroughputReport sample_report() {
  ThroughputReport r;
  r.config = small();
  r.config.mix = {80, 10, 10};
  r.config.rebuild = RebuildMode::kContinuous;
  r.elapsed_seconds = 1.0000123456789;
  r.threads = {{0, 3, 10, 7, 2, 1, 2, 1}, {1, -1, 11, 5, 3, 3, 1, 0}};
  r.rebuilds = 3;
  r.rebuild_seconds = {0.0125, 0.25 / 3, 1e-7};
  r.final_census = 9;
  r.prefilled = 8;
  r.pinned = true;
  r.pin_note = "odd, \"quoted\" note";
  r.host = "box";
  r.hardware_threads = 4;
  return r;
}

TEST(Report, CsvHasHeaderSummaryAndThreadRows) {
  std::stringstream ss;
  emit_report(ss, sample_report(), ReportFormat::kCsv);
  std::vector<std::string> lines;
  for (std::string l; std::getline(ss, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 4U);
  EXPECT_EQ(lines[0].rfind("kind,thread,cpu,", 0), 0U);
  EXPECT_EQ(lines[1].rfind("summary,-1,", 0), 0U);
  EXPECT_EQ(lines[2].rfind("thread,0,3,", 0), 0U);
  EXPECT_EQ(lines[3].rfind("thread,1,-1,", 0), 0U);
}

TEST(Report, CsvRoundTrip) {
  const auto r = sample_report();
  std::stringstream ss;
  write_csv(ss, r);
  EXPECT_EQ(read_csv(ss), r);
}

TEST(Report, JsonMirrorsCsv) {
  const auto r = sample_report();
  std::stringstream csv;
  write_csv(csv, r);
  const auto from_csv = read_csv(csv);
  const auto from_js = from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(from_js, from_csv);
  // Summary totals in JSON equal the sum of thread rows.
  const auto j = to_json(r);
  EXPECT_EQ(j["summary"]["lookups"].get<std::uint64_t>(), 21U);
  EXPECT_EQ(j["summary"]["ops"].get<std::uint64_t>(), r.totals().ops());
}

TEST(Report, TextSummaryMentionsThroughput) {
  std::stringstream ss;
  emit_report(ss, sample_report(), ReportFormat::kText);
  EXPECT_NE(ss.str().find("Mops/s"), std::string::npos);
  EXPECT_NE(ss.str().find("thread 1"), std::string::npos);
}

TEST(Report, MalformedCsvRejected) {
  std::stringstream bad("kind,thread\nsummary,1\n");
  EXPECT_THROW(read_csv(bad), ReportParseError);
}

TEST(MeasureRebuild, ProducesTimingsPerCount) {
  auto c = small();
  c.workers = 0;
  const auto timings = measure_rebuild(c, {0, 1000}, 3);
  ASSERT_EQ(timings.size(), 2U);
  EXPECT_EQ(timings[1].nodes, 1000U);
  EXPECT_EQ(timings[1].buckets, 500U);
  EXPECT_EQ(timings[1].samples.size(), 3U);
  EXPECT_GT(timings[1].mean_seconds, 0.0);
}

}  // namespace

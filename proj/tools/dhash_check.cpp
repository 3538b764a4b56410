// Correctness checks. Every run prints one JSON object per line; the last
// line is the overall summary. Exit status is 1 if anything failed.
//
//   dhash_check check histories [--count N] [--seed S] [--lazy]
//   dhash_check check files PATH...
//   dhash_check stress lemma1|lemma2|lemma3 --seconds N --seed S [--runs R]
//   dhash_check hazard

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "dhash/checker/hazard.hpp"
#include "dhash/checker/lemmas.hpp"
#include "dhash/checker/linearizability.hpp"
#include "dhash/checker/recorder.hpp"

namespace c = dhash::checker;
using nlohmann::json;

namespace {

int finish(json summary) {
  const bool ok = summary.value("passed", false);
  std::cout << summary.dump() << std::endl;
  return ok ? 0 : 1;
}

int check_histories(unsigned count, std::uint64_t seed, bool lazy, bool rebuild) {
  std::uint64_t lin = 0, bad = 0, inconclusive = 0, max_states = 0;
  for (unsigned i = 0; i < count; ++i) {
    c::RecordConfig rc;
    rc.seed = seed + i;
    rc.threads = 2 + static_cast<unsigned>(i % 3);
    rc.ops_per_thread = 4 + static_cast<unsigned>(i % 5);
    rc.key_space = 1 + static_cast<unsigned>((i / 3) % 4);
    rc.with_rebuild = rebuild;
    const c::History h = lazy ? c::record_run<dhash::LazyUnlinkList>(rc) : c::record_run(rc);
    const c::Verdict v = c::check_linearizable(h);
    max_states = std::max(max_states, v.explored);
    switch (v.status) {
      case c::Verdict::Status::kLinearizable: ++lin; break;
      case c::Verdict::Status::kInconclusive: ++inconclusive; break;
      default:
        ++bad;
        std::cout << json{{"event", "violation"}, {"seed", rc.seed}, {"detail", v.message}}.dump()
                  << std::endl;
        c::write_history(std::cerr, h);
    }
  }
  return finish({{"suite", "histories"},
                 {"histories", count},
                 {"linearizable", lin},
                 {"violations", bad},
                 {"inconclusive", inconclusive},
                 {"max_states", max_states},
                 {"rebuild", rebuild},
                 {"passed", lin == count}});
}

int check_files(const std::vector<std::string>& paths) {
  std::uint64_t lin = 0, bad = 0, other = 0;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) {
      std::cerr << "cannot open " << p << '\n';
      ++other;
      continue;
    }
    const auto v = c::check_linearizable(c::read_history(in));
    std::cout << json{{"file", p}, {"verdict", c::to_string(v.status)}, {"detail", v.message}}.dump()
              << std::endl;
    if (v.status == c::Verdict::Status::kLinearizable) ++lin;
    else if (v.status == c::Verdict::Status::kViolation) ++bad;
    else ++other;
  }
  // For files the verdicts are the output; only unreadable or malformed
  // inputs fail the command.
  return finish({{"suite", "files"},
                 {"linearizable", lin},
                 {"violations", bad},
                 {"other", other},
                 {"passed", other == 0}});
}

int stress(const std::string& which, double seconds, std::uint64_t seed, unsigned runs,
           unsigned threads, unsigned yield_one_in) {
  std::uint64_t failed = 0, ops = 0, violations = 0, rebuilds = 0;
  for (unsigned i = 0; i < runs; ++i) {
    c::StressConfig sc;
    sc.seconds = seconds;
    sc.seed = seed + i;
    sc.threads = threads;
    sc.yield_one_in = yield_one_in;
    const c::StressResult r = which == "lemma1"   ? c::lemma1_stress(sc)
                              : which == "lemma2" ? c::lemma2_stress(sc)
                                                  : c::lemma3_stress(sc);
    std::cout << json{{"suite", r.name},     {"seed", sc.seed},        {"passed", r.passed},
                      {"operations", r.operations}, {"violations", r.violations},
                      {"rebuilds", r.rebuilds},     {"detail", r.detail}}
                     .dump()
              << std::endl;
    failed += !r.passed;
    ops += r.operations;
    violations += r.violations;
    rebuilds += r.rebuilds;
  }
  return finish({{"suite", which},
                 {"runs", runs},
                 {"failed_runs", failed},
                 {"operations", ops},
                 {"violations", violations},
                 {"rebuilds", rebuilds},
                 {"passed", failed == 0}});
}

int hazard() {
#ifdef DHASH_SCHEDULE_POINTS
  std::size_t cases = 0, failures = 0;
  for (auto op : {c::HazardOp::kLookup, c::HazardOp::kDelete, c::HazardOp::kInsertPresent,
                  c::HazardOp::kInsertFresh, c::HazardOp::kDoubleDelete}) {
    const auto rep = c::explore_hazard_window(op);
    cases += rep.cases.size();
    failures += rep.failures();
    json bad = json::array();
    for (const auto& hc : rep.cases)
      if (!hc.passed) {
        std::string s;
        for (bool b : hc.schedule) s += b ? 'R' : 'O';
        bad.push_back({{"schedule", s}, {"detail", hc.detail}});
      }
    std::cout << json{{"op", c::to_string(op)},
                      {"interleavings", rep.cases.size()},
                      {"failures", rep.failures()},
                      {"failed", bad}}
                     .dump()
              << std::endl;
  }
  return finish({{"suite", "hazard"},
                 {"interleavings", cases},
                 {"failures", failures},
                 {"passed", failures == 0 && cases > 0}});
#else
  return finish({{"suite", "hazard"}, {"passed", false}, {"detail", "built without schedule points"}});
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dhash_check: linearizability and lemma checks"};
  app.require_subcommand(1);

  auto* check = app.add_subcommand("check", "linearizability checks");
  check->require_subcommand(1);
  unsigned count = 10000;
  std::uint64_t seed = 1;
  bool lazy = false, no_rebuild = false;
  auto* hist = check->add_subcommand("histories", "record and check random histories");
  hist->add_option("--count", count)->capture_default_str();
  hist->add_option("--seed", seed)->capture_default_str();
  hist->add_flag("--lazy", lazy, "use the lazy-unlink bucket set");
  hist->add_flag("--no-rebuild", no_rebuild, "record without a concurrent rebuild");
  std::vector<std::string> paths;
  auto* files = check->add_subcommand("files", "check history files");
  files->add_option("paths", paths)->required();

  auto* st = app.add_subcommand("stress", "lemma stress suites");
  std::string which;
  double seconds = 10;
  unsigned runs = 1, threads = 4, yield_one_in = 64;
  st->add_option("suite", which)->required()->check(CLI::IsMember({"lemma1", "lemma2", "lemma3"}));
  st->add_option("--seconds", seconds)->capture_default_str();
  st->add_option("--seed", seed)->capture_default_str();
  st->add_option("--runs", runs, "consecutive seeds starting at --seed")->capture_default_str();
  st->add_option("--threads", threads)->capture_default_str();
  st->add_option("--yield-one-in", yield_one_in, "random yield rate at schedule points, 0 = off")
      ->capture_default_str();

  auto* hz = app.add_subcommand("hazard", "exhaustive hazard-window interleavings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (hist->parsed()) return check_histories(count, seed, lazy, !no_rebuild);
  if (files->parsed()) return check_files(paths);
  if (st->parsed()) return stress(which, seconds, seed, runs, threads, yield_one_in);
  if (hz->parsed()) return hazard();
  return 2;
}

// Benchmark driver: timed mixed workloads with optional continuous rebuild.
//
// Exit codes: 0 clean run, 2 invalid configuration, 3 runtime failure.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dhash/harness/runner.hpp"

namespace h = dhash::harness;

int main(int argc, char** argv) {
  CLI::App app{"hashtorture: DHash throughput benchmark"};
  h::WorkloadConfig cfg;
  std::string mix = "90,5,5";
  std::string keys = "10000000";
  std::string rebuild = "off";
  std::string pin = "perf-first";
  std::string format = "text";
  std::string out;
  bool same_hash = false;

  app.add_option("--mix", mix, "lookup,insert,delete percentages")->capture_default_str();
  app.add_option("--load-factor", cfg.load_factor, "prefill nodes per bucket (alpha)")
      ->capture_default_str();
  app.add_option("--buckets", cfg.nbuckets, "initial bucket count (beta)")->capture_default_str();
  app.add_option("--keys", keys, "key range U, or auto for 2*alpha*beta")->capture_default_str();
  app.add_option("--threads", cfg.workers, "worker threads")->capture_default_str();
  app.add_option("--seconds", cfg.seconds, "run duration")->capture_default_str();
  app.add_option("--rebuild", rebuild, "off or continuous")
      ->check(CLI::IsMember({"off", "continuous"}))
      ->capture_default_str();
  app.add_option("--alt-buckets", cfg.alt_buckets, "rebuild target size (0 = 2*buckets)")
      ->capture_default_str();
  app.add_flag("--same-hash", same_hash, "rebuild keeps the hash function");
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--pin", pin, "thread placement")
      ->check(CLI::IsMember({"perf-first", "none"}))
      ->capture_default_str();
  app.add_option("--out", out, "write the report here instead of stdout");
  app.add_option("--format", format, "report format")
      ->check(CLI::IsMember({"csv", "json", "text"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    cfg.mix = h::parse_mix(mix);
    cfg.key_range = keys == "auto" ? 0 : std::stoull(keys);
    cfg.rebuild = rebuild == "off" ? h::RebuildMode::kOff : h::RebuildMode::kContinuous;
    cfg.alt_hash = !same_hash;
    cfg.pinning = pin == "none" ? h::Pinning::kNone : h::Pinning::kPerformanceFirst;
    h::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "hashtorture: " << e.what() << '\n';
    return 2;
  }

  const auto fmt = format == "csv"    ? h::ReportFormat::kCsv
                   : format == "json" ? h::ReportFormat::kJson
                                      : h::ReportFormat::kText;
  try {
    const h::ThroughputReport report = h::run(cfg);
    if (out.empty()) {
      h::emit_report(std::cout, report, fmt);
    } else {
      std::ofstream file(out);
      if (!file) throw std::runtime_error("cannot open " + out);
      h::emit_report(file, report, fmt);
    }
  } catch (const h::ConfigError& e) {
    std::cerr << "hashtorture: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hashtorture: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

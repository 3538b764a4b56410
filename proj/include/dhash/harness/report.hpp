#ifndef DHASH_HARNESS_REPORT_HPP
#define DHASH_HARNESS_REPORT_HPP

/// \file
/// Throughput report and its CSV / JSON / text forms.
///
/// CSV layout, one header line then:
///   - one row with kind=summary: totals, rates, rebuild data, config echo,
///     host info (per-thread columns carry totals, thread = -1)
///   - one row per worker with kind=thread: thread, cpu and counters only;
///     every other column is empty
///
/// Columns, in order:
///   kind, thread, cpu, lookups, lookup_hits, inserts, insert_success,
///   deletes, delete_success, ops, elapsed_seconds, ops_per_second,
///   lookups_per_second, inserts_per_second, deletes_per_second, rebuilds,
///   rebuild_seconds (';'-joined), final_census, prefilled, mix,
///   load_factor, buckets, alt_buckets, keys, threads, seconds, rebuild,
///   alt_hash, seed, pin, pinned, pin_note, host, hardware_threads, rng
///
/// Reals are written with 17 significant digits so parsing reproduces them.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dhash/harness/workload.hpp"

namespace dhash::harness {

struct ThreadCounts {
  int thread = 0;
  int cpu = -1;
  std::uint64_t lookups = 0;
  std::uint64_t lookup_hits = 0;
  std::uint64_t inserts = 0;
  std::uint64_t insert_success = 0;
  std::uint64_t deletes = 0;
  std::uint64_t delete_success = 0;

  [[nodiscard]] std::uint64_t ops() const { return lookups + inserts + deletes; }
  bool operator==(const ThreadCounts&) const = default;
};

struct ThroughputReport {
  WorkloadConfig config;
  double elapsed_seconds = 0;
  std::vector<ThreadCounts> threads;
  std::uint64_t rebuilds = 0;
  std::vector<double> rebuild_seconds;
  std::int64_t final_census = 0;
  std::uint64_t prefilled = 0;
  bool pinned = false;
  std::string pin_note;
  std::string host;
  unsigned hardware_threads = 0;
  std::string rng = kGeneratorName;

  bool operator==(const ThroughputReport&) const = default;

  [[nodiscard]] ThreadCounts totals() const {
    ThreadCounts t;
    t.thread = -1;
    for (const auto& c : threads) {
      t.lookups += c.lookups;
      t.lookup_hits += c.lookup_hits;
      t.inserts += c.inserts;
      t.insert_success += c.insert_success;
      t.deletes += c.deletes;
      t.delete_success += c.delete_success;
    }
    return t;
  }
  [[nodiscard]] double rate(std::uint64_t n) const {
    return elapsed_seconds > 0 ? static_cast<double>(n) / elapsed_seconds : 0.0;
  }
  [[nodiscard]] double ops_per_second() const { return rate(totals().ops()); }
};

enum class ReportFormat : std::uint8_t { kCsv, kJson, kText };

class ReportParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace report_detail {

inline const std::vector<std::string>& columns() {
  static const std::vector<std::string> cols{
      "kind", "thread", "cpu", "lookups", "lookup_hits", "inserts", "insert_success",
      "deletes", "delete_success", "ops", "elapsed_seconds", "ops_per_second",
      "lookups_per_second", "inserts_per_second", "deletes_per_second", "rebuilds",
      "rebuild_seconds", "final_census", "prefilled", "mix", "load_factor", "buckets",
      "alt_buckets", "keys", "threads", "seconds", "rebuild", "alt_hash", "seed", "pin",
      "pinned", "pin_note", "host", "hardware_threads", "rng"};
  return cols;
}

inline std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::vector<std::string> counter_cells(const ThreadCounts& t, const char* kind) {
  return {kind,
          std::to_string(t.thread),
          std::to_string(t.cpu),
          std::to_string(t.lookups),
          std::to_string(t.lookup_hits),
          std::to_string(t.inserts),
          std::to_string(t.insert_success),
          std::to_string(t.deletes),
          std::to_string(t.delete_success),
          std::to_string(t.ops())};
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + real(v[i]);
  return s;
}

inline std::vector<double> split_reals(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ';'))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << quote(cells[i]);
  os << '\n';
}

}  // namespace report_detail

inline void write_csv(std::ostream& os, const ThroughputReport& r) {
  using namespace report_detail;
  const auto& cols = columns();
  write_row(os, cols);
  const ThreadCounts tot = r.totals();
  auto row = counter_cells(tot, "summary");
  const WorkloadConfig& c = r.config;
  const std::vector<std::string> rest{
      real(r.elapsed_seconds), real(r.ops_per_second()), real(r.rate(tot.lookups)),
      real(r.rate(tot.inserts)), real(r.rate(tot.deletes)), std::to_string(r.rebuilds),
      join(r.rebuild_seconds), std::to_string(r.final_census), std::to_string(r.prefilled),
      to_string(c.mix), real(c.load_factor), std::to_string(c.nbuckets),
      std::to_string(c.alt_buckets), std::to_string(c.key_range), std::to_string(c.workers),
      real(c.seconds), to_string(c.rebuild), c.alt_hash ? "1" : "0", std::to_string(c.seed),
      to_string(c.pinning), r.pinned ? "1" : "0", r.pin_note, r.host,
      std::to_string(r.hardware_threads), r.rng};
  row.insert(row.end(), rest.begin(), rest.end());
  write_row(os, row);
  for (const auto& t : r.threads) {
    auto tr = counter_cells(t, "thread");
    tr.resize(cols.size());
    write_row(os, tr);
  }
}

inline ThroughputReport read_csv(std::istream& is) {
  using namespace report_detail;
  const auto& cols = columns();
  std::string line;
  if (!std::getline(is, line) || split_row(line) != cols)
    throw ReportParseError("CSV header does not match the report layout");
  ThroughputReport r;
  bool have_summary = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != cols.size()) throw ReportParseError("CSV row has wrong column count");
    auto at = [&](std::string_view name) -> const std::string& {
      for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == name) return cells[i];
      throw ReportParseError("unknown column");
    };
    auto u64 = [&](std::string_view name) { return std::stoull(at(name)); };
    if (cells[0] == "thread") {
      ThreadCounts t;
      t.thread = std::stoi(at("thread"));
      t.cpu = std::stoi(at("cpu"));
      t.lookups = u64("lookups");
      t.lookup_hits = u64("lookup_hits");
      t.inserts = u64("inserts");
      t.insert_success = u64("insert_success");
      t.deletes = u64("deletes");
      t.delete_success = u64("delete_success");
      r.threads.push_back(t);
    } else if (cells[0] == "summary") {
      have_summary = true;
      r.elapsed_seconds = std::stod(at("elapsed_seconds"));
      r.rebuilds = u64("rebuilds");
      r.rebuild_seconds = split_reals(at("rebuild_seconds"));
      r.final_census = std::stoll(at("final_census"));
      r.prefilled = u64("prefilled");
      WorkloadConfig& c = r.config;
      c.mix = parse_mix(at("mix"));
      c.load_factor = std::stod(at("load_factor"));
      c.nbuckets = u64("buckets");
      c.alt_buckets = u64("alt_buckets");
      c.key_range = u64("keys");
      c.workers = static_cast<unsigned>(u64("threads"));
      c.seconds = std::stod(at("seconds"));
      c.rebuild = at("rebuild") == "off" ? RebuildMode::kOff : RebuildMode::kContinuous;
      c.alt_hash = at("alt_hash") == "1";
      c.seed = u64("seed");
      c.pinning = at("pin") == "none" ? Pinning::kNone : Pinning::kPerformanceFirst;
      r.pinned = at("pinned") == "1";
      r.pin_note = at("pin_note");
      r.host = at("host");
      r.hardware_threads = static_cast<unsigned>(u64("hardware_threads"));
      r.rng = at("rng");
    } else {
      throw ReportParseError("unknown row kind: " + cells[0]);
    }
  }
  if (!have_summary) throw ReportParseError("CSV has no summary row");
  return r;
}

inline nlohmann::json to_json(const ThroughputReport& r) {
  using nlohmann::json;
  const ThreadCounts tot = r.totals();
  const WorkloadConfig& c = r.config;
  json threads = json::array();
  for (const auto& t : r.threads)
    threads.push_back({{"thread", t.thread},
                       {"cpu", t.cpu},
                       {"lookups", t.lookups},
                       {"lookup_hits", t.lookup_hits},
                       {"inserts", t.inserts},
                       {"insert_success", t.insert_success},
                       {"deletes", t.deletes},
                       {"delete_success", t.delete_success},
                       {"ops", t.ops()}});
  return {
      {"summary",
       {{"lookups", tot.lookups},
        {"lookup_hits", tot.lookup_hits},
        {"inserts", tot.inserts},
        {"insert_success", tot.insert_success},
        {"deletes", tot.deletes},
        {"delete_success", tot.delete_success},
        {"ops", tot.ops()},
        {"elapsed_seconds", r.elapsed_seconds},
        {"ops_per_second", r.ops_per_second()},
        {"lookups_per_second", r.rate(tot.lookups)},
        {"inserts_per_second", r.rate(tot.inserts)},
        {"deletes_per_second", r.rate(tot.deletes)},
        {"rebuilds", r.rebuilds},
        {"rebuild_seconds", r.rebuild_seconds},
        {"final_census", r.final_census},
        {"prefilled", r.prefilled}}},
      {"config",
       {{"mix", to_string(c.mix)},
        {"load_factor", c.load_factor},
        {"buckets", c.nbuckets},
        {"alt_buckets", c.alt_buckets},
        {"keys", c.key_range},
        {"threads", c.workers},
        {"seconds", c.seconds},
        {"rebuild", to_string(c.rebuild)},
        {"alt_hash", c.alt_hash},
        {"seed", c.seed},
        {"pin", to_string(c.pinning)}}},
      {"host",
       {{"pinned", r.pinned},
        {"pin_note", r.pin_note},
        {"host", r.host},
        {"hardware_threads", r.hardware_threads},
        {"rng", r.rng}}},
      {"threads", threads}};
}

inline ThroughputReport from_json(const nlohmann::json& j) {
  ThroughputReport r;
  const auto& s = j.at("summary");
  r.elapsed_seconds = s.at("elapsed_seconds").get<double>();
  r.rebuilds = s.at("rebuilds").get<std::uint64_t>();
  r.rebuild_seconds = s.at("rebuild_seconds").get<std::vector<double>>();
  r.final_census = s.at("final_census").get<std::int64_t>();
  r.prefilled = s.at("prefilled").get<std::uint64_t>();
  const auto& c = j.at("config");
  r.config.mix = parse_mix(c.at("mix").get<std::string>());
  r.config.load_factor = c.at("load_factor").get<double>();
  r.config.nbuckets = c.at("buckets").get<std::size_t>();
  r.config.alt_buckets = c.at("alt_buckets").get<std::size_t>();
  r.config.key_range = c.at("keys").get<std::uint64_t>();
  r.config.workers = c.at("threads").get<unsigned>();
  r.config.seconds = c.at("seconds").get<double>();
  r.config.rebuild =
      c.at("rebuild").get<std::string>() == "off" ? RebuildMode::kOff : RebuildMode::kContinuous;
  r.config.alt_hash = c.at("alt_hash").get<bool>();
  r.config.seed = c.at("seed").get<std::uint64_t>();
  r.config.pinning =
      c.at("pin").get<std::string>() == "none" ? Pinning::kNone : Pinning::kPerformanceFirst;
  const auto& h = j.at("host");
  r.pinned = h.at("pinned").get<bool>();
  r.pin_note = h.at("pin_note").get<std::string>();
  r.host = h.at("host").get<std::string>();
  r.hardware_threads = h.at("hardware_threads").get<unsigned>();
  r.rng = h.at("rng").get<std::string>();
  for (const auto& t : j.at("threads")) {
    ThreadCounts tc;
    tc.thread = t.at("thread").get<int>();
    tc.cpu = t.at("cpu").get<int>();
    tc.lookups = t.at("lookups").get<std::uint64_t>();
    tc.lookup_hits = t.at("lookup_hits").get<std::uint64_t>();
    tc.inserts = t.at("inserts").get<std::uint64_t>();
    tc.insert_success = t.at("insert_success").get<std::uint64_t>();
    tc.deletes = t.at("deletes").get<std::uint64_t>();
    tc.delete_success = t.at("delete_success").get<std::uint64_t>();
    r.threads.push_back(tc);
  }
  return r;
}

inline void write_text(std::ostream& os, const ThroughputReport& r) {
  const ThreadCounts t = r.totals();
  const WorkloadConfig& c = r.config;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.3f Mops/s total over %.2fs (%u threads, mix %s)\n",
                r.ops_per_second() / 1e6, r.elapsed_seconds, c.workers, to_string(c.mix).c_str());
  os << buf;
  std::snprintf(buf, sizeof buf, "  lookup %.3f  insert %.3f  delete %.3f Mops/s\n",
                r.rate(t.lookups) / 1e6, r.rate(t.inserts) / 1e6, r.rate(t.deletes) / 1e6);
  os << buf;
  std::snprintf(buf, sizeof buf,
                "  alpha %g, buckets %zu, keys %llu, rebuild %s, %llu rebuilds\n",
                c.load_factor, c.nbuckets,
                static_cast<unsigned long long>(c.effective_key_range()), to_string(c.rebuild),
                static_cast<unsigned long long>(r.rebuilds));
  os << buf;
  std::snprintf(buf, sizeof buf, "  prefilled %llu, final census %lld\n",
                static_cast<unsigned long long>(r.prefilled),
                static_cast<long long>(r.final_census));
  os << buf;
  for (const auto& th : r.threads) {
    std::snprintf(buf, sizeof buf, "  thread %d cpu %d: %llu ops\n", th.thread, th.cpu,
                  static_cast<unsigned long long>(th.ops()));
    os << buf;
  }
  os << "  host " << r.host << ", " << r.hardware_threads << " hw threads, pinning "
     << (r.pinned ? "on" : "off") << (r.pin_note.empty() ? "" : " (" + r.pin_note + ")")
     << ", rng " << r.rng << '\n';
}

inline void emit_report(std::ostream& os, const ThroughputReport& r, ReportFormat f) {
  switch (f) {
    case ReportFormat::kCsv: write_csv(os, r); break;
    case ReportFormat::kJson: os << to_json(r).dump(2) << '\n'; break;
    case ReportFormat::kText: write_text(os, r); break;
  }
  if (!os) throw std::runtime_error("failed to write report");
}

}  // namespace dhash::harness

#endif  // DHASH_HARNESS_REPORT_HPP

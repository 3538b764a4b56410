#ifndef DHASH_HARNESS_WORKLOAD_HPP
#define DHASH_HARNESS_WORKLOAD_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "dhash/dhash.hpp"

namespace dhash::harness {

// Default key range U. Use 0 (auto) for a population that stays at alpha*beta.
inline constexpr std::uint64_t kDefaultKeyRange = 10'000'000;

enum class OpKind : std::uint8_t { kLookup, kInsert, kDelete };
enum class RebuildMode : std::uint8_t { kOff, kContinuous };
enum class Pinning : std::uint8_t { kPerformanceFirst, kNone };

struct OpMix {
  unsigned lookup = 90;
  unsigned insert = 5;
  unsigned remove = 5;

  bool operator==(const OpMix&) const = default;
};

struct WorkloadConfig {
  OpMix mix;
  double load_factor = 2.0;       // alpha
  std::size_t nbuckets = 1024;    // beta
  std::uint64_t key_range = kDefaultKeyRange;  // U; 0 = 2 * alpha * beta
  unsigned workers = 1;
  double seconds = 10.0;
  RebuildMode rebuild = RebuildMode::kOff;
  std::size_t alt_buckets = 0;    // 0 = 2 * beta
  bool alt_hash = true;           // false: rebuild keeps the same hash function
  std::uint64_t seed = 1;
  Pinning pinning = Pinning::kPerformanceFirst;

  bool operator==(const WorkloadConfig&) const = default;

  [[nodiscard]] std::uint64_t prefill_count() const {
    return static_cast<std::uint64_t>(std::llround(load_factor * static_cast<double>(nbuckets)));
  }
  [[nodiscard]] std::uint64_t effective_key_range() const {
    return key_range != 0 ? key_range : std::max<std::uint64_t>(1, 2 * prefill_count());
  }
  [[nodiscard]] std::size_t effective_alt_buckets() const {
    return alt_buckets != 0 ? alt_buckets : 2 * nbuckets;
  }
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate(const WorkloadConfig& c) {
  if (c.mix.lookup + c.mix.insert + c.mix.remove != 100)
    throw ConfigError("operation mix must sum to 100");
  if (!(c.load_factor > 0)) throw ConfigError("load factor must be positive");
  if (c.nbuckets == 0) throw ConfigError("bucket count must be positive");
  if (c.workers == 0) throw ConfigError("need at least one worker");
  if (!(c.seconds > 0)) throw ConfigError("duration must be positive");
  if (c.prefill_count() > c.effective_key_range())
    throw ConfigError("load_factor * buckets exceeds the key range");
}

/// Hash used for the initial table and for rebuilds back to it.
inline HashFn primary_hash() { return hashes::multiplicative(hashes::kGoldenMultiplier); }
inline HashFn alternate_hash(const WorkloadConfig& c) {
  return c.alt_hash ? hashes::multiplicative(hashes::kAltMultiplier) : primary_hash();
}

/// Generator for thread `index`; independent of the other workers.
inline std::mt19937_64 worker_rng(std::uint64_t seed, unsigned index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedU};
  return std::mt19937_64(seq);
}

inline constexpr const char* kGeneratorName = "mt19937_64/seed_seq";

/// The op/key sequence of one worker. Same seed and config give the same
/// sequence regardless of scheduling.
class OpStream {
 public:
  struct Op {
    OpKind kind;
    Key key;
    bool operator==(const Op&) const = default;
  };

  OpStream(const WorkloadConfig& c, unsigned index)
      : rng_(worker_rng(c.seed, index + 1)),
        mix_(c.mix),
        keys_(0, c.effective_key_range() - 1),
        pct_(0, 99) {}

  Op next() {
    const unsigned p = pct_(rng_);
    const Key k = keys_(rng_);
    if (p < mix_.lookup) return {OpKind::kLookup, k};
    if (p < mix_.lookup + mix_.insert) return {OpKind::kInsert, k};
    return {OpKind::kDelete, k};
  }

 private:
  std::mt19937_64 rng_;
  OpMix mix_;
  std::uniform_int_distribution<Key> keys_;
  std::uniform_int_distribution<unsigned> pct_;
};

/// Distinct keys drawn uniformly from [0, range).
inline std::vector<Key> sample_distinct(std::uint64_t count, std::uint64_t range,
                                        std::mt19937_64& rng) {
  if (count > range) throw ConfigError("cannot draw more distinct keys than the range holds");
  std::vector<Key> out;
  out.reserve(count);
  if (count * 2 > range) {
    std::vector<Key> all(range);
    std::iota(all.begin(), all.end(), Key{0});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(count);
    return all;
  }
  std::unordered_set<Key> seen;
  seen.reserve(count * 2);
  std::uniform_int_distribution<Key> dist(0, range - 1);
  while (out.size() < count) {
    const Key k = dist(rng);
    if (seen.insert(k).second) out.push_back(k);
  }
  return out;
}

/// Inserts exactly alpha*beta distinct keys from [0, U). Table must be empty.
template <class Table>
std::uint64_t prefill(Table& table, const WorkloadConfig& c) {
  validate(c);
  std::mt19937_64 rng = worker_rng(c.seed, 0);
  const auto keys = sample_distinct(c.prefill_count(), c.effective_key_range(), rng);
  for (Key k : keys) table.insert(k, k);
  return keys.size();
}

inline std::string to_string(const OpMix& m) {
  return std::to_string(m.lookup) + "/" + std::to_string(m.insert) + "/" +
         std::to_string(m.remove);
}

/// Parses "L,I,D" or "L/I/D".
inline OpMix parse_mix(const std::string& s) {
  unsigned v[3];
  char sep1 = 0, sep2 = 0;
  int used = 0;
  if (std::sscanf(s.c_str(), "%u%c%u%c%u%n", &v[0], &sep1, &v[1], &sep2, &v[2], &used) != 5 ||
      static_cast<std::size_t>(used) != s.size() || sep1 != sep2 || (sep1 != ',' && sep1 != '/'))
    throw ConfigError("mix must look like L,I,D: " + s);
  return {v[0], v[1], v[2]};
}

inline const char* to_string(RebuildMode m) {
  return m == RebuildMode::kOff ? "off" : "continuous";
}
inline const char* to_string(Pinning p) {
  return p == Pinning::kNone ? "none" : "perf-first";
}

}  // namespace dhash::harness

#endif  // DHASH_HARNESS_WORKLOAD_HPP

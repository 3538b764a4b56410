#ifndef DHASH_CHECKER_LINEARIZABILITY_HPP
#define DHASH_CHECKER_LINEARIZABILITY_HPP

/// \file
/// Linearizability of set histories (Wing & Gong search with memoization).
///
/// The search extends a partial linearization one operation at a time; an
/// operation may go next if it was invoked before every other pending
/// operation responded. States (linearized set, abstract contents) already
/// explored are not revisited. Budget exhaustion yields kInconclusive, never
/// a verdict.

#include <cstdint>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dhash/checker/history.hpp"

namespace dhash::checker {

inline constexpr std::uint64_t kDefaultBudget = 10'000'000;
inline constexpr std::size_t kMaxOperations = 64;
inline constexpr std::size_t kMaxKeys = 64;

struct Verdict {
  enum class Status : std::uint8_t { kLinearizable, kViolation, kInconclusive, kMalformed };
  Status status = Status::kMalformed;
  std::vector<Operation> witness;    // sequential order, when linearizable
  std::vector<Operation> violation;  // 1-minimal non-linearizable subset
  std::uint64_t explored = 0;
  std::string message;

  [[nodiscard]] bool linearizable() const { return status == Status::kLinearizable; }
};

inline const char* to_string(Verdict::Status s) {
  switch (s) {
    case Verdict::Status::kLinearizable: return "linearizable";
    case Verdict::Status::kViolation: return "violation";
    case Verdict::Status::kInconclusive: return "inconclusive";
    case Verdict::Status::kMalformed: return "malformed";
  }
  return "?";
}

namespace lin_detail {

struct StateHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& s) const noexcept {
    return std::hash<std::uint64_t>{}(s.first * 0x9E3779B97F4A7C15ULL ^ s.second);
  }
};

class Search {
 public:
  Search(const std::vector<Operation>& ops, const std::vector<std::size_t>& key_index,
         std::uint64_t initial, std::uint64_t budget)
      : ops_(ops), key_(key_index), initial_(initial), budget_(budget) {}

  enum class Outcome : std::uint8_t { kYes, kNo, kBudget };

  Outcome run() {
    const std::size_t n = ops_.size();
    all_ = n == 64 ? ~0ULL : (1ULL << n) - 1;
    const bool found = dfs(0, initial_);
    if (found) return Outcome::kYes;
    return exhausted_ ? Outcome::kBudget : Outcome::kNo;
  }

  [[nodiscard]] const std::vector<std::size_t>& order() const { return order_; }
  [[nodiscard]] std::uint64_t explored() const { return explored_; }

 private:
  bool dfs(std::uint64_t done, std::uint64_t state) {
    if (done == all_) return true;
    if (!seen_.emplace(done, state).second) return false;
    if (++explored_ > budget_) {
      exhausted_ = true;
      return false;
    }
    std::uint64_t min_resp = ~0ULL;
    for (std::size_t i = 0; i < ops_.size(); ++i)
      if ((done >> i & 1) == 0) min_resp = std::min(min_resp, ops_[i].responded);
    for (std::size_t i = 0; i < ops_.size() && !exhausted_; ++i) {
      if ((done >> i & 1) != 0 || ops_[i].invoked > min_resp) continue;
      const std::uint64_t bit = 1ULL << key_[i];
      const bool present = (state & bit) != 0;
      std::uint64_t next = state;
      bool expect = false;
      switch (ops_[i].op) {
        case SetOp::kLookup: expect = present; break;
        case SetOp::kInsert:
          expect = !present;
          next |= bit;
          break;
        case SetOp::kDelete:
          expect = present;
          next &= ~bit;
          break;
      }
      if (expect != ops_[i].ok) continue;
      order_.push_back(i);
      if (dfs(done | (1ULL << i), next)) return true;
      order_.pop_back();
    }
    return false;
  }

  const std::vector<Operation>& ops_;
  const std::vector<std::size_t>& key_;
  std::uint64_t initial_;
  std::uint64_t budget_;
  std::uint64_t all_ = 0;
  std::uint64_t explored_ = 0;
  bool exhausted_ = false;
  std::vector<std::size_t> order_;
  std::unordered_set<std::pair<std::uint64_t, std::uint64_t>, StateHash> seen_;
};

inline Verdict check_ops(const std::vector<Operation>& ops, const std::vector<Key>& initial,
                         std::uint64_t budget) {
  Verdict v;
  std::vector<Key> keys;
  auto index_of = [&](Key k) {
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (keys[i] == k) return i;
    keys.push_back(k);
    return keys.size() - 1;
  };
  std::vector<std::size_t> key_index;
  for (const auto& o : ops) key_index.push_back(index_of(o.key));
  std::uint64_t init = 0;
  for (Key k : initial) {
    const bool used = std::find(keys.begin(), keys.end(), k) != keys.end();
    if (used) init |= 1ULL << index_of(k);
  }
  if (ops.size() > kMaxOperations || keys.size() > kMaxKeys) {
    v.status = Verdict::Status::kInconclusive;
    v.message = "history too large for the checker";
    return v;
  }
  Search s(ops, key_index, init, budget);
  const auto outcome = s.run();
  v.explored = s.explored();
  if (outcome == Search::Outcome::kYes) {
    v.status = Verdict::Status::kLinearizable;
    for (std::size_t i : s.order()) v.witness.push_back(ops[i]);
  } else if (outcome == Search::Outcome::kNo) {
    v.status = Verdict::Status::kViolation;
  } else {
    v.status = Verdict::Status::kInconclusive;
    v.message = "search budget exhausted";
  }
  return v;
}

}  // namespace lin_detail

/// Decides whether `h` is linearizable with respect to a set that initially
/// holds h.initial. Violations carry a 1-minimal sub-history: removing any
/// one of its operations makes the rest linearizable.
inline Verdict check_linearizable(const History& h, std::uint64_t budget = kDefaultBudget) {
  Verdict v;
  std::string why;
  if (!well_formed(h, &why)) {
    v.status = Verdict::Status::kMalformed;
    v.message = why;
    return v;
  }
  const auto ops = operations(h);
  v = lin_detail::check_ops(ops, h.initial, budget);
  if (v.status != Verdict::Status::kViolation) return v;

  // Shrink to a minimal failing subset, one operation at a time.
  std::vector<Operation> core = ops;
  for (bool shrunk = true; shrunk;) {
    shrunk = false;
    for (std::size_t i = 0; i < core.size(); ++i) {
      std::vector<Operation> trial = core;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
      if (lin_detail::check_ops(trial, h.initial, budget).status ==
          Verdict::Status::kViolation) {
        core = std::move(trial);
        shrunk = true;
        break;
      }
    }
  }
  v.violation = core;
  std::ostringstream msg;
  msg << "no linearization; minimal conflict:";
  for (const auto& o : core) msg << "\n  " << describe(o);
  v.message = msg.str();
  return v;
}

}  // namespace dhash::checker

#endif  // DHASH_CHECKER_LINEARIZABILITY_HPP

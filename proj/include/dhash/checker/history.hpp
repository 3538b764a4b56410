#ifndef DHASH_CHECKER_HISTORY_HPP
#define DHASH_CHECKER_HISTORY_HPP

/// \file
/// Concurrent histories of set operations and their text form.
///
/// Text form, one event per line, '#' starts a comment:
///   initial <k> <k> ...             keys present before the first event
///   rebuild <begin_ts> <end_ts>     a rebuild window (informational)
///   <ts> <thread> invoke <op> <key>
///   <ts> <thread> response <op> <key> <ok|fail>
/// where <op> is lookup, insert or delete; ok means Found / Success.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhash/config.hpp"

namespace dhash::checker {

enum class SetOp : std::uint8_t { kLookup, kInsert, kDelete };
enum class Phase : std::uint8_t { kInvoke, kResponse };

struct HistoryEvent {
  std::uint32_t thread = 0;
  SetOp op = SetOp::kLookup;
  Key key = 0;
  Phase phase = Phase::kInvoke;
  bool ok = false;  // response only: Found / Success
  std::uint64_t ts = 0;

  bool operator==(const HistoryEvent&) const = default;
};

struct RebuildWindow {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  bool operator==(const RebuildWindow&) const = default;
};

struct History {
  std::vector<Key> initial;
  std::vector<HistoryEvent> events;  // sorted by ts
  std::vector<RebuildWindow> rebuilds;

  bool operator==(const History&) const = default;
};

/// A completed operation, built from an invoke/response pair.
struct Operation {
  std::uint32_t thread = 0;
  SetOp op = SetOp::kLookup;
  Key key = 0;
  bool ok = false;
  std::uint64_t invoked = 0;
  std::uint64_t responded = 0;
};

inline const char* to_string(SetOp op) {
  switch (op) {
    case SetOp::kLookup: return "lookup";
    case SetOp::kInsert: return "insert";
    case SetOp::kDelete: return "delete";
  }
  return "?";
}

inline std::string describe(const Operation& o) {
  std::ostringstream s;
  s << "t" << o.thread << " " << to_string(o.op) << "(" << o.key << ") -> "
    << (o.ok ? (o.op == SetOp::kLookup ? "Found" : "Success")
             : (o.op == SetOp::kLookup ? "NotFound"
                                       : (o.op == SetOp::kInsert ? "Exists" : "NotFound")))
    << " [" << o.invoked << "," << o.responded << "]";
  return s.str();
}

/// Checks that every thread alternates invoke/response with matching
/// op and key, timestamps increase, and nothing is left pending. On failure
/// returns false and explains in `why`.
inline bool well_formed(const History& h, std::string* why = nullptr) {
  auto fail = [&](const std::string& m) {
    if (why != nullptr) *why = m;
    return false;
  };
  std::map<std::uint32_t, const HistoryEvent*> open;
  std::uint64_t last_ts = 0;
  bool first = true;
  for (const auto& e : h.events) {
    if (!first && e.ts <= last_ts) return fail("timestamps not strictly increasing");
    first = false;
    last_ts = e.ts;
    auto it = open.find(e.thread);
    const bool pending = it != open.end() && it->second != nullptr;
    if (e.phase == Phase::kInvoke) {
      if (pending) return fail("thread " + std::to_string(e.thread) + " invokes twice");
      open[e.thread] = &e;
    } else {
      if (!pending) return fail("thread " + std::to_string(e.thread) + " responds without invoke");
      if (it->second->op != e.op || it->second->key != e.key)
        return fail("response does not match invoke on thread " + std::to_string(e.thread));
      it->second = nullptr;
    }
  }
  for (const auto& [t, e] : open)
    if (e != nullptr) return fail("thread " + std::to_string(t) + " has a pending operation");
  return true;
}

/// Pairs events into operations, in invocation order. History must be well formed.
inline std::vector<Operation> operations(const History& h) {
  std::vector<Operation> ops;
  std::map<std::uint32_t, std::size_t> open;
  for (const auto& e : h.events) {
    if (e.phase == Phase::kInvoke) {
      open[e.thread] = ops.size();
      ops.push_back({e.thread, e.op, e.key, false, e.ts, 0});
    } else {
      Operation& o = ops[open.at(e.thread)];
      o.ok = e.ok;
      o.responded = e.ts;
    }
  }
  return ops;
}

/// Rebuilds a history from operations (inverse of operations()).
inline History from_operations(const std::vector<Operation>& ops, std::vector<Key> initial) {
  History h;
  h.initial = std::move(initial);
  for (const auto& o : ops) {
    h.events.push_back({o.thread, o.op, o.key, Phase::kInvoke, false, o.invoked});
    h.events.push_back({o.thread, o.op, o.key, Phase::kResponse, o.ok, o.responded});
  }
  std::sort(h.events.begin(), h.events.end(),
            [](const HistoryEvent& a, const HistoryEvent& b) { return a.ts < b.ts; });
  return h;
}

inline void write_history(std::ostream& os, const History& h) {
  os << "initial";
  for (Key k : h.initial) os << ' ' << k;
  os << '\n';
  for (const auto& w : h.rebuilds) os << "rebuild " << w.begin << ' ' << w.end << '\n';
  for (const auto& e : h.events) {
    os << e.ts << ' ' << e.thread << ' '
       << (e.phase == Phase::kInvoke ? "invoke" : "response") << ' ' << to_string(e.op)
       << ' ' << e.key;
    if (e.phase == Phase::kResponse) os << (e.ok ? " ok" : " fail");
    os << '\n';
  }
}

inline History read_history(std::istream& is) {
  History h;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream in(line);
    std::string first;
    if (!(in >> first)) continue;
    auto bad = [&] {
      return std::runtime_error("history line " + std::to_string(lineno) + ": cannot parse");
    };
    if (first == "initial") {
      for (Key k; in >> k;) h.initial.push_back(k);
      continue;
    }
    if (first == "rebuild") {
      RebuildWindow w;
      if (!(in >> w.begin >> w.end)) throw bad();
      h.rebuilds.push_back(w);
      continue;
    }
    HistoryEvent e;
    std::string phase, op, result;
    try {
      e.ts = std::stoull(first);
    } catch (...) {
      throw bad();
    }
    if (!(in >> e.thread >> phase >> op >> e.key)) throw bad();
    if (op == "lookup") e.op = SetOp::kLookup;
    else if (op == "insert") e.op = SetOp::kInsert;
    else if (op == "delete") e.op = SetOp::kDelete;
    else throw bad();
    if (phase == "invoke") {
      e.phase = Phase::kInvoke;
    } else if (phase == "response") {
      e.phase = Phase::kResponse;
      if (!(in >> result) || (result != "ok" && result != "fail")) throw bad();
      e.ok = result == "ok";
    } else {
      throw bad();
    }
    h.events.push_back(e);
  }
  std::stable_sort(h.events.begin(), h.events.end(),
                   [](const HistoryEvent& a, const HistoryEvent& b) { return a.ts < b.ts; });
  return h;
}

}  // namespace dhash::checker

#endif  // DHASH_CHECKER_HISTORY_HPP

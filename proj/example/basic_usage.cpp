// Minimal tour: build a table, use it from a few threads, resize it live.

#include <cstdio>
#include <thread>
#include <vector>

#include "dhash/dhash.hpp"

int main() {
  dhash::DHash<std::uint64_t> table(16, dhash::hashes::identity());

  for (dhash::Key k = 0; k < 1000; ++k) table.insert(k, k * k);

  std::vector<std::thread> readers;
  for (int t = 0; t < 2; ++t) {
    readers.emplace_back([&table] {
      std::uint64_t hits = 0;
      for (int round = 0; round < 50; ++round)
        for (dhash::Key k = 0; k < 1000; ++k)
          hits += table.lookup(k) == dhash::LookupResult::kFound;
      std::printf("reader saw %llu hits\n", static_cast<unsigned long long>(hits));
    });
  }

  // Grow to 512 buckets and switch hash function while readers run.
  table.rebuild(512, dhash::hashes::multiplicative(dhash::hashes::kGoldenMultiplier));
  for (auto& r : readers) r.join();

  auto square = table.guarded_read(12, [](const std::uint64_t& v) { return v; });
  std::printf("12^2 = %llu, buckets = %zu, size = %lld\n",
              static_cast<unsigned long long>(square.value_or(0)), table.bucket_count(),
              static_cast<long long>(table.size()));
  table.remove(12);
  std::printf("after remove: %s\n",
              table.lookup(12) == dhash::LookupResult::kFound ? "found" : "gone");
  return 0;
}

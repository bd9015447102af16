#include <doctest.h>

#include <set>

#include "advnet/parallel.hpp"
#include "advnet/rng.hpp"

using namespace advnet;

TEST_CASE("keyed streams depend only on key and counter") {
  const KeyedStream a(derive_seed(1, 2, 3));
  const KeyedStream b(derive_seed(1, 2, 3));
  for (std::uint64_t c = 0; c < 100; ++c) {
    CHECK(a.uniform(c) == b.uniform(c));
    CHECK(a.uniform(c) >= 0.0);
    CHECK(a.uniform(c) < 1.0);
  }
  CHECK(a.uniform(5) == a.uniform(5));
  CHECK(KeyedStream(derive_seed(1, 2, 4)).uniform(0) != a.uniform(0));
}

TEST_CASE("derived seeds separate keys") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 10; ++m) {
    for (std::uint64_t a = 0; a < 10; ++a) {
      for (std::uint64_t b = 0; b < 10; ++b) seen.insert(derive_seed(m, a, b));
    }
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("uniform index and shuffle are in range and deterministic") {
  Engine rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[uniform_index(rng, 7)];
  for (int c : counts) CHECK(c > 850);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, w = v;
  Engine r1(9), r2(9);
  portable_shuffle(v.begin(), v.end(), r1);
  portable_shuffle(w.begin(), w.end(), r2);
  CHECK(v == w);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 10);
}

TEST_CASE("parallel_for fills every slot and rethrows") {
  for (unsigned threads : {1u, 2u, 4u}) {
    std::vector<int> out(100, 0);
    parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i) * 2);
    CHECK_THROWS_AS(parallel_for(10, threads, [](std::size_t i) { if (i == 3) throw std::runtime_error("x"); }),
                    std::runtime_error);
  }
}

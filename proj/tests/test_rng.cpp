#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "poploop/rng.hpp"

using namespace poploop;

TEST_CASE("rng reproduces the same sequence for the same seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    uint64_t x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("derive_stream separates seeds, labels and sublabels") {
  std::set<uint64_t> seen;
  for (uint64_t seed : {1ull, 2ull})
    for (uint64_t a : {0ull, 1ull, 2ull})
      for (uint64_t b : {0ull, 1ull, 77ull}) seen.insert(derive_stream(seed, a, b));
  CHECK(seen.size() == 2u * 3u * 3u);
}

TEST_CASE("next_unit is in [0,1) with mean near one half") {
  Rng rng(7);
  const int n = 100000;
  double sum = 0.0;
  bool in_range = true;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_unit();
    in_range = in_range && u >= 0.0 && u < 1.0;
    sum += u;
  }
  CHECK(in_range);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("bernoulli frequency matches its parameter") {
  Rng rng(11);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.25) ? 1 : 0;
  double freq = static_cast<double>(hits) / n;
  CHECK(freq > 0.24);
  CHECK(freq < 0.26);
}

TEST_CASE("uniform_int covers its range uniformly") {
  Rng rng(13);
  const int n = 100000, buckets = 10;
  std::array<int, buckets> count{};
  for (int i = 0; i < n; ++i) {
    uint64_t v = rng.uniform_int(buckets);
    REQUIRE(v < static_cast<uint64_t>(buckets));
    ++count[v];
  }
  // Pearson goodness of fit against its 99.9% critical value for 9 dof.
  double expected = static_cast<double>(n) / buckets, chi2 = 0.0;
  for (int c : count) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 27.877);
}

TEST_CASE("exponential draws have the requested mean") {
  Rng rng(17);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.exponential(2.0);
    REQUIRE(x >= 0.0);
    sum += x;
  }
  CHECK(sum / n == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("categorical draws follow the weight vector") {
  Rng rng(19);
  const std::vector<double> p{0.5, 0.3, 0.2};
  const int n = 100000;
  std::array<int, 3> count{};
  for (int i = 0; i < n; ++i) ++count[rng.categorical(p)];
  double chi2 = 0.0;
  for (size_t j = 0; j < p.size(); ++j) {
    double e = n * p[j];
    chi2 += (count[j] - e) * (count[j] - e) / e;
  }
  CHECK(chi2 < 13.816);  // 99.9% critical value, 2 dof
}

TEST_CASE("categorical with a degenerate weight vector always picks the atom") {
  Rng rng(23);
  const std::vector<double> p{0.0, 1.0, 0.0};
  for (int i = 0; i < 1000; ++i) CHECK(rng.categorical(p) == 1u);
}

TEST_CASE("sample_without_replacement returns distinct in-range ids") {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = rng.sample_without_replacement(50, 7);
    REQUIRE(s.size() == 7u);
    std::set<int32_t> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 7u);
    CHECK(*uniq.begin() >= 0);
    CHECK(*uniq.rbegin() < 50);
  }
}

TEST_CASE("sample_without_replacement with k=n is a permutation") {
  Rng rng(31);
  auto s = rng.sample_without_replacement(6, 6);
  std::sort(s.begin(), s.end());
  CHECK(s == std::vector<int32_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("every item can occupy the first sampled slot") {
  Rng rng(37);
  std::set<int32_t> firsts;
  for (int trial = 0; trial < 500; ++trial)
    firsts.insert(rng.sample_without_replacement(5, 3)[0]);
  CHECK(firsts.size() == 5u);
}

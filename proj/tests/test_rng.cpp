#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "s2r/rng.hpp"

using s2r::Rng;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(1234);
  Rng b(1234);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("different seeds diverge") {
  Rng a(1);
  Rng b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++same;
  }
  CHECK(same == 0);
}

TEST_CASE("mt19937_64 reference value pins the engine") {
  // The standard fixes this sequence: the 10000th draw from a
  // default-constructed mt19937_64 (seed 5489) is specified exactly.
  Rng r(5489u);
  uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = r.next_u64();
  CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("uniform lies in [0, 1)") {
  Rng r(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform mean and variance look uniform") {
  Rng r(99);
  const int n = 200000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("below produces only values under the bound") {
  Rng r(42);
  for (uint64_t n : {1ULL, 2ULL, 3ULL, 7ULL, 10ULL, 1000ULL}) {
    for (int i = 0; i < 1000; ++i) {
      CHECK(r.below(n) < n);
    }
  }
  CHECK(r.below(0) == 0);
}

TEST_CASE("below covers the full range") {
  Rng r(31337);
  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(r.below(10));
  CHECK(seen.size() == 10);
}

TEST_CASE("below is close to uniform over a small range") {
  Rng r(5);
  const uint64_t n = 5;
  std::vector<int> counts(n, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[r.below(n)]++;
  for (uint64_t k = 0; k < n; ++k) {
    CHECK(counts[k] == doctest::Approx(draws / double(n)).epsilon(0.05));
  }
}

TEST_CASE("normal mean and variance look standard normal") {
  Rng r(2024);
  const int n = 200000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    CHECK(std::isfinite(x));
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("shuffle permutes without loss") {
  Rng r(808);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  const std::vector<int> orig = v;
  r.shuffle(v);
  CHECK(v != orig);  // astronomically unlikely to be identity
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == orig);
}

TEST_CASE("shuffle is unbiased across positions") {
  // Every element should land in every slot roughly 1/n of the time.
  Rng r(607);
  const int n = 6;
  const int trials = 60000;
  std::vector<std::vector<int>> hits(n, std::vector<int>(n, 0));
  std::vector<int> v(n);
  for (int t = 0; t < trials; ++t) {
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(v);
    for (int pos = 0; pos < n; ++pos) hits[v[pos]][pos]++;
  }
  for (int e = 0; e < n; ++e) {
    for (int pos = 0; pos < n; ++pos) {
      CHECK(hits[e][pos] == doctest::Approx(trials / double(n)).epsilon(0.08));
    }
  }
}

TEST_CASE("serialize and restore replay the exact stream") {
  Rng r(123456);
  for (int i = 0; i < 37; ++i) r.next_u64();
  const std::string state = r.serialize();

  std::vector<uint64_t> expect;
  for (int i = 0; i < 100; ++i) expect.push_back(r.next_u64());

  Rng fresh(0);
  fresh.restore(state);
  for (int i = 0; i < 100; ++i) {
    CHECK(fresh.next_u64() == expect[size_t(i)]);
  }
}

TEST_CASE("restore state survives mixed draw kinds") {
  Rng r(9);
  r.normal();
  r.below(17);
  r.uniform();
  const std::string state = r.serialize();
  const double a1 = r.normal();
  const uint64_t a2 = r.below(1000);
  const double a3 = r.uniform();

  Rng s(1);
  s.restore(state);
  CHECK(s.normal() == a1);
  CHECK(s.below(1000) == a2);
  CHECK(s.uniform() == a3);
}

TEST_CASE("derive separates streams") {
  const uint64_t master = 77;
  const uint64_t s0 = Rng::derive(master, 0);
  const uint64_t s1 = Rng::derive(master, 1);
  const uint64_t s2 = Rng::derive(master, 2);
  CHECK(s0 != s1);
  CHECK(s1 != s2);
  CHECK(s0 != s2);
  // Deterministic function of (seed, stream).
  CHECK(Rng::derive(master, 0) == s0);
  CHECK(Rng::derive(master + 1, 0) != s0);

  Rng a(s0);
  Rng b(s1);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++same;
  }
  CHECK(same == 0);
}

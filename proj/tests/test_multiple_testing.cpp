#include "oracles.hpp"
#include "support.hpp"

#include "medsel/error.hpp"
#include "medsel/multiple_testing.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace medsel;

namespace {

std::vector<double> adjust(std::vector<double> p, Correction c) { return adjust_pvalues(p, c); }

void check_close(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

}  // namespace

TEST_CASE("hand-worked examples") {
  check_close(adjust({0.01, 0.02}, Correction::Bonferroni), {0.02, 0.04});
  check_close(adjust({0.01, 0.02, 0.03, 0.5}, Correction::BH), {0.04, 0.04, 0.04, 0.5});
  check_close(adjust({0.01, 0.04}, Correction::Holm), {0.02, 0.04});
  check_close(adjust({0.01, 0.04}, Correction::Hochberg), {0.02, 0.04});
  check_close(adjust({0.01, 0.04}, Correction::Hommel), {0.02, 0.04});
  check_close(adjust({0.01, 0.02, 0.04}, Correction::Holm), {0.03, 0.04, 0.04});
  check_close(adjust({0.03, 0.04, 0.05}, Correction::Hochberg), {0.05, 0.05, 0.05});
  // Hommel rejects all three at 0.05 via the Simes test on every subset
  check_close(adjust({0.02, 0.03, 0.045}, Correction::Hommel), {0.045, 0.045, 0.045});
  check_close(adjust({0.02, 0.03, 0.045}, Correction::Holm), {0.06, 0.06, 0.06});
}

TEST_CASE("step-up and step-down levels at 0.05") {
  const auto bh = reject_sequential({0.01, 0.02, 0.03, 0.5}, Correction::BH, 0.05);
  CHECK(bh == std::vector<bool>{true, true, true, false});
  CHECK(reject_sequential({0.01, 0.04}, Correction::Holm, 0.05) == std::vector<bool>{true, true});
  CHECK(reject_sequential({0.03, 0.04}, Correction::Holm, 0.05) == std::vector<bool>{false, false});
  CHECK(reject_sequential({0.03, 0.04}, Correction::Hochberg, 0.05) == std::vector<bool>{true, true});
}

TEST_CASE("every correction matches its brute-force reference") {
  for (const auto& p : oracle::fixed_pvalue_vectors())
    for (Correction c : oracle::all_corrections()) {
      CAPTURE(to_string(c));
      CAPTURE(p.size());
      CHECK(adjust_pvalues(p, c) == oracle::reference_adjusted(p, c));
    }
}

TEST_CASE("random vectors against the references") {
  Rng rng(21);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + trial % 9);
    for (double& v : p) v = trial % 3 == 0 ? std::pow(u(rng), 4) : u(rng) * 0.2;
    if (trial % 7 == 0) p.back() = p.front();
    for (Correction c : oracle::all_corrections()) {
      const auto got = adjust_pvalues(p, c);
      const auto want = oracle::reference_adjusted(p, c);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("adjusted p-values agree with the native rejection rules") {
  Rng rng(22);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> p(1 + trial % 12);
    for (double& v : p) v = std::pow(u(rng), 3) * 0.3;
    for (Correction c : oracle::all_corrections())
      for (double alpha : {0.01, 0.05, 0.1}) {
        const auto adj = adjust_pvalues(p, c);
        const auto rej = reject_sequential(p, c, alpha);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK((adj[i] <= alpha) == rej[i]);
      }
  }
}

TEST_CASE("adjusted p-values dominate raw values and permute with the input") {
  Rng rng(23);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(2 + trial % 8);
    for (double& v : p) v = u(rng);
    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[perm[i]];
    for (Correction c : oracle::all_corrections()) {
      const auto a = adjust_pvalues(p, c);
      const auto b = adjust_pvalues(q, c);
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(a[i] >= p[i]);
        CHECK(a[i] <= 1.0);
        CHECK(b[i] == a[perm[i]]);
      }
    }
  }
}

TEST_CASE("ordering among corrections") {
  const std::vector<double> p{0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.074, 0.205};
  const auto bon = adjust_pvalues(p, Correction::Bonferroni);
  const auto holm = adjust_pvalues(p, Correction::Holm);
  const auto hoch = adjust_pvalues(p, Correction::Hochberg);
  const auto homm = adjust_pvalues(p, Correction::Hommel);
  const auto bh = adjust_pvalues(p, Correction::BH);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(holm[i] <= bon[i]);
    CHECK(hoch[i] <= holm[i]);
    CHECK(homm[i] <= hoch[i]);
    CHECK(bh[i] <= hoch[i]);
  }
}

TEST_CASE("input checks and names") {
  CHECK_THROWS_AS(adjust_pvalues({0.1, 1.5}, Correction::BH), InvalidInput);
  CHECK_THROWS_AS(adjust_pvalues({-0.1}, Correction::Holm), InvalidInput);
  CHECK_THROWS_AS(adjust_pvalues({std::nan("")}, Correction::Holm), InvalidInput);
  CHECK(adjust_pvalues({}, Correction::Hommel).empty());
  CHECK(parse_correction("BH") == Correction::BH);
  CHECK(parse_correction("fdr") == Correction::BH);
  CHECK(parse_correction("Hommel") == Correction::Hommel);
  CHECK_THROWS_AS(parse_correction("sidak"), InvalidInput);
  for (Correction c : oracle::all_corrections()) CHECK(parse_correction(to_string(c)) == c);
}

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vauq/errors.hpp"
#include "vauq/evaluation.hpp"

using namespace vauq;

TEST_CASE("AUROC fixed example") {
  const std::vector<double> s{0.8, 0.4, 0.6, 0.2};
  const std::vector<int> y{1, 0, 0, 1};
  CHECK(auroc(s, y) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("AUROC matches the pairwise oracle, ties included") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 150;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 10) / 4.0;  // plenty of ties
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(std::abs(auroc(s, y) - oracle::pairwise_auroc(s, y)) < 1e-12);
  }
}

TEST_CASE("AUROC is invariant to monotone transforms and flips under negation") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(80), t(80), neg(80);
  std::vector<int> y(80);
  for (std::size_t i = 0; i < 80; ++i) {
    y[i] = i % 3 == 0;
    s[i] = n(rng) + y[i];
    t[i] = std::exp(2.0 * s[i]) + 5.0;
    neg[i] = -s[i];
  }
  CHECK(std::abs(auroc(s, y) - auroc(t, y)) < 1e-12);
  CHECK(std::abs(auroc(neg, y) - (1.0 - auroc(s, y))) < 1e-12);
}

TEST_CASE("AUROC input validation") {
  CHECK_THROWS_AS(auroc(std::vector<double>{1.0, 2.0}, std::vector<int>{1}), InvalidArgument);
  CHECK_THROWS_AS(auroc(std::vector<double>{1.0, 2.0}, std::vector<int>{1, 1}), DataError);
  CHECK_THROWS_AS(auroc(std::vector<double>{1.0, 2.0}, std::vector<int>{1, 2}), InvalidArgument);
  CHECK_THROWS_AS(auroc(std::vector<double>{1.0, NAN}, std::vector<int>{1, 0}), InvalidArgument);
}

TEST_CASE("judge verdicts by majority") {
  CHECK(ingest_judgments({"Correct", "wrong", "Wrong."}).label == Label::hallucinated);
  CHECK(ingest_judgments({" correct ", "Wrong", "CORRECT"}).label == Label::correct);
  const auto tie = ingest_judgments({"Correct", "Wrong"});
  CHECK(tie.label == Label::unlabeled);
  CHECK(tie.reason == "tie");
  const auto junk = ingest_judgments({"maybe", "?"});
  CHECK(junk.label == Label::unlabeled);
  CHECK(junk.n_malformed == 2);
  CHECK(ingest_judgments({}).label == Label::unlabeled);
  // Malformed entries are skipped, not counted as votes.
  CHECK(ingest_judgments({"Correct", "banana"}).label == Label::correct);
}

TEST_CASE("judge outcome does not depend on verdict order") {
  std::vector<std::string> v{"Correct", "Wrong", "Wrong", "x", "Correct", "Wrong"};
  const Label expected = ingest_judgments(v).label;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(ingest_judgments(v).label == expected);
  }
}

TEST_CASE("stratified split keeps both classes on both sides") {
  std::vector<int> y(50, 0);
  for (std::size_t i = 0; i < 10; ++i) y[i] = 1;
  const auto s = stratified_split(y, 0.2, 4);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.size() == 40);
  int pos_val = 0;
  for (auto i : s.validation) pos_val += y[i];
  CHECK(pos_val == 2);
  CHECK(stratified_split(y, 0.2, 4).validation == s.validation);
  std::vector<int> lone{1, 0, 0};
  CHECK_THROWS_AS(stratified_split(lone, 0.5, 0), DataError);
}

namespace {

// A population where the masked entropy separates the classes and the full
// entropy is noise, so the sweep should lean on the IS term.
EntropyTable separable_table(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  EntropyTable t;
  t.bands = {{10, 25}};
  t.ks = {0, 50, 100};
  t.h_masked.assign(1, std::vector<std::vector<double>>(3));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 2;
    const double hf = 1.0 + noise(rng);
    t.sample_ids.push_back("s" + std::to_string(i));
    t.labels.push_back(y);
    t.h_full.push_back(hf);
    t.h_masked[0][0].push_back(hf);
    t.h_masked[0][1].push_back(hf + (y ? 0.0 : 1.0) + noise(rng));
    t.h_masked[0][2].push_back(hf + 0.5 + noise(rng));
  }
  return t;
}

}  // namespace

TEST_CASE("sweep picks a positive alpha when the image term is informative") {
  const auto table = separable_table(200, 3);
  auto grid = SweepGrid::defaults();
  grid.ks = {0, 50, 100};
  const auto r = sweep(table, grid);
  CHECK(r.best.alpha > 0.0);
  CHECK(r.best.k_percent == 50);
  CHECK(r.validation_auroc > 0.9);
  CHECK(r.test_auroc > 0.9);
  CHECK(r.surface.size() == grid.alphas.size() * 3);
  CHECK(r.split.validation.size() + r.split.test.size() == 200);
}

TEST_CASE("a single-cell sweep returns that cell") {
  const auto table = separable_table(40, 5);
  SweepGrid grid;
  grid.alphas = {1.5};
  grid.ks = {50};
  grid.bands = {{10, 25}};
  auto t = table;
  t.ks = {50};
  t.h_masked = {{table.h_masked[0][1]}};
  const auto r = sweep(t, grid);
  CHECK(r.best.alpha == 1.5);
  CHECK(r.best.k_percent == 50);
  CHECK(r.surface.size() == 1);
  CHECK(r.test_auroc == doctest::Approx(vauq_auroc(t, r.best, r.split.test)));
}

TEST_CASE("sweeps refuse tiny populations and grids the table lacks") {
  auto table = separable_table(19, 1);
  CHECK_THROWS_AS(sweep(table, SweepGrid::defaults()), DataError);
  table = separable_table(40, 1);
  auto grid = SweepGrid::defaults();
  grid.ks = {30};
  CHECK_THROWS(sweep(table, grid));
}

TEST_CASE("transfer onto itself has no gap") {
  const auto table = separable_table(100, 8);
  auto grid = SweepGrid::defaults();
  grid.ks = {0, 50, 100};
  const auto r = transfer(table, table, grid);
  CHECK(r.gap == doctest::Approx(0.0));
  CHECK(r.transferred_auroc == doctest::Approx(r.target_tuned_auroc));
}

TEST_CASE("default sweep grid") {
  const auto g = SweepGrid::defaults();
  CHECK(g.alphas.size() == 51);
  CHECK(g.alphas.front() == 0.0);
  CHECK(g.alphas.back() == doctest::Approx(5.0));
  CHECK(g.ks == std::vector<int>{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100});
  CHECK_NOTHROW(g.validate());
  SweepGrid bad = g;
  bad.validation_fraction = 1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("timing report aggregates per method") {
  std::vector<TimingSample> s;
  PassCounts p;
  p.generations = 1;
  p.rescore_passes = 2;
  s.push_back({"vauq", 1.0, p});
  s.push_back({"vauq", 3.0, p});
  PassCounts q;
  q.generations = 5;
  s.push_back({"eigenscore", 10.0, q});
  const auto rows = timing_report(s);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "vauq");
  CHECK(rows[0].mean_seconds == doctest::Approx(2.0));
  CHECK(rows[0].std_seconds == doctest::Approx(1.0));
  CHECK(rows[0].mean_rescore_passes == doctest::Approx(2.0));
  CHECK(rows[1].mean_generations == doctest::Approx(5.0));
}

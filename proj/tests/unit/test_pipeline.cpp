#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "doctest.h"
#include "oracles.hpp"
#include "vauq/errors.hpp"
#include "vauq/pipeline.hpp"
#include "vauq/population.hpp"
#include "vauq/saliency.hpp"
#include "vauq/toy_model.hpp"

using namespace vauq;
namespace fs = std::filesystem;

namespace {

ToyConfig small_config() {
  ToyConfig c;
  c.arch.vocab_size = 12;
  c.arch.n_layers = 8;
  c.arch.n_heads = 2;
  c.arch.hidden_dim = 4;
  c.arch.prompt_length = 2;
  c.arch.answer_length = 2;
  c.arch.grounded_band = {2, 5};
  return c;
}

EvalRecord record(const std::string& id) {
  EvalRecord r;
  r.sample_id = id;
  r.question = "What is shown?";
  r.image_ref = "img";
  r.dataset = "d";
  r.evidence_regions = {{0.25, 0.25, 0.75, 0.75}};
  return r;
}

ScoringConfig config_with(std::vector<std::string> scores) {
  ScoringConfig c;
  c.scores = std::move(scores);
  c.vauq.layer_band = {2, 5};
  c.svar_band = {2, 5};
  return c;
}

}  // namespace

TEST_CASE("scorer values agree with the closed-form model") {
  auto cfg = small_config();
  cfg.scene.beta_prior = 2.0;
  ToyModel model(cfg);
  auto sc = config_with({"entropy", "is_blank", "is_core", "is_gt", "vauq", "perplexity"});
  sc.vauq.k_percent = 25;  // 4 of 16 patches: exactly the evidence
  sc.vauq.alpha = 0.7;
  Scorer scorer(model, sc);
  const auto r = scorer.score(record("a"));
  REQUIRE(r.status == SampleStatus::ok);

  const double h_full = oracle::entropy(oracle::toy_logits(12, 1, 2, 4.0, 2.0, 1.0));
  const double h_none = oracle::entropy(oracle::toy_logits(12, 1, 2, 4.0, 2.0, 0.0));
  CHECK(std::abs(*r.scores.at("entropy").value - h_full) < 1e-9);
  CHECK(std::abs(*r.scores.at("is_blank").value - (h_none - h_full)) < 1e-9);
  CHECK(std::abs(*r.scores.at("is_core").value - (h_none - h_full)) < 1e-9);
  CHECK(std::abs(*r.scores.at("is_gt").value - (h_none - h_full)) < 1e-9);
  CHECK(std::abs(*r.scores.at("vauq").value - (h_full - 0.7 * (h_none - h_full))) < 1e-9);
  const double p_img = oracle::softmax(oracle::toy_logits(12, 1, 2, 4.0, 2.0, 1.0))[1];
  CHECK(std::abs(*r.scores.at("perplexity").value - 1.0 / p_img) < 1e-9);
  CHECK(r.scores.at("is_core").orientation == Orientation::lower_hallucinated);
  CHECK(r.scores.at("vauq").orientation == Orientation::higher_hallucinated);
}

TEST_CASE("vauq costs one generation and two rescoring passes") {
  ToyModel model(small_config());
  Scorer scorer(model, config_with({"vauq"}));
  const auto r = scorer.score(record("a"));
  REQUIRE(r.status == SampleStatus::ok);
  const auto& c = r.costs.at("vauq").passes;
  CHECK(c.generations == 1);
  CHECK(c.rescore_passes <= 2);
  CHECK(model.counts().generations == 1);
  CHECK(model.counts().rescore_passes <= 2);
}

TEST_CASE("dispersion baselines cost K generations") {
  ToyModel model(small_config());
  auto sc = config_with({"eigenscore", "semantic_entropy"});
  sc.dispersion_samples = 5;
  Scorer scorer(model, sc);
  auto rec = record("a");
  rec.response_tokens = {1, 1};
  const auto r = scorer.score(rec);
  REQUIRE(r.status == SampleStatus::ok);
  CHECK(r.costs.at("eigenscore").passes.generations == 5);
  CHECK(r.costs.at("semantic_entropy").passes.generations == 5);
  CHECK(model.counts().generations == 5);
}

TEST_CASE("zero-length responses are reported as degenerate") {
  auto cfg = small_config();
  cfg.arch.answer_length = 0;
  ToyModel model(cfg);
  Scorer scorer(model, config_with({"entropy", "vauq"}));
  const auto r = scorer.score(record("a"));
  CHECK(r.status == SampleStatus::degenerate);
  CHECK_FALSE(r.scores.at("vauq").value.has_value());
  CHECK(r.scores.at("vauq").status == "degenerate");
}

TEST_CASE("unknown and unimplemented score names are configuration errors") {
  CHECK_THROWS_AS(validate_score_names({"vl_uncertainty"}), ConfigError);
  CHECK_THROWS_AS(validate_score_names({"nonsense"}), ConfigError);
  CHECK_THROWS_AS(validate_score_names({"vauq", "vauq"}), ConfigError);
  CHECK_NOTHROW(validate_score_names(known_scores()));
}

TEST_CASE("a warm cache makes no backend calls and changes nothing") {
  const fs::path dir = fs::temp_directory_path() / ("vauq-unit-pipeline-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  TraceCache cache(dir);
  ToyModel model(small_config());
  const auto sc = config_with({"entropy", "vauq", "is_random", "svar", "verbalized", "eigenscore"});
  const auto cold = Scorer(model, sc, &cache).score(record("a"));
  CHECK(model.counts().generations > 0);
  model.reset_counts();
  const auto warm = Scorer(model, sc, &cache).score(record("a"));
  CHECK(model.counts() == PassCounts{});
  for (const auto& [name, entry] : cold.scores) CHECK(warm.scores.at(name).value == entry.value);
  fs::remove_all(dir);
}

TEST_CASE("parallel scoring matches serial scoring") {
  ToyModel model(ToyConfig{});
  PopulationSpec spec;
  spec.n_samples = 24;
  spec.seed = 9;
  const auto recs = build_population(model, spec);
  const auto sc = config_with({"entropy", "is_core", "is_random", "vauq"});
  PassCounts serial_counts, parallel_counts;
  const auto serial = score_records(model, sc, recs, nullptr, 1, &serial_counts);
  const auto parallel = score_records(model, sc, recs, nullptr, 4, &parallel_counts);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].sample_id == parallel[i].sample_id);
    for (const auto& [name, entry] : serial[i].scores) CHECK(parallel[i].scores.at(name).value == entry.value);
  }
  CHECK(serial_counts == parallel_counts);
}

TEST_CASE("params hash tracks only the parameters a score depends on") {
  ToyModel model(small_config());
  auto a = config_with({"entropy", "vauq"});
  auto b = a;
  b.vauq.alpha = 2.0;
  Scorer sa(model, a), sb(model, b);
  CHECK(sa.params_hash("vauq") != sb.params_hash("vauq"));
  CHECK(sa.params_hash("entropy") == sb.params_hash("entropy"));
}

TEST_CASE("score AUROC orients image-information scores") {
  std::vector<SampleResult> rs(4);
  const double is[] = {0.1, 0.2, 0.9, 0.8};
  const Label labels[] = {Label::hallucinated, Label::hallucinated, Label::correct, Label::correct};
  std::vector<const SampleResult*> ptrs;
  for (std::size_t i = 0; i < 4; ++i) {
    rs[i].sample_id = std::to_string(i);
    rs[i].label = labels[i];
    rs[i].scores["is_core"] = ScoreEntry{is[i], Orientation::lower_hallucinated};
    ptrs.push_back(&rs[i]);
  }
  CHECK(*score_auroc(ptrs, "is_core") == doctest::Approx(1.0));
}

TEST_CASE("population construction") {
  ToyModel model(ToyConfig{});
  PopulationSpec spec;
  spec.n_samples = 40;
  const auto recs = build_population(model, spec);
  REQUIRE(recs.size() == 40);
  std::size_t factual = 0;
  for (const auto& r : recs) {
    REQUIRE(r.toy_scene.has_value());
    const auto& s = *r.toy_scene;
    if (r.split == SplitTag::factual) {
      ++factual;
      CHECK(s.image_answer == s.prior_answer);
    } else {
      CHECK(s.image_answer != s.prior_answer);
    }
    CHECK(r.labeled());
    CHECK(r.label == (r.response_tokens.at(0) != s.image_answer ? Label::hallucinated : Label::correct));
    CHECK_FALSE(r.evidence_regions.empty());
  }
  CHECK(factual == 20);
  // Same seed, same population.
  ToyModel again(ToyConfig{});
  const auto recs2 = build_population(again, spec);
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].response_tokens == recs2[i].response_tokens);
}

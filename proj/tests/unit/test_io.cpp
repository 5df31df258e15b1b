#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "vauq/config.hpp"
#include "vauq/dataset.hpp"
#include "vauq/errors.hpp"
#include "vauq/json_io.hpp"
#include "vauq/toy_model.hpp"
#include "vauq/trace_io.hpp"

using namespace vauq;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vauq-unit-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string good_line(int i) {
  return R"({"sample_id":"id)" + std::to_string(i) +
         R"(","question":"q","image_ref":"img","response":"cat","judgments":["Wrong","Wrong","Correct"]})";
}

GenerationTrace toy_trace() {
  ToyConfig cfg;
  cfg.arch.n_layers = 4;
  cfg.arch.grounded_band = {1, 2};
  cfg.arch.answer_length = 2;
  ToyModel model(cfg);
  GenerateRequest req;
  req.image_ref = "img";
  req.exports.hidden_layers = {0, 2};
  return model.generate(req);
}

}  // namespace

TEST_CASE("dataset loader skips a minority of malformed lines") {
  std::stringstream in;
  for (int i = 0; i < 19; ++i) in << good_line(i) << '\n';
  in << "{not json\n\n";
  const auto ds = parse_dataset(in, "mem");
  CHECK(ds.records.size() == 19);
  REQUIRE(ds.malformed.size() == 1);
  CHECK(ds.malformed[0].line == 20);
  CHECK(ds.records[0].label == Label::hallucinated);
}

TEST_CASE("dataset loader rejects a mostly broken file") {
  std::stringstream in;
  for (int i = 0; i < 5; ++i) in << good_line(i) << '\n';
  in << "[]\n{}\n";
  CHECK_THROWS_AS(parse_dataset(in, "mem"), DataError);
}

TEST_CASE("duplicate ids, bad labels and missing fields are malformed") {
  std::stringstream in;
  for (int i = 0; i < 30; ++i) in << good_line(i) << '\n';
  in << good_line(3) << '\n';
  in << R"({"sample_id":"x","question":"q","image_ref":"i","label":2})" << '\n';
  in << R"({"sample_id":"y","question":"q"})" << '\n';
  const auto ds = parse_dataset(in, "mem");
  CHECK(ds.records.size() == 30);
  CHECK(ds.malformed.size() == 3);
}

TEST_CASE("explicit labels win over judgments") {
  const auto r = record_from_json(nlohmann::json::parse(
      R"({"sample_id":"a","question":"q","image_ref":"i","label":0,"judgments":["Wrong"]})"));
  CHECK(r.label == Label::correct);
  const auto u = record_from_json(nlohmann::json::parse(R"({"sample_id":"a","question":"q","image_ref":"i"})"));
  CHECK_FALSE(u.labeled());
}

TEST_CASE("records round-trip through JSON") {
  EvalRecord r;
  r.sample_id = "s9";
  r.question = "What?";
  r.image_ref = "toy/s9";
  r.response = "x";
  r.response_tokens = {4, 1};
  r.label = Label::hallucinated;
  r.split = SplitTag::counterfactual;
  r.dataset = "toy";
  r.evidence_regions = {{0.1, 0.2, 0.5, 0.6}};
  ToyScene scene;
  scene.beta_prior = 2.5;
  r.toy_scene = scene;
  const auto back = record_from_json(record_to_json(r));
  CHECK(back.sample_id == r.sample_id);
  CHECK(back.response_tokens == r.response_tokens);
  CHECK(back.label == r.label);
  CHECK(back.split == r.split);
  CHECK(back.evidence_regions == r.evidence_regions);
  REQUIRE(back.toy_scene.has_value());
  CHECK(*back.toy_scene == scene);
}

TEST_CASE("traces round-trip through the binary format") {
  const auto t = toy_trace();
  std::stringstream buf;
  write_trace(buf, t);
  const auto back = read_trace(buf);
  CHECK(back.tokens == t.tokens);
  CHECK(back.steps == t.steps);
  CHECK(back.attention == t.attention);
  CHECK(back.attention_layers == t.attention_layers);
  CHECK(back.hidden.generated == t.hidden.generated);
  CHECK(back.hidden.visual == t.hidden.visual);
  CHECK(back.hidden.layers == t.hidden.layers);
  CHECK(back.mask == t.mask);
  CHECK(back.backend_id == t.backend_id);
}

TEST_CASE("corrupt trace files are rejected") {
  std::stringstream bad("VAUQTRC");
  CHECK_THROWS(read_trace(bad));
  const auto t = toy_trace();
  std::stringstream buf;
  write_trace(buf, t);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream truncated(bytes);
  CHECK_THROWS(read_trace(truncated));
}

TEST_CASE("trace cache stores once and reads back") {
  const auto dir = scratch_dir("cache");
  TraceCache cache(dir);
  TraceKey key;
  key.backend_id = "toy";
  key.prompt = "p";
  key.image = "img";
  const auto t = toy_trace();
  CHECK_FALSE(cache.load("s1", "full", key).has_value());
  cache.store("s1", "full", key, t);
  const auto back = cache.load("s1", "full", key);
  REQUIRE(back.has_value());
  CHECK(back->tokens == t.tokens);

  TraceKey other = key;
  other.response = {1};
  CHECK(other.hash() != key.hash());
  CHECK_FALSE(cache.load("s1", "full", other).has_value());
  other = key;
  other.attention = false;
  CHECK(other.hash() != key.hash());

  cache.store_text("s1", "verbalized", "k", "85");
  CHECK(cache.load_text("s1", "verbalized", "k") == std::optional<std::string>("85"));
  fs::remove_all(dir);
}

TEST_CASE("run config round-trips and rejects unknown keys") {
  RunConfig c;
  c.datasets = {"a.jsonl"};
  c.scoring.scores = {"entropy", "vauq", "eigenscore"};
  c.scoring.vauq.alpha = 1.3;
  c.scoring.blank_mode = BlankMode::removal;
  c.seeds = {1, 2};
  c.jobs = 3;
  c.backend.toy.arch.vocab_size = 20;
  const auto j = run_config_to_json(c);
  const auto back = run_config_from_json(j);
  CHECK(run_config_to_json(back) == j);
  CHECK(back.scoring.vauq.alpha == 1.3);
  CHECK(back.backend.toy.arch.vocab_size == 20);

  auto extra = j;
  extra["colour"] = "red";
  CHECK_THROWS_AS(run_config_from_json(extra), ConfigError);
  auto bad_score = j;
  bad_score["scores"] = {"vl_uncertainty"};
  CHECK_THROWS_AS(run_config_from_json(bad_score).validate(), ConfigError);
}

TEST_CASE("cache directory falls back to the environment") {
  RunConfig c;
  ::setenv(kCacheDirEnv, "/tmp/from-env", 1);
  CHECK(effective_cache_dir(c) == "/tmp/from-env");
  c.cache_dir = "/tmp/from-config";
  CHECK(effective_cache_dir(c) == "/tmp/from-config");
  ::unsetenv(kCacheDirEnv);
}

TEST_CASE("backend factory") {
  BackendSpec s;
  CHECK(make_backend(s)->id().rfind("toy-", 0) == 0);
  s.kind = "llava";
  CHECK_THROWS_AS(make_backend(s), BackendError);
  s.kind = "toy";
  s.toy.arch.vocab_size = 1;
  CHECK_THROWS_AS(make_backend(s), ConfigError);
}

TEST_CASE("layer band and box parsing") {
  CHECK(parse_layer_band("5,18") == LayerBand{5, 18});
  CHECK(nlohmann::json::parse("[3,4]").get<LayerBand>() == LayerBand{3, 4});
  CHECK_THROWS(parse_layer_band("9,2"));
  CHECK_THROWS(nlohmann::json::parse("[0.5,0.5,0.2,0.9]").get<Box>());
  CHECK(parse_transfer({"source=a", "target=b"}).target == "b");
  CHECK_THROWS_AS(parse_transfer({"a", "b"}), ConfigError);
}

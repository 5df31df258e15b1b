#include "vauq/config.hpp"

#include <cstdlib>
#include <fstream>

#include "vauq/errors.hpp"
#include "vauq/json_io.hpp"

namespace vauq {

using nlohmann::json;

void RunConfig::validate() const {
  scoring.validate();
  sweep.validate();
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (datasets.empty() && report.empty()) throw ConfigError("no dataset given");
  if (output_dir.empty()) throw ConfigError("output directory must be set");
  for (const auto& t : transfers) {
    if (t.source.empty() || t.target.empty()) throw ConfigError("transfer needs source and target names");
  }
}

namespace {

template <typename T>
T get_as(const json& j, const char* key, const char* what) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + "." + key + ": " + e.what());
  }
}

void parse_scoring(const json& j, ScoringConfig& s) {
  constexpr const char* what = "scoring";
  require_keys(j,
               {"mask_kind", "blank_mode", "max_tokens", "prompt_suffix", "svar_band", "lens_text_layer",
                "lens_image_layer", "embedding_layer", "dispersion_samples", "dispersion_temperature",
                "eigenscore_ridge"},
               what);
  try {
    if (j.contains("mask_kind")) s.mask_kind = mask_kind_from_string(get_as<std::string>(j, "mask_kind", what));
    if (j.contains("blank_mode")) s.blank_mode = blank_mode_from_string(get_as<std::string>(j, "blank_mode", what));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("max_tokens")) s.max_tokens = get_as<std::size_t>(j, "max_tokens", what);
  if (j.contains("prompt_suffix")) s.prompt_suffix = get_as<std::string>(j, "prompt_suffix", what);
  if (j.contains("svar_band")) s.svar_band = get_as<LayerBand>(j, "svar_band", what);
  if (j.contains("lens_text_layer")) s.lens_text_layer = get_as<int>(j, "lens_text_layer", what);
  if (j.contains("lens_image_layer")) s.lens_image_layer = get_as<int>(j, "lens_image_layer", what);
  if (j.contains("embedding_layer")) s.embedding_layer = get_as<int>(j, "embedding_layer", what);
  if (j.contains("dispersion_samples")) s.dispersion_samples = get_as<std::size_t>(j, "dispersion_samples", what);
  if (j.contains("dispersion_temperature")) {
    s.dispersion_temperature = get_as<double>(j, "dispersion_temperature", what);
  }
  if (j.contains("eigenscore_ridge")) s.eigenscore_ridge = get_as<double>(j, "eigenscore_ridge", what);
}

json scoring_to_json(const ScoringConfig& s) {
  return {{"mask_kind", to_string(s.mask_kind)},
          {"blank_mode", to_string(s.blank_mode)},
          {"max_tokens", s.max_tokens},
          {"prompt_suffix", s.prompt_suffix},
          {"svar_band", s.svar_band},
          {"lens_text_layer", s.lens_text_layer},
          {"lens_image_layer", s.lens_image_layer},
          {"embedding_layer", s.embedding_layer},
          {"dispersion_samples", s.dispersion_samples},
          {"dispersion_temperature", s.dispersion_temperature},
          {"eigenscore_ridge", s.eigenscore_ridge}};
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  constexpr const char* what = "run config";
  require_keys(j,
               {"backend", "datasets", "scores", "vauq", "scoring", "sweep", "run_sweep", "transfers", "timing",
                "seeds", "cache_dir", "output_dir", "jobs", "report"},
               what);
  RunConfig c;
  if (j.contains("backend")) {
    const json& b = j.at("backend");
    require_keys(b, {"kind", "arch", "scene"}, "backend");
    if (b.contains("kind")) c.backend.kind = get_as<std::string>(b, "kind", "backend");
    if (b.contains("arch")) c.backend.toy.arch = b.at("arch").get<ToyArchitecture>();
    if (b.contains("scene")) c.backend.toy.scene = b.at("scene").get<ToyScene>();
  }
  if (j.contains("datasets")) c.datasets = get_as<std::vector<std::string>>(j, "datasets", what);
  if (j.contains("scores")) c.scoring.scores = get_as<std::vector<std::string>>(j, "scores", what);
  if (j.contains("vauq")) c.scoring.vauq = j.at("vauq").get<VauqParams>();
  if (j.contains("scoring")) parse_scoring(j.at("scoring"), c.scoring);
  if (j.contains("sweep")) c.sweep = j.at("sweep").get<SweepGrid>();
  if (j.contains("run_sweep")) c.run_sweep = get_as<bool>(j, "run_sweep", what);
  if (j.contains("transfers")) {
    for (const auto& t : j.at("transfers")) {
      require_keys(t, {"source", "target"}, "transfer");
      c.transfers.push_back({get_as<std::string>(t, "source", "transfer"), get_as<std::string>(t, "target", "transfer")});
    }
  }
  if (j.contains("timing")) c.timing = get_as<bool>(j, "timing", what);
  if (j.contains("seeds")) c.seeds = get_as<std::vector<std::uint64_t>>(j, "seeds", what);
  if (j.contains("cache_dir")) c.cache_dir = get_as<std::string>(j, "cache_dir", what);
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir", what);
  if (j.contains("jobs")) c.jobs = get_as<std::size_t>(j, "jobs", what);
  if (j.contains("report")) c.report = get_as<std::string>(j, "report", what);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json transfers = json::array();
  for (const auto& t : c.transfers) transfers.push_back({{"source", t.source}, {"target", t.target}});
  return {{"backend", {{"kind", c.backend.kind}, {"arch", c.backend.toy.arch}, {"scene", c.backend.toy.scene}}},
          {"datasets", c.datasets},
          {"scores", c.scoring.scores},
          {"vauq", c.scoring.vauq},
          {"scoring", scoring_to_json(c.scoring)},
          {"sweep", c.sweep},
          {"run_sweep", c.run_sweep},
          {"transfers", transfers},
          {"timing", c.timing},
          {"seeds", c.seeds},
          {"cache_dir", c.cache_dir},
          {"output_dir", c.output_dir},
          {"jobs", c.jobs},
          {"report", c.report}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return run_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void resolve_paths(RunConfig& c) {
  namespace fs = std::filesystem;
  for (auto& d : c.datasets) {
    if (!fs::exists(d)) throw ConfigError("dataset not found: " + d);
    d = fs::absolute(d).lexically_normal().string();
  }
  if (!c.report.empty()) {
    if (!fs::exists(c.report)) throw ConfigError("score report not found: " + c.report);
    c.report = fs::absolute(c.report).lexically_normal().string();
  }
}

std::string effective_cache_dir(const RunConfig& c) {
  if (!c.cache_dir.empty()) return c.cache_dir;
  if (const char* env = std::getenv(kCacheDirEnv)) return env;
  return {};
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  if (spec.kind != "toy") throw BackendError("unknown backend kind '" + spec.kind + "' (available: toy)");
  return toy_model(spec.toy);
}

TransferSpec parse_transfer(const std::vector<std::string>& args) {
  TransferSpec t;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("transfer arguments look like source=A target=B, got '" + a + "'");
    const std::string key = a.substr(0, eq), value = a.substr(eq + 1);
    if (key == "source") {
      t.source = value;
    } else if (key == "target") {
      t.target = value;
    } else {
      throw ConfigError("unknown transfer argument '" + key + "'");
    }
  }
  if (t.source.empty() || t.target.empty()) throw ConfigError("transfer needs both source= and target=");
  return t;
}

}  // namespace vauq

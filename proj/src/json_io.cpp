#include "vauq/json_io.hpp"

#include <algorithm>
#include <string>

#include "vauq/errors.hpp"

namespace vauq {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw ConfigError("unknown key '" + key + "' in " + what);
  }
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + "." + key + ": " + e.what());
  }
}

}  // namespace

void to_json(json& j, const LayerBand& b) { j = json::array({b.start, b.end}); }

void from_json(const json& j, LayerBand& b) {
  if (j.is_string()) {
    try {
      b = parse_layer_band(j.get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    return;
  }
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ConfigError("layer band must be [start, end]");
  }
  b = {j[0].get<int>(), j[1].get<int>()};
  if (b.start < 0 || b.start > b.end) throw ConfigError("layer band needs 0 <= start <= end");
}

void to_json(json& j, const Box& b) { j = json::array({b.x0, b.y0, b.x1, b.y1}); }

void from_json(const json& j, Box& b) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must be [x0, y0, x1, y1]");
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError("box coordinates must be numbers");
  }
  b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw DataError("box must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1");
}

void to_json(json& j, const ToyArchitecture& a) {
  j = {{"vocab_size", a.vocab_size},
       {"n_layers", a.n_layers},
       {"n_heads", a.n_heads},
       {"hidden_dim", a.hidden_dim},
       {"prompt_length", a.prompt_length},
       {"answer_length", a.answer_length},
       {"grounded_band", a.grounded_band},
       {"evidence_attention", a.evidence_attention},
       {"visual_attention", a.visual_attention},
       {"seed", a.seed}};
}

void from_json(const json& j, ToyArchitecture& a) {
  constexpr const char* what = "toy architecture";
  require_keys(j,
               {"vocab_size", "n_layers", "n_heads", "hidden_dim", "prompt_length", "answer_length", "grounded_band",
                "evidence_attention", "visual_attention", "seed"},
               what);
  read_opt(j, "vocab_size", a.vocab_size, what);
  read_opt(j, "n_layers", a.n_layers, what);
  read_opt(j, "n_heads", a.n_heads, what);
  read_opt(j, "hidden_dim", a.hidden_dim, what);
  read_opt(j, "prompt_length", a.prompt_length, what);
  read_opt(j, "answer_length", a.answer_length, what);
  read_opt(j, "grounded_band", a.grounded_band, what);
  read_opt(j, "evidence_attention", a.evidence_attention, what);
  read_opt(j, "visual_attention", a.visual_attention, what);
  read_opt(j, "seed", a.seed, what);
}

void to_json(json& j, const ToyScene& s) {
  j = {{"grid", {s.grid_rows, s.grid_cols}},
       {"evidence", s.evidence},
       {"evidence_boxes", s.evidence_boxes},
       {"image_answer", s.image_answer},
       {"prior_answer", s.prior_answer},
       {"beta_image", s.beta_image},
       {"beta_prior", s.beta_prior}};
}

void from_json(const json& j, ToyScene& s) {
  constexpr const char* what = "toy scene";
  require_keys(j, {"grid", "evidence", "evidence_boxes", "image_answer", "prior_answer", "beta_image", "beta_prior"},
               what);
  if (auto it = j.find("grid"); it != j.end()) {
    if (!it->is_array() || it->size() != 2) throw ConfigError("toy scene grid must be [rows, cols]");
    s.grid_rows = (*it)[0].get<std::size_t>();
    s.grid_cols = (*it)[1].get<std::size_t>();
  }
  read_opt(j, "evidence", s.evidence, what);
  if (auto it = j.find("evidence_boxes"); it != j.end()) {
    try {
      s.evidence_boxes = it->get<std::vector<Box>>();
    } catch (const DataError& e) {
      throw ConfigError(std::string("toy scene evidence box: ") + e.what());
    }
  }
  if (!j.contains("evidence") && j.contains("evidence_boxes")) s.evidence.clear();
  read_opt(j, "image_answer", s.image_answer, what);
  read_opt(j, "prior_answer", s.prior_answer, what);
  read_opt(j, "beta_image", s.beta_image, what);
  read_opt(j, "beta_prior", s.beta_prior, what);
}

void to_json(json& j, const VauqParams& p) {
  j = {{"alpha", p.alpha}, {"k_percent", p.k_percent}, {"layer_band", p.layer_band}};
}

void from_json(const json& j, VauqParams& p) {
  constexpr const char* what = "vauq params";
  require_keys(j, {"alpha", "k_percent", "layer_band"}, what);
  read_opt(j, "alpha", p.alpha, what);
  read_opt(j, "k_percent", p.k_percent, what);
  read_opt(j, "layer_band", p.layer_band, what);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

void to_json(json& j, const SweepGrid& g) {
  j = {{"alphas", g.alphas},
       {"ks", g.ks},
       {"bands", g.bands},
       {"validation_fraction", g.validation_fraction},
       {"split_seed", g.split_seed}};
}

void from_json(const json& j, SweepGrid& g) {
  constexpr const char* what = "sweep grid";
  require_keys(j, {"alphas", "ks", "bands", "validation_fraction", "split_seed"}, what);
  read_opt(j, "alphas", g.alphas, what);
  read_opt(j, "ks", g.ks, what);
  read_opt(j, "bands", g.bands, what);
  read_opt(j, "validation_fraction", g.validation_fraction, what);
  read_opt(j, "split_seed", g.split_seed, what);
  g.validate();
}

}  // namespace vauq

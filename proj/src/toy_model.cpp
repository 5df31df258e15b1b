#include "vauq/toy_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <regex>

#include "vauq/errors.hpp"
#include "vauq/hash.hpp"
#include "vauq/random.hpp"

namespace vauq {

namespace {

constexpr std::uint64_t kTokenTable = 0x746f6b656eULL;
constexpr std::uint64_t kPatchTable = 0x7061746368ULL;

struct Softmax {
  std::vector<double> log_probs;
  double entropy = 0.0;
};

// Log-sum-exp softmax over the whole vocabulary.
Softmax softmax_stats(const std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double log_norm = zmax + std::log(sum);
  Softmax out;
  out.log_probs.resize(z.size());
  double h = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double lp = z[k] - log_norm;
    out.log_probs[k] = lp;
    h -= std::exp(lp) * lp;
  }
  out.entropy = std::max(h, 0.0);
  return out;
}

TokenId argmax_token(const std::vector<double>& z) {
  return static_cast<TokenId>(std::max_element(z.begin(), z.end()) - z.begin());
}

TokenId sample_token(const std::vector<double>& z, double temperature, std::mt19937_64& rng) {
  std::vector<double> scaled(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) scaled[k] = z[k] / temperature;
  const Softmax sm = softmax_stats(scaled);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    acc += std::exp(sm.log_probs[k]);
    if (u < acc) return static_cast<TokenId>(k);
  }
  return static_cast<TokenId>(z.size() - 1);
}

float table_value(std::uint64_t seed, std::uint64_t table, std::uint64_t index) {
  const std::uint64_t bits = splitmix64(mix_seed(seed, table, index));
  return static_cast<float>(static_cast<double>(bits >> 11) * 0x1.0p-53 * 2.0 - 1.0);
}

}  // namespace

void ToyArchitecture::validate() const {
  if (vocab_size < 2) throw ConfigError("toy model needs vocab_size >= 2");
  if (n_layers == 0 || n_heads == 0 || hidden_dim == 0) throw ConfigError("toy model needs layers, heads and dim");
  if (grounded_band.start < 0 || grounded_band.start > grounded_band.end ||
      grounded_band.end >= static_cast<int>(n_layers)) {
    throw ConfigError("grounded band " + grounded_band.to_string() + " outside the model's layers");
  }
  if (!(evidence_attention >= 0.0 && evidence_attention <= 1.0)) {
    throw ConfigError("evidence_attention must lie in [0,1]");
  }
  if (!(visual_attention > 0.0 && visual_attention < 1.0)) {
    throw ConfigError("visual_attention must lie in (0,1)");
  }
}

VisualLayout ToyScene::layout() const {
  VisualLayout l;
  l.rows = grid_rows;
  l.cols = grid_cols;
  l.evidence_regions = evidence_boxes;
  return l;
}

std::vector<std::size_t> ToyScene::evidence_set() const {
  if (!evidence.empty() || evidence_boxes.empty()) {
    std::vector<std::size_t> e = evidence;
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return e;
  }
  return layout().evidence_patches();
}

void ToyScene::validate(const ToyArchitecture& arch) const {
  if (grid_rows == 0 || grid_cols == 0) throw ConfigError("toy scene needs a non-empty grid");
  layout().validate();
  const auto e = evidence_set();
  if (!e.empty() && e.back() >= n_visual()) throw ConfigError("evidence patch index out of range");
  if (image_answer < 0 || static_cast<std::size_t>(image_answer) >= arch.vocab_size ||
      prior_answer < 0 || static_cast<std::size_t>(prior_answer) >= arch.vocab_size) {
    throw ConfigError("answer tokens must lie inside the vocabulary");
  }
  if (!(beta_image >= 0.0) || !(beta_prior >= 0.0)) throw ConfigError("beta weights must be >= 0");
  if (e.empty() && beta_image > 0.0) throw ConfigError("beta_image > 0 requires a non-empty evidence set");
}

ToyModel::ToyModel(ToyConfig config) : arch_(config.arch), default_scene_(std::move(config.scene)) {
  arch_.validate();
  default_scene_.validate(arch_);
}

std::unique_ptr<ToyModel> toy_model(const ToyConfig& config) { return std::make_unique<ToyModel>(config); }

void ToyModel::add_scene(const std::string& image_ref, ToyScene scene) {
  scene.validate(arch_);
  scenes_[image_ref] = std::move(scene);
}

const ToyScene& ToyModel::scene(const std::string& image_ref) const {
  auto it = scenes_.find(image_ref);
  return it == scenes_.end() ? default_scene_ : it->second;
}

std::string ToyModel::id() const {
  Fnv1a h;
  h.field(std::to_string(arch_.vocab_size))
      .field(std::to_string(arch_.n_layers))
      .field(std::to_string(arch_.n_heads))
      .field(std::to_string(arch_.hidden_dim))
      .field(std::to_string(arch_.prompt_length))
      .field(std::to_string(arch_.answer_length))
      .field(arch_.grounded_band.to_string())
      .field(canonical_double(arch_.evidence_attention))
      .field(canonical_double(arch_.visual_attention))
      .field(std::to_string(arch_.seed));
  return "toy-" + h.hex();
}

std::string ToyModel::content_key(const std::string& image_ref) const {
  const ToyScene& s = scene(image_ref);
  Fnv1a h;
  h.field(image_ref).field(std::to_string(s.grid_rows)).field(std::to_string(s.grid_cols));
  for (std::size_t e : s.evidence_set()) h.field(std::to_string(e));
  h.field(std::to_string(s.image_answer))
      .field(std::to_string(s.prior_answer))
      .field(canonical_double(s.beta_image))
      .field(canonical_double(s.beta_prior));
  return image_ref + "#" + h.hex();
}

VisualLayout ToyModel::layout(const std::string& image_ref) const { return scene(image_ref).layout(); }

std::unique_ptr<Backend> ToyModel::clone() const {
  auto copy = std::make_unique<ToyModel>(*this);
  copy->reset_counts();
  return copy;
}

std::vector<double> ToyModel::logits(const ToyScene& s, double visible_fraction) const {
  std::vector<double> z(arch_.vocab_size, 0.0);
  z[static_cast<std::size_t>(s.image_answer)] += s.beta_image * visible_fraction;
  z[static_cast<std::size_t>(s.prior_answer)] += s.beta_prior;
  return z;
}

double ToyModel::visible_fraction(const ToyScene& s, const MaskSpec& mask, BlankMode mode) const {
  const auto e = s.evidence_set();
  if (e.empty()) return 0.0;
  if (mask.kind == MaskKind::blank) return 0.0;
  (void)mode;
  std::size_t visible = 0;
  for (std::size_t i : e) visible += mask.contains(i) ? 0 : 1;
  return static_cast<double>(visible) / static_cast<double>(e.size());
}

std::vector<double> ToyModel::attention_row(const ToyScene& s, int layer, std::size_t position, const MaskSpec& mask,
                                            BlankMode mode) const {
  return attention_row(s, s.evidence_set(), layer, position, mask, mode);
}

std::vector<double> ToyModel::attention_row(const ToyScene& s, const std::vector<std::size_t>& e, int layer,
                                            std::size_t position, const MaskSpec& mask, BlankMode mode) const {
  const std::size_t n_prompt = arch_.prompt_length;
  const bool removed = mask.kind == MaskKind::blank && mode == BlankMode::removal;
  const std::size_t n_visual = removed ? 0 : s.n_visual();
  const std::size_t n_text = n_prompt + position + 1;
  const std::size_t n_keys = n_text + n_visual;

  // Pre-knockout target weights; the logits are their logs.
  const double mu = arch_.visual_attention;
  std::vector<double> logit(n_keys, std::log((1.0 - mu) / static_cast<double>(n_text)));
  if (n_visual > 0) {
    const bool grounded = arch_.grounded_band.contains(layer) && !e.empty() && e.size() < n_visual;
    const double uniform = std::log(mu / static_cast<double>(n_visual));
    for (std::size_t i = 0; i < n_visual; ++i) logit[n_prompt + i] = uniform;
    if (grounded) {
      const double rho = arch_.evidence_attention;
      const double in_w = rho * mu / static_cast<double>(e.size());
      const double out_w = (1.0 - rho) * mu / static_cast<double>(n_visual - e.size());
      const double neg_inf = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n_visual; ++i) {
        const bool in_e = std::binary_search(e.begin(), e.end(), i);
        const double w = in_e ? in_w : out_w;
        logit[n_prompt + i] = w > 0.0 ? std::log(w) : neg_inf;
      }
    }
    for (std::size_t i : mask.indices) logit[n_prompt + i] = -std::numeric_limits<double>::infinity();
  }

  double lmax = -std::numeric_limits<double>::infinity();
  for (double v : logit) lmax = std::max(lmax, v);
  std::vector<double> row(n_keys);
  double sum = 0.0;
  for (std::size_t k = 0; k < n_keys; ++k) {
    row[k] = std::exp(logit[k] - lmax);
    sum += row[k];
  }
  for (double& v : row) v /= sum;
  return row;
}

std::vector<float> ToyModel::token_embedding(TokenId token) const {
  std::vector<float> v(arch_.hidden_dim);
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = table_value(arch_.seed, kTokenTable, static_cast<std::uint64_t>(token) * arch_.hidden_dim + k);
  }
  return v;
}

std::vector<float> ToyModel::patch_embedding(std::size_t index) const {
  std::vector<float> v(arch_.hidden_dim);
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = table_value(arch_.seed, kPatchTable, index * arch_.hidden_dim + k);
  }
  return v;
}

GenerationTrace ToyModel::run(const std::string& image_ref, const std::vector<TokenId>* forced,
                              const Decoding& decoding, std::size_t max_tokens, const MaskSpec& mask, BlankMode mode,
                              const ExportOptions& exports) {
  const auto start = std::chrono::steady_clock::now();
  const ToyScene& s = scene(image_ref);
  const std::size_t n_visual_scene = s.n_visual();
  if (mask.n_tokens != n_visual_scene && mask.kind != MaskKind::none) {
    throw InvalidArgument("mask was built for " + std::to_string(mask.n_tokens) + " visual tokens, scene has " +
                          std::to_string(n_visual_scene));
  }
  if (!mask.indices.empty() && mask.indices.back() >= n_visual_scene) {
    throw InvalidArgument("mask index out of range");
  }
  for (int layer : exports.hidden_layers) {
    if (layer < 0 || layer > static_cast<int>(arch_.n_layers)) {
      throw InvalidArgument("hidden layer " + std::to_string(layer) + " not in [0, " +
                            std::to_string(arch_.n_layers) + "]");
    }
  }

  const bool removed = mask.kind == MaskKind::blank && mode == BlankMode::removal;
  const std::size_t n_visual = removed ? 0 : n_visual_scene;
  const std::size_t n_prompt = arch_.prompt_length;
  const std::size_t L = arch_.n_layers;
  const std::size_t H = arch_.n_heads;
  const std::size_t d = arch_.hidden_dim;
  const double g = visible_fraction(s, mask, mode);
  const std::vector<std::size_t> evidence = s.evidence_set();
  const std::size_t M = forced ? forced->size() : std::min(arch_.answer_length, max_tokens);

  GenerationTrace trace;
  trace.backend_id = id();
  trace.mask = mask.kind == MaskKind::none ? MaskSpec::none(n_visual_scene) : mask;
  trace.blank_mode = mode;
  trace.n_heads = H;
  trace.n_visual = n_visual;
  if (exports.attention) {
    trace.attention_layers.resize(L);
    for (std::size_t l = 0; l < L; ++l) trace.attention_layers[l] = static_cast<int>(l);
  }

  // Prefill: visual hidden states at every layer.
  std::vector<std::vector<float>> patch_emb(n_visual);
  for (std::size_t i = 0; i < n_visual; ++i) patch_emb[i] = patch_embedding(i);
  std::vector<float> visual_hidden((L + 1) * n_visual * d);
  for (std::size_t l = 0; l <= L; ++l) {
    const float scale = 1.0f + 0.5f * static_cast<float>(l) / static_cast<float>(L);
    for (std::size_t i = 0; i < n_visual; ++i) {
      for (std::size_t k = 0; k < d; ++k) visual_hidden[(l * n_visual + i) * d + k] = patch_emb[i][k] * scale;
    }
  }
  // Mean embedding of the evidence patches that survive the mask.
  std::vector<float> evidence_mean(d, 0.0f);
  {
    std::size_t count = 0;
    for (std::size_t i : evidence) {
      if (removed || mask.contains(i)) continue;
      const auto pe = patch_embedding(i);
      for (std::size_t k = 0; k < d; ++k) evidence_mean[k] += pe[k];
      ++count;
    }
    if (count > 0) {
      for (float& v : evidence_mean) v /= static_cast<float>(count);
    }
  }
  const double grounding = s.beta_image * g / (1.0 + s.beta_image * g);

  std::mt19937_64 rng(decoding.seed);
  std::vector<float> attention(exports.attention ? L * H * M * n_visual : 0);
  std::vector<float> gen_hidden((L + 1) * M * d);

  for (std::size_t j = 0; j < M; ++j) {
    const std::vector<double> z = logits(s, g);
    const Softmax sm = softmax_stats(z);
    TokenId token;
    if (forced) {
      token = (*forced)[j];
      if (token < 0 || static_cast<std::size_t>(token) >= arch_.vocab_size) {
        throw InvalidArgument("response token " + std::to_string(token) + " outside the vocabulary");
      }
    } else if (decoding.mode == Decoding::Mode::greedy) {
      token = argmax_token(z);
    } else {
      if (!(decoding.temperature > 0.0)) throw InvalidArgument("sampling temperature must be > 0");
      token = sample_token(z, decoding.temperature, rng);
    }
    trace.tokens.push_back(token);
    trace.steps.push_back({sm.entropy, sm.log_probs[static_cast<std::size_t>(token)]});

    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t h = 0; h < H; ++h) {
        const auto row = attention_row(s, evidence, static_cast<int>(l), j, mask, mode);
        if (exports.attention) {
          for (std::size_t i = 0; i < n_visual; ++i) {
            attention[((l * H + h) * M + j) * n_visual + i] = static_cast<float>(row[n_prompt + i]);
          }
        }
      }
    }

    const auto te = token_embedding(token);
    for (std::size_t l = 0; l <= L; ++l) {
      const float depth = static_cast<float>(l) / static_cast<float>(L);
      for (std::size_t k = 0; k < d; ++k) {
        gen_hidden[(l * M + j) * d + k] =
            te[k] * (1.0f + depth) + depth * static_cast<float>(grounding) * evidence_mean[k];
      }
    }
  }
  trace.attention = std::move(attention);

  HiddenStates& hs = trace.hidden;
  hs.dim = d;
  hs.n_generated = M;
  hs.n_visual = n_visual;
  for (int layer : exports.hidden_layers) {
    if (hs.slot_of(layer)) continue;
    hs.layers.push_back(layer);
    const auto l = static_cast<std::size_t>(layer);
    hs.generated.insert(hs.generated.end(), gen_hidden.begin() + static_cast<std::ptrdiff_t>(l * M * d),
                        gen_hidden.begin() + static_cast<std::ptrdiff_t>((l + 1) * M * d));
    hs.visual.insert(hs.visual.end(), visual_hidden.begin() + static_cast<std::ptrdiff_t>(l * n_visual * d),
                     visual_hidden.begin() + static_cast<std::ptrdiff_t>((l + 1) * n_visual * d));
  }

  trace.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

GenerationTrace ToyModel::generate(const GenerateRequest& request) {
  if (request.max_tokens == 0) throw InvalidArgument("max_tokens must be >= 1");
  GenerationTrace t = run(request.image_ref, nullptr, request.decoding, request.max_tokens,
                          MaskSpec::none(scene(request.image_ref).n_visual()), BlankMode::knockout, request.exports);
  counts_.generations += 1;
  counts_.decode_steps += t.length();
  return t;
}

GenerationTrace ToyModel::rescore(const RescoreRequest& request) {
  if (request.response.empty()) throw InvalidArgument("rescore needs a non-empty response");
  if (request.mask.kind == MaskKind::blank && request.blank_mode == BlankMode::removal &&
      !supports_blank_removal()) {
    throw BackendError("backend cannot remove the image");
  }
  GenerationTrace t = run(request.image_ref, &request.response, Decoding::greedy(), request.response.size(),
                          request.mask, request.blank_mode, request.exports);
  counts_.rescore_passes += 1;
  return t;
}

std::string ToyModel::query_text(const std::string& image_ref, const std::string& prompt) {
  counts_.text_queries += 1;
  static const std::regex answer_re(R"(Model answer:\s*tok(\d+))");
  std::smatch m;
  if (!std::regex_search(prompt, m, answer_re)) return "I am not able to judge that.";
  const auto token = std::stoull(m[1].str());
  if (token >= arch_.vocab_size) return "I am not able to judge that.";
  const ToyScene& s = scene(image_ref);
  const Softmax sm = softmax_stats(logits(s, visible_fraction(s, MaskSpec::none(s.n_visual()), BlankMode::knockout)));
  return std::to_string(std::llround(100.0 * std::exp(sm.log_probs[token])));
}

std::string ToyModel::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += "tok" + std::to_string(tokens[i]);
  }
  return out;
}

}  // namespace vauq

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vauq/backend.hpp"

namespace vauq {

/// Model-wide shape of the toy backend.
struct ToyArchitecture {
  std::size_t vocab_size = 32;
  std::size_t n_layers = 32;
  std::size_t n_heads = 8;
  std::size_t hidden_dim = 16;
  std::size_t prompt_length = 8;
  std::size_t answer_length = 1;
  LayerBand grounded_band{10, 25};
  double evidence_attention = 0.9;  // share of visual mass on evidence patches inside the grounded band
  double visual_attention = 0.5;    // share of each attention row that goes to visual tokens
  std::uint64_t seed = 0;           // embedding tables

  void validate() const;
  friend bool operator==(const ToyArchitecture&, const ToyArchitecture&) = default;
};

/// Per-image content: which patches carry the evidence and how strongly the
/// image and the language prior push toward their answers.
struct ToyScene {
  std::size_t grid_rows = 4;
  std::size_t grid_cols = 4;
  std::vector<std::size_t> evidence{5, 6, 9, 10};  // E; derived from evidence_boxes when empty
  std::vector<Box> evidence_boxes;
  TokenId image_answer = 1;
  TokenId prior_answer = 2;
  double beta_image = 4.0;
  double beta_prior = 0.0;

  std::size_t n_visual() const { return grid_rows * grid_cols; }
  VisualLayout layout() const;
  /// E after resolving boxes; sorted.
  std::vector<std::size_t> evidence_set() const;
  void validate(const ToyArchitecture& arch) const;
  friend bool operator==(const ToyScene&, const ToyScene&) = default;
};

struct ToyConfig {
  ToyArchitecture arch;
  ToyScene scene;
};

/// Deterministic toy multimodal model.
///
/// Next-token logits are z = beta_image * g * onehot(image_answer) +
/// beta_prior * onehot(prior_answer), where g is the fraction of evidence
/// patches left visible by the active knockout mask. Attention inside the
/// grounded band puts `evidence_attention` of the visual mass on E and the rest
/// on the other patches; outside the band it is uniform over visual tokens.
/// Every forward position computes all layers' attention rows and hidden
/// states whether or not they are exported.
class ToyModel final : public Backend {
 public:
  explicit ToyModel(ToyConfig config);

  /// Registers a scene for an image_ref; unknown refs fall back to the default scene.
  void add_scene(const std::string& image_ref, ToyScene scene);
  const ToyScene& scene(const std::string& image_ref) const;
  const ToyArchitecture& architecture() const { return arch_; }

  std::string id() const override;
  std::size_t n_layers() const override { return arch_.n_layers; }
  VisualLayout layout(const std::string& image_ref) const override;
  GenerationTrace generate(const GenerateRequest& request) override;
  GenerationTrace rescore(const RescoreRequest& request) override;
  std::string query_text(const std::string& image_ref, const std::string& prompt) override;
  std::string detokenize(std::span<const TokenId> tokens) const override;
  bool supports_blank_removal() const override { return true; }
  std::unique_ptr<Backend> clone() const override;
  std::string content_key(const std::string& image_ref) const override;

  // Closed-form pieces, exposed for tests and diagnostics.
  std::vector<double> logits(const ToyScene& scene, double visible_fraction) const;
  double visible_fraction(const ToyScene& scene, const MaskSpec& mask, BlankMode mode) const;
  /// Full post-softmax attention row over every key (prompt, visual, generated
  /// prefix including the query itself) after knockout.
  std::vector<double> attention_row(const ToyScene& scene, int layer, std::size_t position, const MaskSpec& mask,
                                    BlankMode mode) const;

 private:
  std::vector<double> attention_row(const ToyScene& scene, const std::vector<std::size_t>& evidence, int layer,
                                    std::size_t position, const MaskSpec& mask, BlankMode mode) const;
  GenerationTrace run(const std::string& image_ref, const std::vector<TokenId>* forced, const Decoding& decoding,
                      std::size_t max_tokens, const MaskSpec& mask, BlankMode mode, const ExportOptions& exports);
  std::vector<float> token_embedding(TokenId token) const;
  std::vector<float> patch_embedding(std::size_t index) const;

  ToyArchitecture arch_;
  ToyScene default_scene_;
  std::map<std::string, ToyScene> scenes_;
};

/// Convenience matching the library's factory naming.
std::unique_ptr<ToyModel> toy_model(const ToyConfig& config);

}  // namespace vauq

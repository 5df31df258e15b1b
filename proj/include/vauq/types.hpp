#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vauq {

using TokenId = std::int32_t;

/// Per-step predictive statistics of one generated token, in nats.
struct StepStats {
  double entropy = 0.0;           // full-vocabulary Shannon entropy of the next-token distribution
  double logprob_realized = 0.0;  // log-probability of the token actually in the sequence

  friend bool operator==(const StepStats&, const StepStats&) = default;
};

/// Inclusive range of transformer layers, [start, end].
struct LayerBand {
  int start = 0;
  int end = 0;

  bool contains(int layer) const { return layer >= start && layer <= end; }
  int width() const { return end - start + 1; }
  std::string to_string() const;

  friend bool operator==(const LayerBand&, const LayerBand&) = default;
  friend auto operator<=>(const LayerBand&, const LayerBand&) = default;
};

LayerBand parse_layer_band(std::string_view text);

enum class MaskKind { none, core, random, ground_truth, blank };

std::string_view to_string(MaskKind kind);
MaskKind mask_kind_from_string(std::string_view text);

/// A set of visual token indices to knock out.
///
/// Invariants: indices are sorted, unique and < n_tokens; kind == blank iff all
/// n_tokens indices are present; kind == none iff indices is empty. Use
/// MaskSpec::from_indices to build one, it enforces the invariants.
struct MaskSpec {
  MaskKind kind = MaskKind::none;
  std::vector<std::size_t> indices;
  std::size_t n_tokens = 0;
  // Set when a ground-truth mask selected nothing although boxes were present.
  bool suspicious = false;

  static MaskSpec none(std::size_t n_tokens);
  static MaskSpec blank(std::size_t n_tokens);
  /// Sorts and de-duplicates; an empty set becomes none and a full set becomes blank.
  static MaskSpec from_indices(MaskKind kind, std::vector<std::size_t> indices, std::size_t n_tokens);

  bool contains(std::size_t index) const;
  std::size_t size() const { return indices.size(); }

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

/// Axis-aligned box in normalized image coordinates.
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  bool valid() const { return 0.0 <= x0 && x0 < x1 && x1 <= 1.0 && 0.0 <= y0 && y0 < y1 && y1 <= 1.0; }
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Patch-grid geometry of the visual token sequence (row-major).
struct VisualLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Box> evidence_regions;

  std::size_t n_tokens() const { return rows * cols; }
  /// Center of patch `index` in normalized (x, y) coordinates.
  std::pair<double, double> patch_center(std::size_t index) const;
  /// Indices of patches whose centers fall inside any evidence box.
  std::vector<std::size_t> evidence_patches() const;
  void validate() const;
};

/// How the "blank" condition is realized by a backend.
enum class BlankMode { knockout, removal };

std::string_view to_string(BlankMode mode);
BlankMode blank_mode_from_string(std::string_view text);

enum class ConditionKind { full, blank, masked };

std::string_view to_string(ConditionKind kind);

/// Hidden states exported for a list of layers. Layer 0 is the embedding output.
struct HiddenStates {
  std::vector<int> layers;
  std::size_t dim = 0;
  std::size_t n_generated = 0;
  std::size_t n_visual = 0;
  std::vector<float> generated;  // [layer slot][n_generated][dim]
  std::vector<float> visual;     // [layer slot][n_visual][dim]

  bool empty() const { return layers.empty(); }
  std::optional<std::size_t> slot_of(int layer) const;
  std::span<const float> generated_at(std::size_t slot, std::size_t position) const;
  std::span<const float> visual_at(std::size_t slot, std::size_t position) const;
  /// Mean over generated positions at one layer.
  std::vector<double> generated_mean(int layer) const;
};

/// One model run over a fixed (image, prompt): tokens, per-step statistics and
/// exported internals. Immutable once built; safe to share across threads.
struct GenerationTrace {
  std::string backend_id;
  std::vector<TokenId> tokens;
  std::vector<StepStats> steps;

  // Attention from generated tokens to visual tokens, [layer slot][head][M][N].
  std::vector<int> attention_layers;
  std::size_t n_heads = 0;
  std::size_t n_visual = 0;
  std::vector<float> attention;

  HiddenStates hidden;

  MaskSpec mask;
  BlankMode blank_mode = BlankMode::knockout;
  double wall_time = 0.0;

  std::size_t length() const { return tokens.size(); }
  bool degenerate() const { return tokens.empty(); }
  ConditionKind condition() const;

  std::optional<std::size_t> attention_slot(int layer) const;
  float attn(std::size_t slot, std::size_t head, std::size_t step, std::size_t visual) const {
    return attention[((slot * n_heads + head) * tokens.size() + step) * n_visual + visual];
  }
  /// Throws InvalidArgument when shapes or value ranges are inconsistent.
  void validate() const;
};

}  // namespace vauq

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vauq/types.hpp"

namespace vauq {

/// Generated-token to visual-token attention summed over a layer band.
struct SaliencyMap {
  std::vector<double> weights;  // one entry per visual token, all >= 0
  LayerBand layer_band;
  std::size_t n_generated = 0;
};

/// weights[i] = sum over layers in the band, all heads and all generated
/// tokens of A[l][h][j][i]. Plain sums, no averaging over heads or layers.
/// Requires a full-condition trace that exported every layer of the band.
SaliencyMap aggregate_attention(const GenerationTrace& trace, LayerBand band);

/// The floor(k_percent * N / 100) highest-weight tokens, ties to the lower
/// index. k = 0 gives kind none and k = 100 gives kind blank.
MaskSpec top_k_mask(const SaliencyMap& map, int k_percent);

/// floor(k_percent * n / 100); the cardinality rule shared by core and random masks.
std::size_t mask_cardinality(std::size_t n_tokens, int k_percent);

/// Uniform sample without replacement, reproducible for a given seed.
MaskSpec random_mask(std::size_t n_tokens, std::size_t cardinality, std::uint64_t seed);

/// Masks every patch whose center lies inside an evidence box. Throws DataError
/// when the layout has no boxes; an empty selection returns kind none with
/// `suspicious` set.
MaskSpec ground_truth_mask(const VisualLayout& layout);

struct EvidenceAttention {
  double inside = 0.0;   // mean weight per evidence patch
  double outside = 0.0;  // mean weight per non-evidence patch
  std::size_t n_inside = 0;
  std::size_t n_outside = 0;

  double ratio() const { return inside / outside; }
};

EvidenceAttention evidence_attention_ratio(const SaliencyMap& map, const VisualLayout& layout);

// Mask export for external rendering.
nlohmann::json mask_record(const std::string& sample_id, const MaskSpec& mask, int k_percent,
                           const VisualLayout& layout);
/// rows x cols grid of 0/1 cells, 1 = masked.
std::vector<std::vector<int>> mask_overlay(const MaskSpec& mask, const VisualLayout& layout);

}  // namespace vauq

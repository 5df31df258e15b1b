#include "vauq/saliency.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "vauq/errors.hpp"
#include "vauq/random.hpp"

namespace vauq {

SaliencyMap aggregate_attention(const GenerationTrace& trace, LayerBand band) {
  if (band.start > band.end) throw InvalidArgument("layer band start exceeds end");
  if (trace.condition() != ConditionKind::full) {
    throw InvalidArgument("saliency must be computed on the full-condition trace");
  }
  std::vector<std::size_t> slots;
  for (int l = band.start; l <= band.end; ++l) {
    const auto slot = trace.attention_slot(l);
    if (!slot) {
      throw InvalidArgument("layer band " + band.to_string() + " not covered by exported attention (missing layer " +
                            std::to_string(l) + ")");
    }
    slots.push_back(*slot);
  }

  SaliencyMap map;
  map.layer_band = band;
  map.n_generated = trace.length();
  map.weights.assign(trace.n_visual, 0.0);
  for (std::size_t slot : slots) {
    for (std::size_t h = 0; h < trace.n_heads; ++h) {
      for (std::size_t j = 0; j < trace.length(); ++j) {
        for (std::size_t i = 0; i < trace.n_visual; ++i) map.weights[i] += trace.attn(slot, h, j, i);
      }
    }
  }
  return map;
}

std::size_t mask_cardinality(std::size_t n_tokens, int k_percent) {
  if (k_percent < 0 || k_percent > 100) throw InvalidArgument("k_percent must lie in [0, 100]");
  return n_tokens * static_cast<std::size_t>(k_percent) / 100;
}

MaskSpec top_k_mask(const SaliencyMap& map, int k_percent) {
  const std::size_t n = map.weights.size();
  const std::size_t k = mask_cardinality(n, k_percent);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return map.weights[a] > map.weights[b]; });
  order.resize(k);
  return MaskSpec::from_indices(MaskKind::core, std::move(order), n);
}

MaskSpec random_mask(std::size_t n_tokens, std::size_t cardinality, std::uint64_t seed) {
  if (cardinality > n_tokens) throw InvalidArgument("random mask cardinality exceeds token count");
  std::vector<std::size_t> pool(n_tokens);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `cardinality` slots become the sample.
  for (std::size_t i = 0; i < cardinality; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n_tokens - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(cardinality);
  return MaskSpec::from_indices(MaskKind::random, std::move(pool), n_tokens);
}

MaskSpec ground_truth_mask(const VisualLayout& layout) {
  layout.validate();
  if (layout.evidence_regions.empty()) throw DataError("ground-truth mask needs evidence regions");
  MaskSpec m = MaskSpec::from_indices(MaskKind::ground_truth, layout.evidence_patches(), layout.n_tokens());
  if (m.kind == MaskKind::none) m.suspicious = true;
  return m;
}

EvidenceAttention evidence_attention_ratio(const SaliencyMap& map, const VisualLayout& layout) {
  if (map.weights.size() != layout.n_tokens()) throw InvalidArgument("saliency map does not match the layout");
  if (layout.evidence_regions.empty()) throw DataError("evidence attention needs evidence regions");
  const auto inside = layout.evidence_patches();
  EvidenceAttention out;
  out.n_inside = inside.size();
  out.n_outside = layout.n_tokens() - inside.size();
  if (out.n_inside == 0 || out.n_outside == 0) {
    throw DataError("evidence attention needs patches both inside and outside the evidence regions");
  }
  double in_sum = 0.0, out_sum = 0.0;
  for (std::size_t i = 0; i < map.weights.size(); ++i) {
    (std::binary_search(inside.begin(), inside.end(), i) ? in_sum : out_sum) += map.weights[i];
  }
  out.inside = in_sum / static_cast<double>(out.n_inside);
  out.outside = out_sum / static_cast<double>(out.n_outside);
  return out;
}

nlohmann::json mask_record(const std::string& sample_id, const MaskSpec& mask, int k_percent,
                           const VisualLayout& layout) {
  return {{"sample_id", sample_id},
          {"kind", to_string(mask.kind)},
          {"k_percent", k_percent},
          {"indices", mask.indices},
          {"grid", {layout.rows, layout.cols}},
          {"suspicious", mask.suspicious},
          {"overlay", mask_overlay(mask, layout)}};
}

std::vector<std::vector<int>> mask_overlay(const MaskSpec& mask, const VisualLayout& layout) {
  std::vector<std::vector<int>> grid(layout.rows, std::vector<int>(layout.cols, 0));
  for (std::size_t i : mask.indices) {
    if (i < layout.n_tokens()) grid[i / layout.cols][i % layout.cols] = 1;
  }
  return grid;
}

}  // namespace vauq

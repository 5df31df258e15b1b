#include "vauq/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "vauq/errors.hpp"

namespace vauq {

std::string LayerBand::to_string() const { return std::to_string(start) + "-" + std::to_string(end); }

LayerBand parse_layer_band(std::string_view text) {
  const auto sep = text.find_first_of(",-:");
  if (sep == std::string_view::npos || sep == 0) {
    throw InvalidArgument("layer band must look like 'start,end': " + std::string(text));
  }
  LayerBand band;
  auto parse = [&](std::string_view part, int& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw InvalidArgument("bad layer index in band: " + std::string(text));
    }
  };
  parse(text.substr(0, sep), band.start);
  parse(text.substr(sep + 1), band.end);
  if (band.start < 0 || band.start > band.end) {
    throw InvalidArgument("layer band needs 0 <= start <= end: " + std::string(text));
  }
  return band;
}

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::none: return "none";
    case MaskKind::core: return "core";
    case MaskKind::random: return "random";
    case MaskKind::ground_truth: return "ground_truth";
    case MaskKind::blank: return "blank";
  }
  return "none";
}

MaskKind mask_kind_from_string(std::string_view text) {
  if (text == "none") return MaskKind::none;
  if (text == "core") return MaskKind::core;
  if (text == "random" || text == "rand") return MaskKind::random;
  if (text == "ground_truth" || text == "gt") return MaskKind::ground_truth;
  if (text == "blank") return MaskKind::blank;
  throw InvalidArgument("unknown mask kind: " + std::string(text));
}

MaskSpec MaskSpec::none(std::size_t n_tokens) {
  MaskSpec m;
  m.n_tokens = n_tokens;
  return m;
}

MaskSpec MaskSpec::blank(std::size_t n_tokens) {
  MaskSpec m;
  m.kind = n_tokens == 0 ? MaskKind::none : MaskKind::blank;
  m.n_tokens = n_tokens;
  m.indices.resize(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) m.indices[i] = i;
  return m;
}

MaskSpec MaskSpec::from_indices(MaskKind kind, std::vector<std::size_t> indices, std::size_t n_tokens) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (!indices.empty() && indices.back() >= n_tokens) {
    throw InvalidArgument("mask index " + std::to_string(indices.back()) + " out of range for " +
                          std::to_string(n_tokens) + " visual tokens");
  }
  MaskSpec m;
  m.n_tokens = n_tokens;
  if (indices.empty()) {
    m.kind = MaskKind::none;
  } else if (indices.size() == n_tokens) {
    m.kind = MaskKind::blank;
  } else if (kind == MaskKind::none || kind == MaskKind::blank) {
    throw InvalidArgument("a partial index set cannot be labeled '" + std::string(to_string(kind)) + "'");
  } else {
    m.kind = kind;
  }
  m.indices = std::move(indices);
  return m;
}

bool MaskSpec::contains(std::size_t index) const {
  return std::binary_search(indices.begin(), indices.end(), index);
}

std::pair<double, double> VisualLayout::patch_center(std::size_t index) const {
  const std::size_t r = index / cols;
  const std::size_t c = index % cols;
  return {(static_cast<double>(c) + 0.5) / static_cast<double>(cols),
          (static_cast<double>(r) + 0.5) / static_cast<double>(rows)};
}

std::vector<std::size_t> VisualLayout::evidence_patches() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_tokens(); ++i) {
    const auto [x, y] = patch_center(i);
    for (const Box& b : evidence_regions) {
      if (b.contains(x, y)) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

void VisualLayout::validate() const {
  if (rows == 0 || cols == 0) throw InvalidArgument("visual layout needs a non-empty grid");
  for (const Box& b : evidence_regions) {
    if (!b.valid()) throw InvalidArgument("evidence box must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1");
  }
}

std::string_view to_string(BlankMode mode) { return mode == BlankMode::knockout ? "knockout" : "removal"; }

BlankMode blank_mode_from_string(std::string_view text) {
  if (text == "knockout") return BlankMode::knockout;
  if (text == "removal") return BlankMode::removal;
  throw InvalidArgument("unknown blank mode: " + std::string(text));
}

std::string_view to_string(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::full: return "full";
    case ConditionKind::blank: return "blank";
    case ConditionKind::masked: return "masked";
  }
  return "full";
}

std::optional<std::size_t> HiddenStates::slot_of(int layer) const {
  auto it = std::find(layers.begin(), layers.end(), layer);
  if (it == layers.end()) return std::nullopt;
  return static_cast<std::size_t>(it - layers.begin());
}

std::span<const float> HiddenStates::generated_at(std::size_t slot, std::size_t position) const {
  return {generated.data() + (slot * n_generated + position) * dim, dim};
}

std::span<const float> HiddenStates::visual_at(std::size_t slot, std::size_t position) const {
  return {visual.data() + (slot * n_visual + position) * dim, dim};
}

std::vector<double> HiddenStates::generated_mean(int layer) const {
  const auto slot = slot_of(layer);
  if (!slot) throw InvalidArgument("hidden states not exported for layer " + std::to_string(layer));
  std::vector<double> mean(dim, 0.0);
  if (n_generated == 0) return mean;
  for (std::size_t j = 0; j < n_generated; ++j) {
    auto v = generated_at(*slot, j);
    for (std::size_t k = 0; k < dim; ++k) mean[k] += v[k];
  }
  for (double& x : mean) x /= static_cast<double>(n_generated);
  return mean;
}

ConditionKind GenerationTrace::condition() const {
  switch (mask.kind) {
    case MaskKind::none: return ConditionKind::full;
    case MaskKind::blank: return ConditionKind::blank;
    default: return ConditionKind::masked;
  }
}

std::optional<std::size_t> GenerationTrace::attention_slot(int layer) const {
  auto it = std::find(attention_layers.begin(), attention_layers.end(), layer);
  if (it == attention_layers.end()) return std::nullopt;
  return static_cast<std::size_t>(it - attention_layers.begin());
}

void GenerationTrace::validate() const {
  if (steps.size() != tokens.size()) throw InvalidArgument("trace needs exactly one StepStats per token");
  for (const StepStats& s : steps) {
    if (!(s.entropy >= -1e-12) || !(s.logprob_realized <= 1e-12)) {
      throw InvalidArgument("step statistics out of range");
    }
  }
  const std::size_t expected = attention_layers.size() * n_heads * tokens.size() * n_visual;
  if (attention.size() != expected) throw InvalidArgument("attention tensor shape mismatch");
  const std::size_t rows = n_visual == 0 ? 0 : expected / n_visual;
  for (std::size_t row = 0; row < rows; ++row) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n_visual; ++i) {
      const float a = attention[row * n_visual + i];
      if (!(a >= 0.0f && a <= 1.0f)) throw InvalidArgument("attention weight outside [0,1]");
      mass += a;
    }
    if (mass > 1.0 + 1e-5) throw InvalidArgument("visual attention mass exceeds its row total");
  }
  const HiddenStates& h = hidden;
  if (h.generated.size() != h.layers.size() * h.n_generated * h.dim ||
      h.visual.size() != h.layers.size() * h.n_visual * h.dim) {
    throw InvalidArgument("hidden-state tensor shape mismatch");
  }
}

}  // namespace vauq

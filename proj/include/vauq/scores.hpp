#pragma once

#include <map>
#include <optional>
#include <span>

#include "vauq/types.hpp"

namespace vauq {

/// Length-normalized entropies of one fixed response under each condition.
struct ConditionEntropies {
  double full = 0.0;                   // H(y | v, t)
  std::optional<double> blank;         // H(y | no image, t)
  std::map<MaskKind, double> masked;   // H(y | v_masked, t) per mask kind

  /// Entropy for a degraded condition, if present. blank reads `blank`.
  std::optional<double> degraded(MaskKind kind) const;
};

/// Weighting, patch share and layer band of the combined score.
struct VauqParams {
  double alpha = 0.6;
  int k_percent = 60;
  LayerBand layer_band{10, 25};

  void validate() const;
  friend bool operator==(const VauqParams&, const VauqParams&) = default;
};

/// Mean of per-step entropies. Throws DegenerateSample on an empty sequence.
double mean_entropy(std::span<const StepStats> steps);

/// IS = H(y | degraded) - H(y | full). Negative values are kept as is.
double image_information_score(const ConditionEntropies& ce, MaskKind condition);

/// s = h_full - alpha * IS, the direct form.
double vauq_score(double h_full, double h_masked, double alpha);
/// s = (1 + alpha) * h_full - alpha * h_masked, the expanded form.
double vauq_score_expanded(double h_full, double h_masked, double alpha);

/// VAUQ with the core-masked IS. Higher = more likely hallucinated.
double vauq_score(const ConditionEntropies& ce, const VauqParams& params);
/// Same combination with another masking variant substituted for the core mask.
double vauq_score(const ConditionEntropies& ce, double alpha, MaskKind variant);

enum class Decision { correct = 0, hallucinated = 1 };

/// hallucinated iff s >= tau.
Decision threshold_decision(double s, double tau);

}  // namespace vauq

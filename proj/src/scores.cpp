#include "vauq/scores.hpp"

#include <string>

#include "vauq/errors.hpp"

namespace vauq {

std::optional<double> ConditionEntropies::degraded(MaskKind kind) const {
  if (kind == MaskKind::blank) {
    if (blank) return blank;
    auto it = masked.find(MaskKind::blank);
    if (it != masked.end()) return it->second;
    return std::nullopt;
  }
  auto it = masked.find(kind);
  if (it == masked.end()) return std::nullopt;
  return it->second;
}

void VauqParams::validate() const {
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
  if (k_percent < 0 || k_percent > 100) throw InvalidArgument("k_percent must lie in [0, 100]");
  if (layer_band.start < 0 || layer_band.start > layer_band.end) throw InvalidArgument("layer band needs start <= end");
}

double mean_entropy(std::span<const StepStats> steps) {
  if (steps.empty()) throw DegenerateSample("mean entropy of an empty response");
  double sum = 0.0;
  for (const StepStats& s : steps) sum += s.entropy;
  return sum / static_cast<double>(steps.size());
}

double image_information_score(const ConditionEntropies& ce, MaskKind condition) {
  const auto h = ce.degraded(condition);
  if (!h) throw InvalidArgument("no entropy recorded for condition '" + std::string(to_string(condition)) + "'");
  return *h - ce.full;
}

double vauq_score(double h_full, double h_masked, double alpha) { return h_full - alpha * (h_masked - h_full); }

double vauq_score_expanded(double h_full, double h_masked, double alpha) {
  return (1.0 + alpha) * h_full - alpha * h_masked;
}

double vauq_score(const ConditionEntropies& ce, const VauqParams& params) {
  params.validate();
  return vauq_score(ce, params.alpha, MaskKind::core);
}

double vauq_score(const ConditionEntropies& ce, double alpha, MaskKind variant) {
  const auto h = ce.degraded(variant);
  if (!h) {
    throw InvalidArgument("VAUQ needs the '" + std::string(to_string(variant)) + "' masked entropy");
  }
  return vauq_score(ce.full, *h, alpha);
}

Decision threshold_decision(double s, double tau) { return s >= tau ? Decision::hallucinated : Decision::correct; }

}  // namespace vauq

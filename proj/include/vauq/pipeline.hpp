#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vauq/backend.hpp"
#include "vauq/dataset.hpp"
#include "vauq/errors.hpp"
#include "vauq/evaluation.hpp"
#include "vauq/scores.hpp"
#include "vauq/trace_io.hpp"

namespace vauq {

enum class Orientation { higher_hallucinated, lower_hallucinated };

std::string_view to_string(Orientation o);

/// Every score name the pipeline knows, in canonical report order.
const std::vector<std::string>& known_scores();
/// Throws ConfigError for unknown names and for named-but-unimplemented ones.
void validate_score_names(const std::vector<std::string>& names);
Orientation score_orientation(const std::string& name);

struct ScoringConfig {
  VauqParams vauq;
  std::vector<std::string> scores{"entropy", "is_core", "vauq"};
  MaskKind mask_kind = MaskKind::core;  // IS variant used by the plain "vauq" score
  BlankMode blank_mode = BlankMode::knockout;
  std::uint64_t seed = 0;  // random masks and dispersion sampling
  std::string prompt_suffix;
  std::size_t max_tokens = 128;
  LayerBand svar_band{5, 18};
  int lens_text_layer = -1;  // -1: middle layer
  int lens_image_layer = -1;
  int embedding_layer = -1;
  std::size_t dispersion_samples = 5;
  double dispersion_temperature = 1.0;
  double eigenscore_ridge = 1e-3;

  void validate() const;
};

/// Grid of (band, K) core masks whose entropies a sweep needs.
struct SweepAxes {
  std::vector<LayerBand> bands;
  std::vector<int> ks;
};

struct ScoreEntry {
  std::optional<double> value;
  Orientation orientation = Orientation::higher_hallucinated;
  std::string params_hash;
  std::string status = "ok";  // ok | flagged | degenerate | error
  std::string note;
  ErrorKind error_kind = ErrorKind::data;  // meaningful when status is "error"
};

enum class SampleStatus { ok, degenerate, error };

std::string_view to_string(SampleStatus s);

struct MethodCost {
  double seconds = 0.0;
  PassCounts passes;
};

struct SampleResult {
  std::string sample_id;
  std::string dataset;
  Label label = Label::unlabeled;
  SplitTag split = SplitTag::none;
  SampleStatus status = SampleStatus::ok;
  std::string error;
  ErrorKind error_kind = ErrorKind::data;

  ConditionEntropies entropies;
  std::map<std::string, ScoreEntry> scores;
  std::vector<std::pair<int, MaskSpec>> masks;  // (k_percent, mask) for export
  VisualLayout layout;
  std::map<std::string, MethodCost> costs;  // per requested score

  // Filled when sweep axes are given: h_masked[band][k].
  std::vector<std::vector<double>> core_grid;

  bool label_known() const { return label != Label::unlabeled; }
};

/// Per-sample scoring against one backend instance.
///
/// Each record's response is fixed first: records carrying response tokens are
/// teacher-forced under the full condition, others are generated greedily.
/// Every degraded condition then re-scores that same response.
class Scorer {
 public:
  Scorer(Backend& backend, ScoringConfig config, const TraceCache* cache = nullptr);

  SampleResult score(const EvalRecord& record, const SweepAxes* axes = nullptr);

  /// Hash of the parameters that determine one score's value.
  std::string params_hash(const std::string& score_name) const;
  nlohmann::json score_params(const std::string& score_name) const;
  const ScoringConfig& config() const { return config_; }

 private:
  class Sample;

  Backend& backend_;
  ScoringConfig config_;
  const TraceCache* cache_;
};

/// Registers per-record toy scenes on a toy backend; a no-op for other
/// backends. Conflicting scenes for one image_ref are a DataError.
void register_scenes(Backend& backend, const std::vector<EvalRecord>& records);

/// Scores records on `jobs` threads, each with its own backend clone. Results
/// come back sorted by (sample_id, dataset). `counts` receives the summed
/// backend pass counts.
std::vector<SampleResult> score_records(const Backend& prototype, const ScoringConfig& config,
                                        const std::vector<EvalRecord>& records, const TraceCache* cache,
                                        std::size_t jobs, PassCounts* counts = nullptr,
                                        const SweepAxes* axes = nullptr);

/// AUROC of one score over the labeled, successfully scored results, flipped
/// so that higher always means hallucinated. nullopt when a class is missing.
std::optional<double> score_auroc(const std::vector<const SampleResult*>& results, const std::string& score_name);

/// EntropyTable over labeled, successfully scored results that carry a core grid.
EntropyTable entropy_table(const std::vector<const SampleResult*>& results, const SweepAxes& axes);

}  // namespace vauq

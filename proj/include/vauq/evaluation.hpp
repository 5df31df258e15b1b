#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vauq/backend.hpp"
#include "vauq/scores.hpp"

namespace vauq {

enum class Label { correct = 0, hallucinated = 1, unlabeled = 2 };

std::string_view to_string(Label label);

// --- judge labels ------------------------------------------------------------

struct JudgeOutcome {
  Label label = Label::unlabeled;
  std::string reason;  // why the sample stayed unlabeled, empty otherwise
  std::size_t n_correct = 0;
  std::size_t n_wrong = 0;
  std::size_t n_malformed = 0;
};

/// Majority vote over "Correct"/"Wrong" verdicts (case-insensitive). Ties and
/// all-unparseable lists give Label::unlabeled with a reason.
JudgeOutcome ingest_judgments(const std::vector<std::string>& verdicts);

// --- AUROC -----------------------------------------------------------------

/// Mann-Whitney AUROC with midranks; label 1 (hallucinated) is the positive
/// class. Throws DataError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// --- sweeps ------------------------------------------------------------------

struct SweepGrid {
  std::vector<double> alphas;
  std::vector<int> ks;
  std::vector<LayerBand> bands;
  double validation_fraction = 0.2;
  std::uint64_t split_seed = 0;

  /// alpha 0.0..5.0 step 0.1, K 0..100 step 10, one band.
  static SweepGrid defaults(LayerBand band = {10, 25});
  void validate() const;
};

/// Condition entropies for a labeled population, indexed
/// masked[band][k][sample]. Grid axes that a masking variant ignores simply
/// repeat the same column.
struct EntropyTable {
  std::vector<std::string> sample_ids;
  std::vector<int> labels;
  std::vector<double> h_full;
  std::vector<LayerBand> bands;
  std::vector<int> ks;
  std::vector<std::vector<std::vector<double>>> h_masked;

  std::size_t size() const { return labels.size(); }
  const std::vector<double>& masked(std::size_t band, std::size_t k) const { return h_masked.at(band).at(k); }
  void validate() const;
};

struct Split {
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Stratified by label: each class contributes round(fraction * count)
/// samples (at least one, leaving at least one) to validation.
Split stratified_split(std::span<const int> labels, double fraction, std::uint64_t seed);

struct SweepCell {
  double alpha = 0.0;
  int k_percent = 0;
  LayerBand band;
  double validation_auroc = 0.0;
  double test_auroc = 0.0;
};

struct SweepResult {
  VauqParams best;
  double validation_auroc = 0.0;
  double test_auroc = 0.0;
  std::vector<SweepCell> surface;
  Split split;
};

inline constexpr std::size_t kMinSweepSamples = 20;

/// Selects (alpha, K, band) by validation AUROC; ties go to the smaller alpha,
/// then the smaller K, then the earlier band. Reports test AUROC at the pick.
SweepResult sweep(const EntropyTable& table, const SweepGrid& grid);

/// AUROC of the VAUQ score at fixed params over a subset of samples.
double vauq_auroc(const EntropyTable& table, const VauqParams& params, std::span<const std::size_t> subset);

struct TransferResult {
  VauqParams source_params;
  double transferred_auroc = 0.0;   // target test split, source-selected params
  double target_tuned_auroc = 0.0;  // target test split, target-selected params
  double gap = 0.0;                 // tuned - transferred
};

TransferResult transfer(const EntropyTable& source, const EntropyTable& target, const SweepGrid& grid);

// --- timing ------------------------------------------------------------------

struct TimingSample {
  std::string method;
  double seconds = 0.0;
  PassCounts passes;
};

struct TimingRow {
  std::string method;
  std::size_t n_samples = 0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  double mean_generations = 0.0;
  double mean_decode_steps = 0.0;
  double mean_rescore_passes = 0.0;
  double mean_text_queries = 0.0;
};

/// Per-method mean and (population) standard deviation of wall time plus mean
/// forward-pass counts. Rows come out in first-seen method order.
std::vector<TimingRow> timing_report(const std::vector<TimingSample>& samples);

}  // namespace vauq

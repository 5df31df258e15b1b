#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vauq/dataset.hpp"
#include "vauq/pipeline.hpp"

namespace vauq {

/// Round-trip text for a double ("%.17g"); empty for nullopt.
std::string format_value(std::optional<double> v);
/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s);

nlohmann::json condition_entropies_json(const ConditionEntropies& ce);

/// One line per (sample, score): sample_id, dataset, split, label, score_name,
/// value, orientation, params_hash, condition_entropies, status, note.
void write_score_report(const std::filesystem::path& path, const std::vector<SampleResult>& results,
                        const std::vector<std::string>& scores);

/// One row per sample, one column per score.
void write_score_summary(const std::filesystem::path& path, const std::vector<SampleResult>& results,
                         const std::vector<std::string>& scores);

/// One line per exported mask: sample_id, kind, k_percent, indices, grid, overlay.
void write_masks(const std::filesystem::path& path, const std::vector<SampleResult>& results);

struct ErrorEntry {
  std::string source;
  std::size_t line = 0;  // dataset line for malformed input, 0 otherwise
  std::string sample_id;
  std::string score;
  std::string kind;  // malformed | degenerate | backend | data | ...
  std::string message;
};

std::vector<ErrorEntry> collect_errors(const std::vector<Dataset>& datasets, const std::vector<SampleResult>& results);
void write_errors(const std::filesystem::path& path, const std::vector<ErrorEntry>& errors);

/// A score report row read back for evaluation.
struct ReportRow {
  std::string sample_id;
  std::string dataset;
  std::string split;
  Label label = Label::unlabeled;
  std::string score_name;
  std::optional<double> value;
  Orientation orientation = Orientation::higher_hallucinated;
};

std::vector<ReportRow> read_score_report(const std::filesystem::path& path);

}  // namespace vauq

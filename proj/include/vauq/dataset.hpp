#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vauq/evaluation.hpp"
#include "vauq/toy_model.hpp"
#include "vauq/types.hpp"

namespace vauq {

enum class SplitTag { none, factual, counterfactual };

std::string_view to_string(SplitTag tag);
SplitTag split_tag_from_string(std::string_view text);

/// One dataset row.
struct EvalRecord {
  std::string sample_id;
  std::string question;
  std::string image_ref;
  std::string response;                  // may be empty: the response is then generated
  std::vector<TokenId> response_tokens;  // fixed response for teacher-forced scoring
  Label label = Label::unlabeled;
  std::string label_reason;
  std::vector<std::string> judgments;
  SplitTag split = SplitTag::none;
  std::string dataset;
  std::vector<Box> evidence_regions;
  std::optional<ToyScene> toy_scene;  // scene behind image_ref on the toy backend

  bool labeled() const { return label != Label::unlabeled; }
};

/// Parses one record. An explicit "label" (0, 1 or null) wins over
/// "judgments"; without either the record is unlabeled. Throws DataError.
EvalRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const EvalRecord& r);

struct MalformedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct Dataset {
  std::string source;
  std::vector<EvalRecord> records;
  std::vector<MalformedLine> malformed;
  std::size_t n_lines = 0;  // non-blank lines seen
};

inline constexpr double kMaxMalformedFraction = 0.10;

/// Reads line-delimited JSON records. Malformed lines and duplicate sample ids
/// are skipped and listed; more than `max_malformed` of the lines being
/// malformed (or no valid record at all) is a DataError.
Dataset load_dataset(const std::filesystem::path& path, double max_malformed = kMaxMalformedFraction);
Dataset parse_dataset(std::istream& in, const std::string& source, double max_malformed = kMaxMalformedFraction);

void write_dataset(const std::filesystem::path& path, const std::vector<EvalRecord>& records);

}  // namespace vauq

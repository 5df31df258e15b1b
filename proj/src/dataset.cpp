#include "vauq/dataset.hpp"

#include <fstream>
#include <set>

#include "vauq/errors.hpp"
#include "vauq/json_io.hpp"

namespace vauq {

using nlohmann::json;

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::none: return "none";
    case SplitTag::factual: return "factual";
    case SplitTag::counterfactual: return "counterfactual";
  }
  return "none";
}

SplitTag split_tag_from_string(std::string_view text) {
  if (text.empty() || text == "none") return SplitTag::none;
  if (text == "factual") return SplitTag::factual;
  if (text == "counterfactual") return SplitTag::counterfactual;
  throw DataError("unknown split tag: " + std::string(text));
}

namespace {

std::string string_field(const json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw DataError(std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

EvalRecord record_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  EvalRecord r;
  r.sample_id = string_field(j, "sample_id", true);
  if (r.sample_id.empty()) throw DataError("sample_id must be non-empty");
  r.question = string_field(j, "question", true);
  r.image_ref = string_field(j, "image_ref", true);
  r.response = string_field(j, "response", false);
  r.dataset = string_field(j, "dataset", false);
  r.split = split_tag_from_string(string_field(j, "split", false));

  if (auto it = j.find("response_tokens"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("response_tokens must be an array");
    for (const auto& t : *it) {
      if (!t.is_number_integer() || t.get<long long>() < 0) throw DataError("response tokens must be ids >= 0");
      r.response_tokens.push_back(t.get<TokenId>());
    }
  }
  if (auto it = j.find("judgments"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("judgments must be an array of strings");
    for (const auto& v : *it) {
      if (!v.is_string()) throw DataError("judgments must be an array of strings");
      r.judgments.push_back(v.get<std::string>());
    }
  }
  if (auto it = j.find("label"); it != j.end()) {
    if (it->is_null()) {
      r.label = Label::unlabeled;
      r.label_reason = "explicitly unlabeled";
    } else if (it->is_number_integer() && (it->get<int>() == 0 || it->get<int>() == 1)) {
      r.label = it->get<int>() == 1 ? Label::hallucinated : Label::correct;
    } else {
      throw DataError("label must be 0, 1 or null");
    }
  } else if (!r.judgments.empty()) {
    const JudgeOutcome o = ingest_judgments(r.judgments);
    r.label = o.label;
    r.label_reason = o.reason;
  } else {
    r.label_reason = "no label or judgments";
  }
  if (auto it = j.find("evidence_regions"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("evidence_regions must be an array of boxes");
    r.evidence_regions = it->get<std::vector<Box>>();
  }
  if (auto it = j.find("toy_scene"); it != j.end() && !it->is_null()) {
    try {
      r.toy_scene = it->get<ToyScene>();
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
  }
  return r;
}

json record_to_json(const EvalRecord& r) {
  json j = {{"sample_id", r.sample_id},
            {"question", r.question},
            {"image_ref", r.image_ref},
            {"response", r.response},
            {"response_tokens", r.response_tokens},
            {"split", to_string(r.split)},
            {"dataset", r.dataset}};
  if (r.labeled()) {
    j["label"] = static_cast<int>(r.label);
  } else if (r.judgments.empty()) {
    j["label"] = nullptr;
  }
  if (!r.judgments.empty()) j["judgments"] = r.judgments;
  if (!r.evidence_regions.empty()) j["evidence_regions"] = r.evidence_regions;
  if (r.toy_scene) j["toy_scene"] = *r.toy_scene;
  return j;
}

Dataset parse_dataset(std::istream& in, const std::string& source, double max_malformed) {
  Dataset ds;
  ds.source = source;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++ds.n_lines;
    try {
      EvalRecord r = record_from_json(json::parse(line));
      if (!seen.insert(r.sample_id).second) throw DataError("duplicate sample_id '" + r.sample_id + "'");
      ds.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      ds.malformed.push_back({line_no, std::string("invalid JSON: ") + e.what()});
    } catch (const DataError& e) {
      ds.malformed.push_back({line_no, e.what()});
    }
  }
  if (ds.records.empty()) throw DataError(source + ": no valid records");
  const double frac = static_cast<double>(ds.malformed.size()) / static_cast<double>(ds.n_lines);
  if (frac > max_malformed) {
    throw DataError(source + ": " + std::to_string(ds.malformed.size()) + " of " + std::to_string(ds.n_lines) +
                    " lines are malformed");
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, double max_malformed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_dataset(in, path.string(), max_malformed);
}

void write_dataset(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

}  // namespace vauq

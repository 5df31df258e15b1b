#include "vauq/report.hpp"

#include <cstdio>
#include <fstream>

#include "vauq/errors.hpp"
#include "vauq/saliency.hpp"

namespace vauq {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::config: return "config";
    case ErrorKind::backend: return "backend";
    case ErrorKind::data: return "data";
    case ErrorKind::degenerate: return "degenerate";
  }
  return "data";
}

json label_json(Label l) { return l == Label::unlabeled ? json(nullptr) : json(static_cast<int>(l)); }

}  // namespace

std::string format_value(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json condition_entropies_json(const ConditionEntropies& ce) {
  json j = {{"full", ce.full}};
  if (ce.blank) j["blank"] = *ce.blank;
  for (const auto& [kind, h] : ce.masked) j[std::string(to_string(kind))] = h;
  return j;
}

void write_score_report(const std::filesystem::path& path, const std::vector<SampleResult>& results,
                        const std::vector<std::string>& scores) {
  auto out = open_out(path);
  for (const auto& r : results) {
    const json ce = r.status == SampleStatus::ok ? condition_entropies_json(r.entropies) : json(nullptr);
    for (const auto& name : scores) {
      const ScoreEntry& e = r.scores.at(name);
      json row = {{"sample_id", r.sample_id},
                  {"dataset", r.dataset},
                  {"split", to_string(r.split)},
                  {"label", label_json(r.label)},
                  {"score_name", name},
                  {"value", e.value ? json(*e.value) : json(nullptr)},
                  {"orientation", to_string(e.orientation)},
                  {"params_hash", e.params_hash},
                  {"condition_entropies", ce},
                  {"status", e.status}};
      if (!e.note.empty()) row["note"] = e.note;
      out << row.dump() << '\n';
    }
  }
}

void write_score_summary(const std::filesystem::path& path, const std::vector<SampleResult>& results,
                         const std::vector<std::string>& scores) {
  auto out = open_out(path);
  out << "sample_id,dataset,split,label,status";
  for (const auto& name : scores) out << ',' << name;
  out << '\n';
  for (const auto& r : results) {
    out << csv_field(r.sample_id) << ',' << csv_field(r.dataset) << ',' << to_string(r.split) << ','
        << (r.label_known() ? std::to_string(static_cast<int>(r.label)) : "") << ',' << to_string(r.status);
    for (const auto& name : scores) out << ',' << format_value(r.scores.at(name).value);
    out << '\n';
  }
}

void write_masks(const std::filesystem::path& path, const std::vector<SampleResult>& results) {
  auto out = open_out(path);
  for (const auto& r : results) {
    for (const auto& [k, mask] : r.masks) {
      json rec = mask_record(r.sample_id, mask, k, r.layout);
      if (k < 0) rec["k_percent"] = nullptr;
      rec["dataset"] = r.dataset;
      out << rec.dump() << '\n';
    }
  }
}

std::vector<ErrorEntry> collect_errors(const std::vector<Dataset>& datasets, const std::vector<SampleResult>& results) {
  std::vector<ErrorEntry> errors;
  for (const auto& ds : datasets) {
    for (const auto& m : ds.malformed) errors.push_back({ds.source, m.line, "", "", "malformed", m.reason});
  }
  for (const auto& r : results) {
    if (r.status == SampleStatus::degenerate) {
      errors.push_back({r.dataset, 0, r.sample_id, "", "degenerate", "empty response; excluded from scoring"});
      continue;
    }
    if (r.status == SampleStatus::error) {
      errors.push_back({r.dataset, 0, r.sample_id, "", error_kind_name(r.error_kind), r.error});
      continue;
    }
    for (const auto& [name, e] : r.scores) {
      if (e.status == "error") errors.push_back({r.dataset, 0, r.sample_id, name, error_kind_name(e.error_kind), e.note});
    }
  }
  return errors;
}

void write_errors(const std::filesystem::path& path, const std::vector<ErrorEntry>& errors) {
  auto out = open_out(path);
  for (const auto& e : errors) {
    json row = {{"source", e.source}, {"kind", e.kind}, {"message", e.message}};
    if (e.line) row["line"] = e.line;
    if (!e.sample_id.empty()) row["sample_id"] = e.sample_id;
    if (!e.score.empty()) row["score"] = e.score;
    out << row.dump() << '\n';
  }
}

std::vector<ReportRow> read_score_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score report " + path.string());
  std::vector<ReportRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ReportRow r;
      r.sample_id = j.at("sample_id").get<std::string>();
      r.dataset = j.value("dataset", "");
      r.split = j.value("split", "none");
      const json& label = j.at("label");
      if (!label.is_null()) r.label = label.get<int>() == 1 ? Label::hallucinated : Label::correct;
      r.score_name = j.at("score_name").get<std::string>();
      if (!j.at("value").is_null()) r.value = j.at("value").get<double>();
      r.orientation = j.value("orientation", "higher_is_hallucinated") == "lower_is_hallucinated"
                          ? Orientation::lower_hallucinated
                          : Orientation::higher_hallucinated;
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace vauq

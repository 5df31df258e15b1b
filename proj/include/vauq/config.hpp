#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "vauq/backend.hpp"
#include "vauq/evaluation.hpp"
#include "vauq/pipeline.hpp"
#include "vauq/toy_model.hpp"

namespace vauq {

inline constexpr const char* kCacheDirEnv = "VAUQ_CACHE_DIR";

struct BackendSpec {
  std::string kind = "toy";
  ToyConfig toy;
};

struct TransferSpec {
  std::string source;
  std::string target;
};

/// Everything a run depends on. Serialized into every output directory.
struct RunConfig {
  BackendSpec backend;
  std::vector<std::string> datasets;
  ScoringConfig scoring;
  SweepGrid sweep = SweepGrid::defaults();
  bool run_sweep = false;
  std::vector<TransferSpec> transfers;
  bool timing = false;
  std::vector<std::uint64_t> seeds{0};
  std::string cache_dir;  // empty: VAUQ_CACHE_DIR, else no cache
  std::string output_dir = "vauq-out";
  std::size_t jobs = 1;
  std::string report;  // eval only: score an existing report instead of datasets

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

/// Makes dataset and report paths absolute and checks that they exist.
void resolve_paths(RunConfig& c);
/// The configured cache directory, falling back to VAUQ_CACHE_DIR.
std::string effective_cache_dir(const RunConfig& c);

/// Throws BackendError for unknown backend kinds.
std::unique_ptr<Backend> make_backend(const BackendSpec& spec);

TransferSpec parse_transfer(const std::vector<std::string>& args);

}  // namespace vauq

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vauq/types.hpp"

namespace vauq {

struct Decoding {
  enum class Mode { greedy, sample };

  Mode mode = Mode::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static Decoding greedy() { return {}; }
  static Decoding sample(double temperature, std::uint64_t seed) { return {Mode::sample, temperature, seed}; }

  /// Canonical text form; part of cache keys.
  std::string describe() const;
};

/// What internals a call should export. Attention is always computed by the
/// model; this only controls what is copied into the trace.
struct ExportOptions {
  bool attention = true;
  std::vector<int> hidden_layers;  // 0 = embedding output
};

struct GenerateRequest {
  std::string image_ref;
  std::string prompt;
  Decoding decoding;
  std::size_t max_tokens = 128;
  ExportOptions exports;
};

/// Teacher-forced re-scoring of a fixed response under visual-token knockout.
struct RescoreRequest {
  std::string image_ref;
  std::string prompt;
  std::vector<TokenId> response;
  MaskSpec mask;
  BlankMode blank_mode = BlankMode::knockout;
  ExportOptions exports;
};

/// Forward-pass accounting. A generation of M tokens costs M decode steps; a
/// rescore is one teacher-forced pass regardless of M.
struct PassCounts {
  std::size_t generations = 0;
  std::size_t decode_steps = 0;
  std::size_t rescore_passes = 0;
  std::size_t text_queries = 0;

  PassCounts& operator+=(const PassCounts& o) {
    generations += o.generations;
    decode_steps += o.decode_steps;
    rescore_passes += o.rescore_passes;
    text_queries += o.text_queries;
    return *this;
  }
  friend bool operator==(const PassCounts&, const PassCounts&) = default;
};

/// Contract every scored model satisfies.
///
/// Instances are single-owner: at most one generate/rescore call in flight.
/// Use clone() to get an independent instance per worker thread.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;
  virtual std::size_t n_layers() const = 0;
  virtual VisualLayout layout(const std::string& image_ref) const = 0;

  /// Returns a trace with condition full. An immediate stop yields M = 0 and
  /// the trace reports degenerate().
  virtual GenerationTrace generate(const GenerateRequest& request) = 0;
  virtual GenerationTrace rescore(const RescoreRequest& request) = 0;
  /// Second-round text-only query (used by verbalized confidence).
  virtual std::string query_text(const std::string& image_ref, const std::string& prompt) = 0;
  virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;
  virtual bool supports_blank_removal() const { return false; }
  virtual std::unique_ptr<Backend> clone() const = 0;
  /// Identity of the image content behind a ref, for cache keys.
  virtual std::string content_key(const std::string& image_ref) const { return image_ref; }

  const PassCounts& counts() const { return counts_; }
  void reset_counts() { counts_ = {}; }

 protected:
  PassCounts counts_;
};

}  // namespace vauq

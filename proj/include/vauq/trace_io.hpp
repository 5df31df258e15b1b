#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vauq/backend.hpp"
#include "vauq/types.hpp"

namespace vauq {

inline constexpr std::uint32_t kTraceSchemaVersion = 1;

// Binary layout: 8-byte magic "VAUQTRC\0", u32 schema version, u64 header
// length, a JSON header describing every array (shapes, dtypes, mask,
// condition), then little-endian payloads in this order: tokens (i32),
// steps (f64 entropy/logprob pairs), attention (f32, [L][H][M][N]),
// generated hidden states (f32), visual hidden states (f32).
void write_trace(std::ostream& out, const GenerationTrace& trace);
GenerationTrace read_trace(std::istream& in);

void save_trace(const std::filesystem::path& path, const GenerationTrace& trace);
GenerationTrace load_trace(const std::filesystem::path& path);

/// Inputs that determine a trace. The hash is the cache key.
struct TraceKey {
  std::string backend_id;
  std::string decoding;
  std::string prompt;
  std::string image;  // Backend::content_key(image_ref)
  MaskSpec mask;
  BlankMode blank_mode = BlankMode::knockout;
  std::vector<TokenId> response;  // empty for generation
  std::vector<int> hidden_layers;
  bool attention = true;

  std::string hash() const;
};

/// On-disk trace cache: one file per (sample_id, condition, key).
///
/// Reads are shared; each key is written once, through a temporary file and
/// an atomic rename.
class TraceCache {
 public:
  explicit TraceCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  std::optional<GenerationTrace> load(const std::string& sample_id, const std::string& condition,
                                      const TraceKey& key) const;
  void store(const std::string& sample_id, const std::string& condition, const TraceKey& key,
             const GenerationTrace& trace) const;

  std::optional<std::string> load_text(const std::string& sample_id, const std::string& name,
                                       const std::string& key) const;
  void store_text(const std::string& sample_id, const std::string& name, const std::string& key,
                  const std::string& text) const;

  std::filesystem::path path_for(const std::string& sample_id, const std::string& condition,
                                 const std::string& key, const char* extension) const;

 private:
  std::filesystem::path root_;
};

}  // namespace vauq

#include "vauq/trace_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vauq/errors.hpp"
#include "vauq/hash.hpp"

namespace vauq {

static_assert(std::endian::native == std::endian::little, "trace payloads are written in host order");

namespace {

constexpr char kMagic[8] = {'V', 'A', 'U', 'Q', 'T', 'R', 'C', '\0'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void put_array(std::ostream& out, const std::vector<T>& v) {
  if (!v.empty()) out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated trace record");
  return v;
}

template <class T>
std::vector<T> get_array(std::istream& in, std::size_t n) {
  std::vector<T> v(n);
  if (n) in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw DataError("truncated trace payload");
  return v;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace

void write_trace(std::ostream& out, const GenerationTrace& t) {
  t.validate();
  nlohmann::json header = {
      {"schema_version", kTraceSchemaVersion},
      {"backend_id", t.backend_id},
      {"n_tokens", t.tokens.size()},
      {"condition", to_string(t.condition())},
      {"mask", {{"kind", to_string(t.mask.kind)}, {"indices", t.mask.indices}, {"n_tokens", t.mask.n_tokens},
                {"suspicious", t.mask.suspicious}}},
      {"blank_mode", to_string(t.blank_mode)},
      {"wall_time", t.wall_time},
      {"tokens", {{"dtype", "i32le"}, {"shape", {t.tokens.size()}}}},
      {"steps", {{"dtype", "f64le"}, {"shape", {t.steps.size(), 2}}, {"fields", {"entropy", "logprob_realized"}}}},
      {"attention",
       {{"dtype", "f32le"},
        {"order", "[L][H][M][N]"},
        {"layers", t.attention_layers},
        {"shape", {t.attention_layers.size(), t.n_heads, t.tokens.size(), t.n_visual}}}},
      {"hidden",
       {{"dtype", "f32le"},
        {"layers", t.hidden.layers},
        {"dim", t.hidden.dim},
        {"n_generated", t.hidden.n_generated},
        {"n_visual", t.hidden.n_visual}}},
  };
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kTraceSchemaVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_array(out, t.tokens);
  for (const StepStats& s : t.steps) {
    put(out, s.entropy);
    put(out, s.logprob_realized);
  }
  put_array(out, t.attention);
  put_array(out, t.hidden.generated);
  put_array(out, t.hidden.visual);
  if (!out) throw DataError("failed writing trace record");
}

GenerationTrace read_trace(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a trace record");
  const auto version = get<std::uint32_t>(in);
  if (version != kTraceSchemaVersion) {
    throw DataError("unsupported trace schema version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated trace header");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt trace header: ") + e.what());
  }

  GenerationTrace t;
  try {
    t.backend_id = h.at("backend_id").get<std::string>();
    const auto m = h.at("n_tokens").get<std::size_t>();
    const auto& mask = h.at("mask");
    t.mask.kind = mask_kind_from_string(mask.at("kind").get<std::string>());
    t.mask.indices = mask.at("indices").get<std::vector<std::size_t>>();
    t.mask.n_tokens = mask.at("n_tokens").get<std::size_t>();
    t.mask.suspicious = mask.value("suspicious", false);
    t.blank_mode = blank_mode_from_string(h.at("blank_mode").get<std::string>());
    t.wall_time = h.at("wall_time").get<double>();
    const auto& att = h.at("attention");
    t.attention_layers = att.at("layers").get<std::vector<int>>();
    const auto shape = att.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 4 || shape[0] != t.attention_layers.size() || shape[2] != m) {
      throw DataError("inconsistent attention shape in trace header");
    }
    t.n_heads = shape[1];
    t.n_visual = shape[3];
    const auto& hid = h.at("hidden");
    t.hidden.layers = hid.at("layers").get<std::vector<int>>();
    t.hidden.dim = hid.at("dim").get<std::size_t>();
    t.hidden.n_generated = hid.at("n_generated").get<std::size_t>();
    t.hidden.n_visual = hid.at("n_visual").get<std::size_t>();

    t.tokens = get_array<TokenId>(in, m);
    t.steps.resize(m);
    for (StepStats& s : t.steps) {
      s.entropy = get<double>(in);
      s.logprob_realized = get<double>(in);
    }
    t.attention = get_array<float>(in, shape[0] * shape[1] * shape[2] * shape[3]);
    const std::size_t nl = t.hidden.layers.size();
    t.hidden.generated = get_array<float>(in, nl * t.hidden.n_generated * t.hidden.dim);
    t.hidden.visual = get_array<float>(in, nl * t.hidden.n_visual * t.hidden.dim);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trace header: ") + e.what());
  }
  t.validate();
  return t;
}

void save_trace(const std::filesystem::path& path, const GenerationTrace& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_trace(out, trace);
}

GenerationTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_trace(in);
}

std::string TraceKey::hash() const {
  Fnv1a h;
  h.field(backend_id).field(decoding).field(prompt).field(image);
  h.field(to_string(mask.kind));
  for (std::size_t i : mask.indices) h.field(std::to_string(i));
  h.field(to_string(blank_mode));
  h.field("response");
  for (TokenId t : response) h.field(std::to_string(t));
  h.field("hidden");
  for (int l : hidden_layers) h.field(std::to_string(l));
  h.field(attention ? "attention" : "no-attention");
  return h.hex();
}

TraceCache::TraceCache(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw ConfigError("cannot create cache directory " + root_.string() + ": " + ec.message());
}

std::filesystem::path TraceCache::path_for(const std::string& sample_id, const std::string& condition,
                                           const std::string& key, const char* extension) const {
  return root_ / sanitize(sample_id) / (sanitize(condition) + "-" + key + extension);
}

std::optional<GenerationTrace> TraceCache::load(const std::string& sample_id, const std::string& condition,
                                                const TraceKey& key) const {
  const auto p = path_for(sample_id, condition, key.hash(), ".trace");
  if (!std::filesystem::exists(p)) return std::nullopt;
  return load_trace(p);
}

namespace {

template <class Writer>
void write_once(const std::filesystem::path& p, Writer&& writer) {
  if (std::filesystem::exists(p)) return;
  std::filesystem::create_directories(p.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp" << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const auto tmp = p.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write cache file " + tmp);
    writer(out);
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace

void TraceCache::store(const std::string& sample_id, const std::string& condition, const TraceKey& key,
                       const GenerationTrace& trace) const {
  write_once(path_for(sample_id, condition, key.hash(), ".trace"),
             [&](std::ostream& out) { write_trace(out, trace); });
}

std::optional<std::string> TraceCache::load_text(const std::string& sample_id, const std::string& name,
                                                 const std::string& key) const {
  const auto p = path_for(sample_id, name, key, ".txt");
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void TraceCache::store_text(const std::string& sample_id, const std::string& name, const std::string& key,
                            const std::string& text) const {
  write_once(path_for(sample_id, name, key, ".txt"), [&](std::ostream& out) { out << text; });
}

}  // namespace vauq

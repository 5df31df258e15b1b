#include "vauq/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "vauq/baselines.hpp"
#include "vauq/hash.hpp"
#include "vauq/json_io.hpp"
#include "vauq/random.hpp"
#include "vauq/saliency.hpp"
#include "vauq/toy_model.hpp"

namespace vauq {

using nlohmann::json;

std::string_view to_string(Orientation o) {
  return o == Orientation::higher_hallucinated ? "higher_is_hallucinated" : "lower_is_hallucinated";
}

std::string_view to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::ok: return "ok";
    case SampleStatus::degenerate: return "degenerate";
    case SampleStatus::error: return "error";
  }
  return "error";
}

const std::vector<std::string>& known_scores() {
  static const std::vector<std::string> names{
      "entropy",    "is_blank",   "is_core",    "is_random",           "is_gt",
      "vauq",       "vauq_blank", "vauq_random", "vauq_gt",            "perplexity",
      "verbalized", "svar",       "contextual_lens", "chain_of_embeddings", "eigenscore",
      "semantic_entropy"};
  return names;
}

void validate_score_names(const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("no scores requested");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n == "vl_uncertainty") {
      throw ConfigError("score 'vl_uncertainty' is not implemented: it needs external image/text perturbation "
                        "and an entailment model");
    }
    const auto& known = known_scores();
    if (std::find(known.begin(), known.end(), n) == known.end()) throw ConfigError("unknown score '" + n + "'");
    if (!seen.insert(n).second) throw ConfigError("score '" + n + "' requested twice");
  }
}

Orientation score_orientation(const std::string& name) {
  return name.rfind("is_", 0) == 0 ? Orientation::lower_hallucinated : Orientation::higher_hallucinated;
}

void ScoringConfig::validate() const {
  validate_score_names(scores);
  try {
    vauq.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (mask_kind == MaskKind::none) throw ConfigError("the vauq score needs a degrading mask kind");
  if (max_tokens == 0) throw ConfigError("max_tokens must be >= 1");
  if (svar_band.start < 0 || svar_band.start > svar_band.end) throw ConfigError("svar band needs start <= end");
  if (dispersion_samples < 2) throw ConfigError("dispersion scores need at least 2 samples");
  if (!(dispersion_temperature > 0.0)) throw ConfigError("dispersion temperature must be > 0");
  if (!(eigenscore_ridge >= 0.0)) throw ConfigError("eigenscore ridge must be >= 0");
}

namespace {

bool wants(const ScoringConfig& c, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (std::find(c.scores.begin(), c.scores.end(), n) != c.scores.end()) return true;
  }
  return false;
}

// Which degraded condition a score reads, if any.
std::optional<MaskKind> score_condition(const std::string& name, MaskKind vauq_kind) {
  if (name == "vauq") return vauq_kind;
  if (name == "is_core") return MaskKind::core;
  if (name == "is_blank" || name == "vauq_blank") return MaskKind::blank;
  if (name == "is_random" || name == "vauq_random") return MaskKind::random;
  if (name == "is_gt" || name == "vauq_gt") return MaskKind::ground_truth;
  return std::nullopt;
}

std::vector<std::string> score_components(const std::string& name, MaskKind vauq_kind) {
  if (name == "eigenscore" || name == "semantic_entropy") return {"dispersion"};
  if (name == "verbalized") return {"full", "verbalized"};
  if (auto kind = score_condition(name, vauq_kind)) return {"full", std::string(to_string(*kind))};
  return {"full"};
}

PassCounts minus(const PassCounts& a, const PassCounts& b) {
  return {a.generations - b.generations, a.decode_steps - b.decode_steps, a.rescore_passes - b.rescore_passes,
          a.text_queries - b.text_queries};
}

}  // namespace

// Lazily computed conditions for one record.
class Scorer::Sample {
 public:
  Sample(Scorer& scorer, const EvalRecord& record)
      : s_(scorer), cfg_(scorer.config_), r_(record), prompt_(record.question + cfg_.prompt_suffix) {}

  template <typename F>
  auto timed(const std::string& component, F&& f) {
    const PassCounts before = s_.backend_.counts();
    const auto t0 = std::chrono::steady_clock::now();
    auto out = f();
    MethodCost& c = costs[component];
    c.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.passes += minus(s_.backend_.counts(), before);
    return out;
  }

  int middle_layer() const { return static_cast<int>(s_.backend_.n_layers() / 2); }

  std::vector<int> full_hidden_layers() const {
    std::set<int> layers;
    if (wants(cfg_, {"contextual_lens"})) {
      layers.insert(cfg_.lens_text_layer < 0 ? middle_layer() : cfg_.lens_text_layer);
      layers.insert(cfg_.lens_image_layer < 0 ? middle_layer() : cfg_.lens_image_layer);
    }
    if (wants(cfg_, {"chain_of_embeddings"})) {
      for (int l = 0; l <= static_cast<int>(s_.backend_.n_layers()); ++l) layers.insert(l);
    }
    return {layers.begin(), layers.end()};
  }

  TraceKey base_key() const {
    TraceKey k;
    k.backend_id = s_.backend_.id();
    k.prompt = prompt_;
    k.image = s_.backend_.content_key(r_.image_ref);
    return k;
  }

  GenerationTrace cached(const std::string& condition, const TraceKey& key,
                         const std::function<GenerationTrace()>& compute) {
    if (s_.cache_) {
      if (auto hit = s_.cache_->load(r_.sample_id, condition, key)) return std::move(*hit);
    }
    GenerationTrace t = compute();
    if (s_.cache_) s_.cache_->store(r_.sample_id, condition, key, t);
    return t;
  }

  const GenerationTrace& full() {
    if (full_) return *full_;
    full_ = timed("full", [&] {
      ExportOptions ex;
      ex.hidden_layers = full_hidden_layers();
      TraceKey key = base_key();
      key.hidden_layers = ex.hidden_layers;
      key.mask = MaskSpec::none(layout().n_tokens());
      if (!r_.response_tokens.empty()) {
        key.decoding = "teacher-forced";
        key.response = r_.response_tokens;
        return cached("full", key, [&] {
          RescoreRequest req{r_.image_ref, prompt_, r_.response_tokens, key.mask, BlankMode::knockout, ex};
          return s_.backend_.rescore(req);
        });
      }
      const Decoding dec = Decoding::greedy();
      key.decoding = dec.describe() + ":max=" + std::to_string(cfg_.max_tokens);
      return cached("full", key, [&] {
        GenerateRequest req{r_.image_ref, prompt_, dec, cfg_.max_tokens, ex};
        return s_.backend_.generate(req);
      });
    });
    return *full_;
  }

  const VisualLayout& layout() {
    if (!layout_) {
      layout_ = s_.backend_.layout(r_.image_ref);
      if (!r_.evidence_regions.empty()) layout_->evidence_regions = r_.evidence_regions;
    }
    return *layout_;
  }

  // Mean entropy of the fixed response under a knockout mask, memoized by the
  // masked index set.
  double masked_entropy(const MaskSpec& mask, const std::string& component, BlankMode mode) {
    const bool removal = mask.kind == MaskKind::blank && mode == BlankMode::removal;
    auto memo_key = std::make_pair(removal, mask.indices);
    if (auto it = memo_.find(memo_key); it != memo_.end()) return it->second;
    const GenerationTrace& f = full();
    const double h = timed(component, [&] {
      TraceKey key = base_key();
      key.decoding = "teacher-forced";
      key.response = f.tokens;
      key.mask = mask;
      key.blank_mode = mode;
      key.attention = false;
      const std::string condition = std::string(to_string(mask.kind)) + "-" + std::to_string(mask.size());
      const GenerationTrace t = cached(condition, key, [&] {
        ExportOptions ex;
        ex.attention = false;
        RescoreRequest req{r_.image_ref, prompt_, f.tokens, mask, mode, ex};
        return s_.backend_.rescore(req);
      });
      return mean_entropy(t.steps);
    });
    memo_.emplace(std::move(memo_key), h);
    return h;
  }

  MaskSpec core_mask(LayerBand band, int k) { return top_k_mask(aggregate_attention(full(), band), k); }

  MaskSpec mask_for(MaskKind kind) {
    const std::size_t n = layout().n_tokens();
    switch (kind) {
      case MaskKind::blank: return MaskSpec::blank(n);
      case MaskKind::core: return core_mask(cfg_.vauq.layer_band, cfg_.vauq.k_percent);
      case MaskKind::random: {
        const std::size_t card = mask_cardinality(n, cfg_.vauq.k_percent);
        return random_mask(n, card, mix_seed(cfg_.seed, Fnv1a().field(r_.sample_id).value()));
      }
      case MaskKind::ground_truth: return ground_truth_mask(layout());
      case MaskKind::none: break;
    }
    throw InvalidArgument("no mask for kind none");
  }

  double condition_entropy(MaskKind kind, ScoreEntry* entry) {
    if (auto it = condition_entropies.find(kind); it != condition_entropies.end()) {
      if (entry && suspicious_.count(kind)) {
        entry->status = "flagged";
        entry->note = "ground-truth boxes select no patch";
      }
      return it->second;
    }
    const MaskSpec mask = mask_for(kind);
    if (kind != MaskKind::blank) masks.emplace_back(kind == MaskKind::ground_truth ? -1 : cfg_.vauq.k_percent, mask);
    if (mask.suspicious) suspicious_.insert(kind);
    const BlankMode mode = kind == MaskKind::blank ? cfg_.blank_mode : BlankMode::knockout;
    const double h = masked_entropy(mask, std::string(to_string(kind)), mode);
    condition_entropies[kind] = h;
    if (entry && mask.suspicious) {
      entry->status = "flagged";
      entry->note = "ground-truth boxes select no patch";
    }
    return h;
  }

  const SampleSet& dispersion() {
    if (samples_) return *samples_;
    samples_ = timed("dispersion", [&] {
      const int layer = cfg_.embedding_layer < 0 ? middle_layer() : cfg_.embedding_layer;
      const std::uint64_t base = mix_seed(cfg_.seed, Fnv1a().field(r_.sample_id).value(), 0x5eedULL);
      std::vector<GenerationTrace> traces;
      std::vector<std::string> texts;
      for (std::size_t i = 0; i < cfg_.dispersion_samples; ++i) {
        const Decoding dec = Decoding::sample(cfg_.dispersion_temperature, mix_seed(base, i));
        ExportOptions ex;
        ex.attention = false;
        ex.hidden_layers = {layer};
        TraceKey key = base_key();
        key.decoding = dec.describe() + ":max=" + std::to_string(cfg_.max_tokens);
        key.mask = MaskSpec::none(layout().n_tokens());
        key.hidden_layers = ex.hidden_layers;
        key.attention = false;
        traces.push_back(cached("sample-" + std::to_string(i), key, [&] {
          GenerateRequest req{r_.image_ref, prompt_, dec, cfg_.max_tokens, ex};
          return s_.backend_.generate(req);
        }));
        texts.push_back(s_.backend_.detokenize(traces.back().tokens));
      }
      return SampleSet::from_traces(traces, texts, layer);
    });
    return *samples_;
  }

  std::string answer_text() {
    if (!r_.response.empty()) return r_.response;
    return s_.backend_.detokenize(full().tokens);
  }

  VerbalizedResult verbalized() {
    const std::string answer = answer_text();
    return timed("verbalized", [&] {
      const std::string prompt = verbalized_prompt(r_.question, answer);
      const std::string key =
          Fnv1a().field(s_.backend_.id()).field(s_.backend_.content_key(r_.image_ref)).field(prompt).hex();
      std::optional<std::string> reply;
      if (s_.cache_) reply = s_.cache_->load_text(r_.sample_id, "verbalized", key);
      if (!reply) {
        reply = s_.backend_.query_text(r_.image_ref, prompt);
        if (s_.cache_) s_.cache_->store_text(r_.sample_id, "verbalized", key, *reply);
      }
      return verbalized_from_reply(*reply);
    });
  }

  std::map<std::string, MethodCost> costs;
  std::vector<std::pair<int, MaskSpec>> masks;
  std::map<MaskKind, double> condition_entropies;

 private:
  Scorer& s_;
  const ScoringConfig& cfg_;
  const EvalRecord& r_;
  std::string prompt_;
  std::optional<GenerationTrace> full_;
  std::optional<VisualLayout> layout_;
  std::optional<SampleSet> samples_;
  std::map<std::pair<bool, std::vector<std::size_t>>, double> memo_;
  std::set<MaskKind> suspicious_;
};

Scorer::Scorer(Backend& backend, ScoringConfig config, const TraceCache* cache)
    : backend_(backend), config_(std::move(config)), cache_(cache) {
  config_.validate();
}

json Scorer::score_params(const std::string& name) const {
  const ScoringConfig& c = config_;
  json p = {{"score", name}, {"backend", backend_.id()}, {"max_tokens", c.max_tokens}};
  if (!c.prompt_suffix.empty()) p["prompt_suffix"] = c.prompt_suffix;
  const auto kind = score_condition(name, c.mask_kind);
  if (kind) {
    p["condition"] = to_string(*kind);
    if (*kind == MaskKind::core || *kind == MaskKind::random) {
      p["k_percent"] = c.vauq.k_percent;
      p["layer_band"] = c.vauq.layer_band;
    }
    if (*kind == MaskKind::random) p["seed"] = c.seed;
    if (*kind == MaskKind::blank) p["blank_mode"] = to_string(c.blank_mode);
    if (name.rfind("vauq", 0) == 0) p["alpha"] = c.vauq.alpha;
  } else if (name == "verbalized") {
    p["parse"] = "first integer in [0,100]";
    p["fallback_confidence"] = 50;
  } else if (name == "svar") {
    p["layer_band"] = c.svar_band;
  } else if (name == "contextual_lens") {
    p["text_layer"] = c.lens_text_layer < 0 ? static_cast<int>(backend_.n_layers() / 2) : c.lens_text_layer;
    p["image_layer"] = c.lens_image_layer < 0 ? static_cast<int>(backend_.n_layers() / 2) : c.lens_image_layer;
  } else if (name == "eigenscore" || name == "semantic_entropy") {
    p["samples"] = c.dispersion_samples;
    p["temperature"] = c.dispersion_temperature;
    p["seed"] = c.seed;
    p["embedding_layer"] = c.embedding_layer < 0 ? static_cast<int>(backend_.n_layers() / 2) : c.embedding_layer;
    if (name == "eigenscore") {
      p["ridge"] = c.eigenscore_ridge;
      p["covariance"] = "centered, 1/K";
    } else {
      p["equivalence"] = "normalized exact match";
      p["weights"] = "sequence probability";
    }
  }
  return p;
}

std::string Scorer::params_hash(const std::string& name) const { return Fnv1a().update(score_params(name).dump()).hex(); }

SampleResult Scorer::score(const EvalRecord& record, const SweepAxes* axes) {
  SampleResult out;
  out.sample_id = record.sample_id;
  out.dataset = record.dataset;
  out.label = record.label;
  out.split = record.split;
  for (const auto& name : config_.scores) {
    ScoreEntry& e = out.scores[name];
    e.orientation = score_orientation(name);
    e.params_hash = params_hash(name);
  }

  Sample sample(*this, record);
  try {
    out.layout = sample.layout();
    const GenerationTrace& full = sample.full();
    if (full.degenerate()) {
      out.status = SampleStatus::degenerate;
      for (auto& [name, e] : out.scores) {
        e.status = "degenerate";
        e.note = "empty response";
      }
      return out;
    }
    out.entropies.full = mean_entropy(full.steps);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    out.status = SampleStatus::error;
    out.error = err.what();
    out.error_kind = err.kind();
    for (auto& [name, e] : out.scores) {
      e.status = "error";
      e.note = "full-condition pass failed";
    }
    return out;
  }

  for (const auto& name : config_.scores) {
    ScoreEntry& e = out.scores[name];
    try {
      if (name == "entropy") {
        e.value = out.entropies.full;
      } else if (auto kind = score_condition(name, config_.mask_kind)) {
        const double h = sample.condition_entropy(*kind, &e);
        e.value = name.rfind("is_", 0) == 0 ? h - out.entropies.full
                                            : vauq_score(out.entropies.full, h, config_.vauq.alpha);
      } else if (name == "perplexity") {
        e.value = perplexity(sample.full().steps);
      } else if (name == "verbalized") {
        const VerbalizedResult v = sample.verbalized();
        e.value = v.score;
        if (v.parse_failed) {
          e.status = "flagged";
          e.note = "unparseable confidence reply";
        }
      } else if (name == "svar") {
        e.value = svar(sample.full(), config_.svar_band);
      } else if (name == "contextual_lens") {
        const int mid = static_cast<int>(backend_.n_layers() / 2);
        const FlaggedScore f = contextual_lens(sample.full(), config_.lens_text_layer < 0 ? mid : config_.lens_text_layer,
                                               config_.lens_image_layer < 0 ? mid : config_.lens_image_layer);
        e.value = f.value;
        if (f.flagged) {
          e.status = "flagged";
          e.note = f.note;
        }
      } else if (name == "chain_of_embeddings") {
        e.value = chain_of_embeddings(sample.full());
      } else if (name == "eigenscore") {
        e.value = eigenscore(sample.dispersion().embeddings, config_.eigenscore_ridge);
      } else if (name == "semantic_entropy") {
        const SampleSet& set = sample.dispersion();
        e.value = semantic_entropy(set.texts, set.log_probs);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      e.value.reset();
      e.status = "error";
      e.note = err.what();
      e.error_kind = err.kind();
    }
  }

  if (axes) {
    try {
      out.core_grid.assign(axes->bands.size(), std::vector<double>(axes->ks.size(), 0.0));
      for (std::size_t b = 0; b < axes->bands.size(); ++b) {
        const SaliencyMap map = aggregate_attention(sample.full(), axes->bands[b]);
        for (std::size_t k = 0; k < axes->ks.size(); ++k) {
          out.core_grid[b][k] = sample.masked_entropy(top_k_mask(map, axes->ks[k]), "sweep", BlankMode::knockout);
        }
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& err) {
      out.core_grid.clear();
      out.status = SampleStatus::error;
      out.error = std::string("sweep grid: ") + err.what();
      out.error_kind = err.kind();
    }
  }

  for (const auto& [kind, h] : sample.condition_entropies) {
    if (kind == MaskKind::blank) {
      out.entropies.blank = h;
    } else {
      out.entropies.masked[kind] = h;
    }
  }
  out.masks = std::move(sample.masks);
  for (const auto& name : config_.scores) {
    MethodCost total;
    for (const auto& comp : score_components(name, config_.mask_kind)) {
      auto it = sample.costs.find(comp);
      if (it == sample.costs.end()) continue;
      total.seconds += it->second.seconds;
      total.passes += it->second.passes;
    }
    out.costs[name] = total;
  }
  return out;
}

void register_scenes(Backend& backend, const std::vector<EvalRecord>& records) {
  auto* toy = dynamic_cast<ToyModel*>(&backend);
  std::map<std::string, const ToyScene*> seen;
  for (const auto& r : records) {
    if (!r.toy_scene) continue;
    if (!toy) continue;
    auto [it, inserted] = seen.emplace(r.image_ref, &*r.toy_scene);
    if (!inserted && !(*it->second == *r.toy_scene)) {
      throw DataError("conflicting toy scenes for image_ref '" + r.image_ref + "'");
    }
    try {
      toy->add_scene(r.image_ref, *r.toy_scene);
    } catch (const ConfigError& e) {
      throw DataError("record '" + r.sample_id + "': " + e.what());
    }
  }
}

std::vector<SampleResult> score_records(const Backend& prototype, const ScoringConfig& config,
                                        const std::vector<EvalRecord>& records, const TraceCache* cache,
                                        std::size_t jobs, PassCounts* counts, const SweepAxes* axes) {
  config.validate();
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(records.size(), 1));

  std::vector<SampleResult> results(records.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  PassCounts total;

  auto worker = [&] {
    try {
      auto backend = prototype.clone();
      Scorer scorer(*backend, config, cache);
      for (std::size_t i = next++; i < records.size(); i = next++) {
        {
          std::lock_guard lock(mu);
          if (failure) break;
        }
        results[i] = scorer.score(records[i], axes);
      }
      std::lock_guard lock(mu);
      total += backend->counts();
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  if (counts) *counts = total;

  std::stable_sort(results.begin(), results.end(), [](const SampleResult& a, const SampleResult& b) {
    return std::tie(a.sample_id, a.dataset) < std::tie(b.sample_id, b.dataset);
  });
  return results;
}

std::optional<double> score_auroc(const std::vector<const SampleResult*>& results, const std::string& name) {
  std::vector<double> s;
  std::vector<int> y;
  for (const SampleResult* r : results) {
    if (r->status != SampleStatus::ok || !r->label_known()) continue;
    auto it = r->scores.find(name);
    if (it == r->scores.end() || !it->second.value) continue;
    const double v = *it->second.value;
    s.push_back(it->second.orientation == Orientation::lower_hallucinated ? -v : v);
    y.push_back(static_cast<int>(r->label));
  }
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size())) return std::nullopt;
  return auroc(s, y);
}

EntropyTable entropy_table(const std::vector<const SampleResult*>& results, const SweepAxes& axes) {
  EntropyTable t;
  t.bands = axes.bands;
  t.ks = axes.ks;
  t.h_masked.assign(axes.bands.size(), std::vector<std::vector<double>>(axes.ks.size()));
  for (const SampleResult* r : results) {
    if (r->status != SampleStatus::ok || !r->label_known() || r->core_grid.empty()) continue;
    t.sample_ids.push_back(r->sample_id);
    t.labels.push_back(static_cast<int>(r->label));
    t.h_full.push_back(r->entropies.full);
    for (std::size_t b = 0; b < axes.bands.size(); ++b) {
      for (std::size_t k = 0; k < axes.ks.size(); ++k) t.h_masked[b][k].push_back(r->core_grid[b][k]);
    }
  }
  return t;
}

}  // namespace vauq

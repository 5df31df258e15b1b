#include "vauq/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "vauq/errors.hpp"
#include "vauq/random.hpp"

namespace vauq {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::correct: return "correct";
    case Label::hallucinated: return "hallucinated";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

namespace {

std::string trimmed_lower(std::string_view s) {
  std::size_t a = 0, b = s.size();
  auto strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
  while (a < b && strip(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && strip(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out;
  for (std::size_t i = a; i < b; ++i) out += static_cast<char>(std::tolower(static_cast<unsigned char>(s[i])));
  return out;
}

}  // namespace

JudgeOutcome ingest_judgments(const std::vector<std::string>& verdicts) {
  JudgeOutcome out;
  for (const auto& v : verdicts) {
    const std::string t = trimmed_lower(v);
    if (t == "correct") {
      ++out.n_correct;
    } else if (t == "wrong") {
      ++out.n_wrong;
    } else {
      ++out.n_malformed;
    }
  }
  if (out.n_correct == 0 && out.n_wrong == 0) {
    out.reason = verdicts.empty() ? "no verdicts" : "all verdicts unparseable";
  } else if (out.n_correct == out.n_wrong) {
    out.reason = "tie";
  } else {
    out.label = out.n_correct > out.n_wrong ? Label::correct : Label::hallucinated;
  }
  return out;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auroc needs one label per score");
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++n_pos;
    } else if (labels[i] == 0) {
      ++n_neg;
    } else {
      throw InvalidArgument("auroc labels must be 0 or 1");
    }
    if (std::isnan(scores[i])) throw InvalidArgument("auroc got a NaN score");
  }
  if (n_pos == 0 || n_neg == 0) throw DataError("AUROC is undefined with a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    // Ranks are 1-based; the tied block i..j shares their mean.
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

SweepGrid SweepGrid::defaults(LayerBand band) {
  SweepGrid g;
  for (int i = 0; i <= 50; ++i) g.alphas.push_back(i / 10.0);
  for (int k = 0; k <= 100; k += 10) g.ks.push_back(k);
  g.bands.push_back(band);
  return g;
}

void SweepGrid::validate() const {
  if (alphas.empty() || ks.empty() || bands.empty()) throw ConfigError("sweep grid axes must be non-empty");
  for (double a : alphas) {
    if (!(a >= 0.0)) throw ConfigError("sweep alphas must be >= 0");
  }
  for (int k : ks) {
    if (k < 0 || k > 100) throw ConfigError("sweep K values must lie in [0, 100]");
  }
  for (const auto& b : bands) {
    if (b.start < 0 || b.start > b.end) throw ConfigError("sweep band needs 0 <= start <= end");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
}

void EntropyTable::validate() const {
  const std::size_t n = labels.size();
  if (h_full.size() != n || sample_ids.size() != n) throw InvalidArgument("entropy table columns differ in length");
  if (h_masked.size() != bands.size()) throw InvalidArgument("entropy table band axis mismatch");
  for (const auto& per_band : h_masked) {
    if (per_band.size() != ks.size()) throw InvalidArgument("entropy table K axis mismatch");
    for (const auto& col : per_band) {
      if (col.size() != n) throw InvalidArgument("entropy table masked column length mismatch");
    }
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw InvalidArgument("entropy table holds only labeled samples");
  }
}

Split stratified_split(std::span<const int> labels, double fraction, std::uint64_t seed) {
  Split split;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.size() < 2) {
      throw DataError("class " + std::to_string(cls) + " needs at least two samples to appear in both splits");
    }
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(cls)));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[static_cast<std::size_t>(uniform_below(rng, i))]);
    }
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
    split.validation.insert(split.validation.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

namespace {

std::size_t index_of_k(const EntropyTable& t, int k) {
  auto it = std::find(t.ks.begin(), t.ks.end(), k);
  if (it == t.ks.end()) throw InvalidArgument("entropy table has no column for K=" + std::to_string(k));
  return static_cast<std::size_t>(it - t.ks.begin());
}

std::size_t index_of_band(const EntropyTable& t, LayerBand b) {
  auto it = std::find(t.bands.begin(), t.bands.end(), b);
  if (it == t.bands.end()) throw InvalidArgument("entropy table has no column for band " + b.to_string());
  return static_cast<std::size_t>(it - t.bands.begin());
}

double subset_auroc(const EntropyTable& t, const std::vector<double>& masked, double alpha,
                    std::span<const std::size_t> subset) {
  std::vector<double> s;
  std::vector<int> y;
  s.reserve(subset.size());
  y.reserve(subset.size());
  for (std::size_t i : subset) {
    s.push_back(vauq_score(t.h_full[i], masked[i], alpha));
    y.push_back(t.labels[i]);
  }
  return auroc(s, y);
}

}  // namespace

double vauq_auroc(const EntropyTable& table, const VauqParams& params, std::span<const std::size_t> subset) {
  const auto& col = table.masked(index_of_band(table, params.layer_band), index_of_k(table, params.k_percent));
  return subset_auroc(table, col, params.alpha, subset);
}

SweepResult sweep(const EntropyTable& table, const SweepGrid& grid) {
  grid.validate();
  table.validate();
  if (table.size() < kMinSweepSamples) {
    throw DataError("sweep needs at least " + std::to_string(kMinSweepSamples) + " labeled samples, got " +
                    std::to_string(table.size()));
  }
  SweepResult result;
  result.split = stratified_split(table.labels, grid.validation_fraction, grid.split_seed);

  bool have_best = false;
  // alpha-major iteration with a strict improvement test implements the
  // smaller-alpha, then smaller-K tie rule.
  std::vector<double> alphas = grid.alphas;
  std::vector<int> ks = grid.ks;
  std::sort(alphas.begin(), alphas.end());
  std::sort(ks.begin(), ks.end());
  for (double alpha : alphas) {
    for (int k : ks) {
      for (const LayerBand& band : grid.bands) {
        const auto& col = table.masked(index_of_band(table, band), index_of_k(table, k));
        SweepCell cell{alpha, k, band, subset_auroc(table, col, alpha, result.split.validation),
                       subset_auroc(table, col, alpha, result.split.test)};
        if (!have_best || cell.validation_auroc > result.validation_auroc) {
          have_best = true;
          result.best = {alpha, k, band};
          result.validation_auroc = cell.validation_auroc;
          result.test_auroc = cell.test_auroc;
        }
        result.surface.push_back(cell);
      }
    }
  }
  return result;
}

TransferResult transfer(const EntropyTable& source, const EntropyTable& target, const SweepGrid& grid) {
  const SweepResult src = sweep(source, grid);
  const SweepResult tgt = sweep(target, grid);
  TransferResult out;
  out.source_params = src.best;
  out.transferred_auroc = vauq_auroc(target, src.best, tgt.split.test);
  out.target_tuned_auroc = tgt.test_auroc;
  out.gap = out.target_tuned_auroc - out.transferred_auroc;
  return out;
}

std::vector<TimingRow> timing_report(const std::vector<TimingSample>& samples) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TimingSample*>> groups;
  for (const auto& s : samples) {
    if (!groups.count(s.method)) order.push_back(s.method);
    groups[s.method].push_back(&s);
  }
  std::vector<TimingRow> rows;
  for (const auto& method : order) {
    const auto& g = groups[method];
    TimingRow r;
    r.method = method;
    r.n_samples = g.size();
    const double n = static_cast<double>(g.size());
    for (const auto* s : g) {
      r.mean_seconds += s->seconds;
      r.mean_generations += static_cast<double>(s->passes.generations);
      r.mean_decode_steps += static_cast<double>(s->passes.decode_steps);
      r.mean_rescore_passes += static_cast<double>(s->passes.rescore_passes);
      r.mean_text_queries += static_cast<double>(s->passes.text_queries);
    }
    r.mean_seconds /= n;
    r.mean_generations /= n;
    r.mean_decode_steps /= n;
    r.mean_rescore_passes /= n;
    r.mean_text_queries /= n;
    double var = 0.0;
    for (const auto* s : g) var += (s->seconds - r.mean_seconds) * (s->seconds - r.mean_seconds);
    r.std_seconds = std::sqrt(var / n);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace vauq

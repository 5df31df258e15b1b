#include "vauq/commands.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "vauq/dataset.hpp"
#include "vauq/pipeline.hpp"
#include "vauq/report.hpp"

namespace vauq {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::backend: return kExitBackend;
    case ErrorKind::invalid_argument:
    case ErrorKind::data:
    case ErrorKind::degenerate: return kExitData;
  }
  return kExitData;
}

namespace {

struct Loaded {
  std::vector<Dataset> datasets;
  std::vector<EvalRecord> records;
};

Loaded load_all(const RunConfig& c, std::ostream& log) {
  Loaded out;
  for (const auto& path : c.datasets) {
    Dataset ds = load_dataset(path);
    const std::string stem = fs::path(path).stem().string();
    for (auto& r : ds.records) {
      if (r.dataset.empty()) r.dataset = stem;
    }
    if (!ds.malformed.empty()) {
      log << "warning: " << path << ": skipped " << ds.malformed.size() << " malformed line(s) of " << ds.n_lines
          << '\n';
    }
    out.records.insert(out.records.end(), ds.records.begin(), ds.records.end());
    out.datasets.push_back(std::move(ds));
  }
  std::set<std::pair<std::string, std::string>> ids;
  for (const auto& r : out.records) {
    if (!ids.emplace(r.dataset, r.sample_id).second) {
      throw DataError("sample_id '" + r.sample_id + "' appears twice in dataset '" + r.dataset + "'");
    }
  }
  return out;
}

void write_run_config(const fs::path& dir, const RunConfig& c) {
  fs::create_directories(dir);
  std::ofstream out(dir / "run_config.json", std::ios::binary);
  out << run_config_to_json(c).dump(2) << '\n';
}

std::ofstream open_csv(const fs::path& path, const char* header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << header << '\n';
  return out;
}

void log_counts(std::ostream& log, const PassCounts& p) {
  log << "backend calls: generations=" << p.generations << " decode_steps=" << p.decode_steps
      << " rescore_passes=" << p.rescore_passes << " text_queries=" << p.text_queries << '\n';
}

int status_exit_code(const std::vector<ErrorEntry>& errors) {
  int code = kExitOk;
  for (const auto& e : errors) {
    if (e.kind == "malformed" || e.kind == "degenerate") continue;
    if (e.kind == "backend") return kExitBackend;
    code = kExitData;
  }
  return code;
}

std::unique_ptr<TraceCache> open_cache(const RunConfig& c, std::ostream& log) {
  const std::string dir = effective_cache_dir(c);
  if (dir.empty()) return nullptr;
  log << "trace cache: " << dir << '\n';
  return std::make_unique<TraceCache>(dir);
}

std::string seed_label(std::uint64_t s) { return std::to_string(s); }

}  // namespace

int cmd_score(RunConfig config, std::ostream& log) {
  resolve_paths(config);
  config.validate();
  Loaded data = load_all(config, log);
  auto backend = make_backend(config.backend);
  register_scenes(*backend, data.records);
  auto cache = open_cache(config, log);

  const fs::path root(config.output_dir);
  fs::create_directories(root);
  std::vector<ErrorEntry> errors;
  PassCounts total;
  for (std::uint64_t seed : config.seeds) {
    ScoringConfig sc = config.scoring;
    sc.seed = seed;
    PassCounts counts;
    const auto results = score_records(*backend, sc, data.records, cache.get(), config.jobs, &counts);
    total += counts;
    const fs::path dir = config.seeds.size() == 1 ? root : root / ("seed-" + seed_label(seed));
    write_score_report(dir / "scores.jsonl", results, sc.scores);
    write_score_summary(dir / "summary.csv", results, sc.scores);
    write_masks(dir / "masks.jsonl", results);
    auto seed_errors = collect_errors(config.seeds.size() == 1 ? data.datasets : std::vector<Dataset>{}, results);
    errors.insert(errors.end(), seed_errors.begin(), seed_errors.end());
    log << "scored " << results.size() << " record(s) with seed " << seed << " -> " << dir.string() << '\n';
  }
  if (config.seeds.size() > 1) {
    auto malformed = collect_errors(data.datasets, {});
    errors.insert(errors.begin(), malformed.begin(), malformed.end());
  }
  write_errors(root / "errors.jsonl", errors);
  write_run_config(root, config);
  log_counts(log, total);
  const int code = status_exit_code(errors);
  if (code != kExitOk) log << "some samples failed; see " << (root / "errors.jsonl").string() << '\n';
  return code;
}

namespace {

struct MetricKey {
  std::string score, dataset, subset;
  auto operator<=>(const MetricKey&) const = default;
};

// Evaluates an existing score report; one row per (score, dataset, subset).
int eval_report(const RunConfig& config, std::ostream& log) {
  const auto rows = read_score_report(config.report);
  std::map<MetricKey, std::pair<std::vector<double>, std::vector<int>>> groups;
  std::size_t labeled = 0;
  for (const auto& r : rows) {
    if (r.label == Label::unlabeled || !r.value) continue;
    ++labeled;
    const double v = r.orientation == Orientation::lower_hallucinated ? -*r.value : *r.value;
    for (const std::string& subset : {std::string("all"), r.split}) {
      if (subset == "none") continue;
      auto& g = groups[{r.score_name, r.dataset, subset}];
      g.first.push_back(v);
      g.second.push_back(static_cast<int>(r.label));
    }
  }
  if (labeled == 0) throw DataError("score report has no labeled rows; refusing to evaluate");
  const fs::path root(config.output_dir);
  fs::create_directories(root);
  auto out = open_csv(root / "eval_summary.csv", "score,dataset,subset,seed,n,auroc");
  for (const auto& [key, g] : groups) {
    const auto pos = std::count(g.second.begin(), g.second.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(g.second.size())) continue;
    out << key.score << ',' << csv_field(key.dataset) << ',' << key.subset << ",report," << g.second.size() << ','
        << format_value(auroc(g.first, g.second)) << '\n';
  }
  write_run_config(root, config);
  log << "evaluated " << rows.size() << " report row(s)\n";
  return kExitOk;
}

}  // namespace

int cmd_eval(RunConfig config, std::ostream& log) {
  resolve_paths(config);
  config.validate();
  if (!config.report.empty()) return eval_report(config, log);

  Loaded data = load_all(config, log);
  std::vector<EvalRecord> labeled;
  for (const auto& r : data.records) {
    if (r.labeled()) labeled.push_back(r);
  }
  if (labeled.empty()) throw DataError("dataset has no labeled records; refusing to evaluate");
  std::set<std::string> names;
  for (const auto& r : labeled) names.insert(r.dataset);
  for (const auto& t : config.transfers) {
    for (const auto& n : {t.source, t.target}) {
      if (!names.count(n)) throw ConfigError("transfer names unknown dataset '" + n + "'");
    }
  }

  auto backend = make_backend(config.backend);
  register_scenes(*backend, labeled);
  auto cache = open_cache(config, log);
  const bool need_grid = config.run_sweep || !config.transfers.empty();
  const SweepAxes axes{config.sweep.bands, config.sweep.ks};

  const fs::path root(config.output_dir);
  fs::create_directories(root);
  auto summary = open_csv(root / "eval_summary.csv", "score,dataset,subset,seed,n,auroc");
  std::ofstream surface, best, transfer_out, timing_out;
  if (config.run_sweep) {
    surface = open_csv(root / "sweep_surface.csv", "dataset,seed,alpha,k,band,split,auroc");
    best = open_csv(root / "sweep_best.csv", "dataset,seed,alpha,k,band,validation_auroc,test_auroc");
  }
  if (!config.transfers.empty()) {
    transfer_out = open_csv(root / "transfer.csv",
                            "source,target,seed,alpha,k,band,transferred_auroc,target_tuned_auroc,gap");
  }
  if (config.timing) {
    timing_out = open_csv(root / "timing.csv",
                          "seed,method,n,mean_seconds,std_seconds,mean_generations,mean_decode_steps,"
                          "mean_rescore_passes,mean_text_queries");
  }

  std::map<MetricKey, std::vector<double>> per_seed;
  std::map<std::string, std::vector<SweepResult>> sweeps;
  std::map<std::pair<std::string, std::string>, std::vector<TransferResult>> transfers;
  std::vector<ErrorEntry> errors = collect_errors(data.datasets, {});
  PassCounts total;

  for (std::uint64_t seed : config.seeds) {
    ScoringConfig sc = config.scoring;
    sc.seed = seed;
    PassCounts counts;
    const auto results = score_records(*backend, sc, labeled, cache.get(), config.jobs, &counts,
                                       need_grid ? &axes : nullptr);
    total += counts;
    auto seed_errors = collect_errors({}, results);
    errors.insert(errors.end(), seed_errors.begin(), seed_errors.end());

    std::map<std::string, std::vector<const SampleResult*>> by_dataset;
    for (const auto& r : results) {
      by_dataset[r.dataset].push_back(&r);
      if (names.size() > 1) by_dataset["all"].push_back(&r);
    }
    for (const auto& [ds, rs] : by_dataset) {
      std::map<std::string, std::vector<const SampleResult*>> subsets{{"all", rs}};
      for (const SampleResult* r : rs) {
        if (r->split != SplitTag::none) subsets[std::string(to_string(r->split))].push_back(r);
      }
      for (const auto& score : sc.scores) {
        for (const auto& [subset, members] : subsets) {
          const auto a = score_auroc(members, score);
          if (!a) continue;
          summary << score << ',' << csv_field(ds) << ',' << subset << ',' << seed << ',' << members.size() << ','
                  << format_value(*a) << '\n';
          per_seed[{score, ds, subset}].push_back(*a);
        }
      }
    }

    SweepGrid grid = config.sweep;
    grid.split_seed = seed;
    if (config.run_sweep) {
      for (const auto& ds : names) {
        const SweepResult sw = sweep(entropy_table(by_dataset[ds], axes), grid);
        for (const auto& cell : sw.surface) {
          for (const auto& [split, value] : {std::pair{"validation", cell.validation_auroc},
                                             std::pair{"test", cell.test_auroc}}) {
            surface << csv_field(ds) << ',' << seed << ',' << format_value(cell.alpha) << ',' << cell.k_percent << ','
                    << cell.band.to_string() << ',' << split << ',' << format_value(value) << '\n';
          }
        }
        best << csv_field(ds) << ',' << seed << ',' << format_value(sw.best.alpha) << ',' << sw.best.k_percent << ','
             << sw.best.layer_band.to_string() << ',' << format_value(sw.validation_auroc) << ','
             << format_value(sw.test_auroc) << '\n';
        sweeps[ds].push_back(sw);
      }
    }
    for (const auto& t : config.transfers) {
      const TransferResult tr =
          transfer(entropy_table(by_dataset[t.source], axes), entropy_table(by_dataset[t.target], axes), grid);
      transfer_out << csv_field(t.source) << ',' << csv_field(t.target) << ',' << seed << ','
                   << format_value(tr.source_params.alpha) << ',' << tr.source_params.k_percent << ','
                   << tr.source_params.layer_band.to_string() << ',' << format_value(tr.transferred_auroc) << ','
                   << format_value(tr.target_tuned_auroc) << ',' << format_value(tr.gap) << '\n';
      transfers[{t.source, t.target}].push_back(tr);
    }
    if (config.timing) {
      std::vector<TimingSample> samples;
      for (const auto& score : sc.scores) {
        for (const auto& r : results) {
          if (r.status != SampleStatus::ok) continue;
          const MethodCost& c = r.costs.at(score);
          samples.push_back({score, c.seconds, c.passes});
        }
      }
      for (const auto& row : timing_report(samples)) {
        timing_out << seed << ',' << row.method << ',' << row.n_samples << ',' << format_value(row.mean_seconds)
                   << ',' << format_value(row.std_seconds) << ',' << format_value(row.mean_generations) << ','
                   << format_value(row.mean_decode_steps) << ',' << format_value(row.mean_rescore_passes) << ','
                   << format_value(row.mean_text_queries) << '\n';
      }
    }
    log << "evaluated " << results.size() << " labeled record(s) with seed " << seed << '\n';
  }

  if (config.seeds.size() > 1) {
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    for (const auto& [key, values] : per_seed) {
      if (values.size() != config.seeds.size()) continue;
      summary << key.score << ',' << csv_field(key.dataset) << ',' << key.subset << ",mean,," << format_value(mean(values))
              << '\n';
    }
    for (const auto& [ds, list] : sweeps) {
      std::vector<double> val, test;
      for (const auto& s : list) {
        val.push_back(s.validation_auroc);
        test.push_back(s.test_auroc);
      }
      best << csv_field(ds) << ",mean,,,," << format_value(mean(val)) << ',' << format_value(mean(test)) << '\n';
    }
    for (const auto& [names_pair, list] : transfers) {
      std::vector<double> tr, tuned, gap;
      for (const auto& t : list) {
        tr.push_back(t.transferred_auroc);
        tuned.push_back(t.target_tuned_auroc);
        gap.push_back(t.gap);
      }
      transfer_out << csv_field(names_pair.first) << ',' << csv_field(names_pair.second) << ",mean,,,,"
                   << format_value(mean(tr)) << ',' << format_value(mean(tuned)) << ',' << format_value(mean(gap))
                   << '\n';
    }
  }

  write_errors(root / "errors.jsonl", errors);
  write_run_config(root, config);
  log_counts(log, total);
  return status_exit_code(errors);
}

}  // namespace vauq

// vauq: score and evaluate responses with the VAUQ score and baselines.
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vauq/commands.hpp"
#include "vauq/config.hpp"
#include "vauq/dataset.hpp"
#include "vauq/population.hpp"

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> datasets;
  std::string scores;
  std::optional<double> alpha;
  std::optional<int> k_percent;
  std::string layer_band;
  std::string mask_kind;
  std::string blank_mode;
  std::string seeds;
  std::optional<std::size_t> jobs;
  std::string cache_dir;
  std::string output_dir;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "RunConfig JSON file");
  cmd->add_option("--dataset", o.datasets, "Dataset JSONL file (repeatable)");
  cmd->add_option("--scores", o.scores, "Comma-separated score names");
  cmd->add_option("--alpha", o.alpha, "Weight of the image-information term");
  cmd->add_option("--k-percent", o.k_percent, "Share of visual tokens in the core mask, 0..100");
  cmd->add_option("--layer-band", o.layer_band, "Attention layer band 'start,end' (inclusive)");
  cmd->add_option("--mask-kind", o.mask_kind, "Mask used by the vauq score: core, random, gt or blank");
  cmd->add_option("--blank-mode", o.blank_mode, "Blank condition: knockout or removal");
  cmd->add_option("--seeds", o.seeds, "Comma-separated seeds");
  cmd->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
  cmd->add_option("--cache-dir", o.cache_dir, "Trace cache directory (default: $VAUQ_CACHE_DIR)");
  cmd->add_option("--output-dir", o.output_dir, "Output directory");
}

vauq::RunConfig build_config(const Overrides& o) {
  using namespace vauq;
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  try {
    if (!o.datasets.empty()) c.datasets = o.datasets;
    if (!o.scores.empty()) c.scoring.scores = split_list(o.scores);
    if (o.alpha) c.scoring.vauq.alpha = *o.alpha;
    if (o.k_percent) c.scoring.vauq.k_percent = *o.k_percent;
    if (!o.layer_band.empty()) c.scoring.vauq.layer_band = parse_layer_band(o.layer_band);
    if (!o.mask_kind.empty()) c.scoring.mask_kind = mask_kind_from_string(o.mask_kind);
    if (!o.blank_mode.empty()) c.scoring.blank_mode = blank_mode_from_string(o.blank_mode);
    if (!o.seeds.empty()) {
      c.seeds.clear();
      for (const auto& s : split_list(o.seeds)) c.seeds.push_back(std::stoull(s));
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("bad number: ") + e.what());
  }
  if (o.jobs) c.jobs = *o.jobs;
  if (!o.cache_dir.empty()) c.cache_dir = o.cache_dir;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  return c;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const vauq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return vauq::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return vauq::kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VAUQ hallucination scoring for multimodal models"};
  app.require_subcommand(1);

  Overrides score_opts;
  auto* score = app.add_subcommand("score", "Score every record of the dataset(s)");
  add_common(score, score_opts);

  Overrides eval_opts;
  bool sweep = false, timing = false;
  std::vector<std::string> transfer_args;
  std::string report;
  auto* eval = app.add_subcommand("eval", "AUROC, sweeps, transfer and timing on labeled data");
  add_common(eval, eval_opts);
  eval->add_flag("--sweep", sweep, "Sweep alpha, K and layer band on a validation split");
  eval->add_flag("--timing", timing, "Report per-method wall time and forward-pass counts");
  eval->add_option("--transfer", transfer_args, "source=A target=B")->expected(2);
  eval->add_option("--report", report, "Evaluate an existing scores.jsonl instead of scoring");

  std::string synth_out;
  std::size_t synth_n = 200;
  std::uint64_t synth_seed = 0;
  std::string synth_name = "toy";
  double synth_factual = 0.5;
  auto* synth = app.add_subcommand("synth", "Write a labeled toy-backend population");
  synth->add_option("--output", synth_out, "Dataset JSONL to write")->required();
  synth->add_option("--n", synth_n, "Number of samples");
  synth->add_option("--seed", synth_seed, "Population seed");
  synth->add_option("--name", synth_name, "Dataset name");
  synth->add_option("--factual-fraction", synth_factual, "Share of factual samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vauq::kExitConfig;
  }

  if (*score) {
    return guarded([&] { return vauq::cmd_score(build_config(score_opts), std::cerr); });
  }
  if (*eval) {
    return guarded([&] {
      vauq::RunConfig c = build_config(eval_opts);
      if (sweep) c.run_sweep = true;
      if (timing) c.timing = true;
      if (!transfer_args.empty()) c.transfers.push_back(vauq::parse_transfer(transfer_args));
      if (!report.empty()) c.report = report;
      return vauq::cmd_eval(std::move(c), std::cerr);
    });
  }
  return guarded([&] {
    vauq::ToyModel model{vauq::ToyConfig{}};
    vauq::PopulationSpec spec;
    spec.n_samples = synth_n;
    spec.seed = synth_seed;
    spec.dataset = synth_name;
    spec.factual_fraction = synth_factual;
    vauq::write_dataset(synth_out, vauq::build_population(model, spec));
    std::cerr << "wrote " << synth_n << " record(s) to " << synth_out << '\n';
    return vauq::kExitOk;
  });
}

#include "vauq/population.hpp"

#include <random>

#include "vauq/errors.hpp"
#include "vauq/random.hpp"

namespace vauq {

void PopulationSpec::validate(const ToyArchitecture& arch) const {
  if (n_samples == 0) throw ConfigError("population needs at least one sample");
  if (!(factual_fraction >= 0.0 && factual_fraction <= 1.0)) throw ConfigError("factual_fraction must lie in [0,1]");
  if (grid_rows == 0 || grid_cols == 0) throw ConfigError("population grid must be non-empty");
  if (box_sides.empty()) throw ConfigError("population needs at least one box side");
  for (std::size_t s : box_sides) {
    if (s == 0 || s > grid_rows || s > grid_cols) throw ConfigError("evidence box side does not fit the grid");
  }
  if (arch.vocab_size < 2) throw ConfigError("population needs vocab_size >= 2");
  for (const Range* r : {&factual_beta_image, &factual_beta_prior, &counterfactual_beta_image,
                         &counterfactual_beta_prior}) {
    if (!(r->lo >= 0.0 && r->lo <= r->hi)) throw ConfigError("beta ranges need 0 <= lo <= hi");
  }
  if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be > 0");
}

std::vector<EvalRecord> build_population(ToyModel& model, const PopulationSpec& spec) {
  const ToyArchitecture& arch = model.architecture();
  spec.validate(arch);
  std::mt19937_64 rng(mix_seed(spec.seed, 0x706f70ULL));
  const auto V = static_cast<std::uint64_t>(arch.vocab_size);
  const auto n_factual = static_cast<std::size_t>(spec.factual_fraction * static_cast<double>(spec.n_samples) + 0.5);

  std::vector<EvalRecord> records;
  records.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const bool factual = i < n_factual;
    ToyScene scene;
    scene.grid_rows = spec.grid_rows;
    scene.grid_cols = spec.grid_cols;
    scene.evidence.clear();
    const std::size_t side = spec.box_sides[uniform_below(rng, spec.box_sides.size())];
    const std::size_t r0 = uniform_below(rng, spec.grid_rows - side + 1);
    const std::size_t c0 = uniform_below(rng, spec.grid_cols - side + 1);
    const auto rows = static_cast<double>(spec.grid_rows), cols = static_cast<double>(spec.grid_cols);
    scene.evidence_boxes.push_back({static_cast<double>(c0) / cols, static_cast<double>(r0) / rows,
                                    static_cast<double>(c0 + side) / cols, static_cast<double>(r0 + side) / rows});
    scene.image_answer = static_cast<TokenId>(uniform_below(rng, V));
    if (factual) {
      scene.prior_answer = scene.image_answer;
      scene.beta_image = uniform_real(rng, spec.factual_beta_image.lo, spec.factual_beta_image.hi);
      scene.beta_prior = uniform_real(rng, spec.factual_beta_prior.lo, spec.factual_beta_prior.hi);
    } else {
      scene.prior_answer = static_cast<TokenId>((static_cast<std::uint64_t>(scene.image_answer) + 1 +
                                                 uniform_below(rng, V - 1)) % V);
      scene.beta_prior = uniform_real(rng, spec.counterfactual_beta_prior.lo, spec.counterfactual_beta_prior.hi);
      scene.beta_image = uniform_real(rng, spec.counterfactual_beta_image.lo, spec.counterfactual_beta_image.hi);
    }

    EvalRecord r;
    r.sample_id = spec.id_prefix + std::to_string(i);
    r.question = "What is shown in the image?";
    r.image_ref = spec.dataset + "/" + r.sample_id;
    r.split = factual ? SplitTag::factual : SplitTag::counterfactual;
    r.dataset = spec.dataset;
    r.evidence_regions = scene.evidence_boxes;
    model.add_scene(r.image_ref, scene);
    r.toy_scene = scene;

    GenerateRequest req;
    req.image_ref = r.image_ref;
    req.prompt = r.question;
    req.decoding = Decoding::sample(spec.temperature, mix_seed(spec.seed, i, 0x72657370ULL));
    req.max_tokens = arch.answer_length;
    req.exports.attention = false;
    const GenerationTrace t = model.generate(req);
    r.response_tokens = t.tokens;
    r.response = model.detokenize(t.tokens);
    if (t.degenerate()) {
      r.label_reason = "empty response";
    } else {
      r.label = t.tokens.front() == scene.image_answer ? Label::correct : Label::hallucinated;
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace vauq

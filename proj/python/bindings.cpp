// Python bindings. Structured inputs (configs, scenes, records) cross the
// boundary as JSON text; the pure-Python wrapper in vauq/__init__.py handles
// the dict <-> str conversion.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vauq/baselines.hpp"
#include "vauq/commands.hpp"
#include "vauq/config.hpp"
#include "vauq/dataset.hpp"
#include "vauq/evaluation.hpp"
#include "vauq/json_io.hpp"
#include "vauq/pipeline.hpp"
#include "vauq/population.hpp"
#include "vauq/saliency.hpp"
#include "vauq/scores.hpp"
#include "vauq/toy_model.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace vauq;

namespace {

ToyConfig toy_config_from(const std::string& text) {
  ToyConfig c;
  if (text.empty()) return c;
  const json j = json::parse(text);
  require_keys(j, {"arch", "scene"}, "toy config");
  if (j.contains("arch")) c.arch = j.at("arch").get<ToyArchitecture>();
  if (j.contains("scene")) c.scene = j.at("scene").get<ToyScene>();
  return c;
}

MaskSpec mask_from(std::vector<std::size_t> indices, std::size_t n_tokens, const std::string& kind) {
  return MaskSpec::from_indices(mask_kind_from_string(kind), std::move(indices), n_tokens);
}

py::array_t<float> attention_array(const GenerationTrace& t) {
  const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(t.attention_layers.size()),
                                       static_cast<py::ssize_t>(t.n_heads), static_cast<py::ssize_t>(t.length()),
                                       static_cast<py::ssize_t>(t.n_visual)};
  py::array_t<float> out(shape);
  std::copy(t.attention.begin(), t.attention.end(), out.mutable_data());
  return out;
}

std::vector<double> entropies(const GenerationTrace& t) {
  std::vector<double> v;
  for (const auto& s : t.steps) v.push_back(s.entropy);
  return v;
}

std::vector<double> logprobs(const GenerationTrace& t) {
  std::vector<double> v;
  for (const auto& s : t.steps) v.push_back(s.logprob_realized);
  return v;
}

std::vector<StepStats> steps_from(const std::vector<double>& entropy) {
  std::vector<StepStats> s;
  for (double h : entropy) s.push_back({h, 0.0});
  return s;
}

}  // namespace

PYBIND11_MODULE(_vauq, m) {
  m.doc() = "VAUQ hallucination scoring: native core";

  static py::exception<Error> base(m, "VauqError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<BackendError>(m, "BackendError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DegenerateSample>(m, "DegenerateSample", base.ptr());

  py::class_<GenerationTrace>(m, "Trace")
      .def_property_readonly("tokens", [](const GenerationTrace& t) { return t.tokens; })
      .def_property_readonly("entropies", &entropies)
      .def_property_readonly("logprobs", &logprobs)
      .def_property_readonly("attention", &attention_array, "Array [layer, head, step, visual token]")
      .def_property_readonly("attention_layers", [](const GenerationTrace& t) { return t.attention_layers; })
      .def_property_readonly("mask", [](const GenerationTrace& t) { return t.mask.indices; })
      .def_property_readonly("mask_kind", [](const GenerationTrace& t) { return std::string(to_string(t.mask.kind)); })
      .def_property_readonly("degenerate", &GenerationTrace::degenerate)
      .def("__len__", &GenerationTrace::length);

  py::class_<ToyModel>(m, "ToyModel")
      .def(py::init([](const std::string& config) { return ToyModel(toy_config_from(config)); }),
           py::arg("config_json") = "")
      .def_property_readonly("id", &ToyModel::id)
      .def_property_readonly("n_layers", &ToyModel::n_layers)
      .def(
          "add_scene",
          [](ToyModel& self, const std::string& ref, const std::string& scene) {
            self.add_scene(ref, json::parse(scene).get<ToyScene>());
          },
          py::arg("image_ref"), py::arg("scene_json"))
      .def("n_visual", [](const ToyModel& self, const std::string& ref) { return self.layout(ref).n_tokens(); })
      .def(
          "generate",
          [](ToyModel& self, const std::string& ref, const std::string& prompt, std::size_t max_tokens,
             std::optional<double> temperature, std::uint64_t seed, std::vector<int> hidden_layers) {
            GenerateRequest r;
            r.image_ref = ref;
            r.prompt = prompt;
            r.max_tokens = max_tokens;
            if (temperature) r.decoding = Decoding::sample(*temperature, seed);
            r.exports.hidden_layers = std::move(hidden_layers);
            return self.generate(r);
          },
          py::arg("image_ref"), py::arg("prompt") = "", py::arg("max_tokens") = 128,
          py::arg("temperature") = py::none(), py::arg("seed") = 0, py::arg("hidden_layers") = std::vector<int>{})
      .def(
          "rescore",
          [](ToyModel& self, const std::string& ref, std::vector<TokenId> tokens, std::vector<std::size_t> mask,
             const std::string& mask_kind, const std::string& blank_mode, const std::string& prompt) {
            RescoreRequest r;
            r.image_ref = ref;
            r.prompt = prompt;
            r.response = std::move(tokens);
            r.mask = mask_from(std::move(mask), self.layout(ref).n_tokens(), mask_kind);
            r.blank_mode = blank_mode_from_string(blank_mode);
            return self.rescore(r);
          },
          py::arg("image_ref"), py::arg("tokens"), py::arg("mask") = std::vector<std::size_t>{},
          py::arg("mask_kind") = "core", py::arg("blank_mode") = "knockout", py::arg("prompt") = "")
      .def("counts", [](const ToyModel& self) {
        const auto& c = self.counts();
        return py::dict(py::arg("generations") = c.generations, py::arg("decode_steps") = c.decode_steps,
                        py::arg("rescore_passes") = c.rescore_passes, py::arg("text_queries") = c.text_queries);
      });

  // Scores.
  m.def("mean_entropy", [](const std::vector<double>& h) { return mean_entropy(steps_from(h)); });
  m.def("vauq_score", py::overload_cast<double, double, double>(&vauq_score), py::arg("h_full"), py::arg("h_masked"),
        py::arg("alpha"));
  m.def("vauq_score_expanded", &vauq_score_expanded, py::arg("h_full"), py::arg("h_masked"), py::arg("alpha"));

  // Saliency and masks.
  m.def(
      "aggregate_attention",
      [](const GenerationTrace& t, int start, int end) { return aggregate_attention(t, {start, end}).weights; },
      py::arg("trace"), py::arg("start"), py::arg("end"));
  m.def(
      "top_k_mask",
      [](std::vector<double> weights, int k) {
        SaliencyMap map;
        map.weights = std::move(weights);
        return top_k_mask(map, k).indices;
      },
      py::arg("weights"), py::arg("k_percent"));
  m.def("mask_cardinality", &mask_cardinality, py::arg("n_tokens"), py::arg("k_percent"));
  m.def(
      "random_mask",
      [](std::size_t n, std::size_t card, std::uint64_t seed) { return random_mask(n, card, seed).indices; },
      py::arg("n_tokens"), py::arg("cardinality"), py::arg("seed"));

  // Baselines.
  m.def(
      "perplexity", [](const std::vector<double>& logprobs) {
        std::vector<StepStats> s;
        for (double lp : logprobs) s.push_back({0.0, lp});
        return perplexity(s);
      },
      py::arg("logprobs"));
  m.def("eigenscore", &eigenscore, py::arg("embeddings"), py::arg("ridge") = 1e-3);
  m.def(
      "semantic_entropy",
      [](const std::vector<std::string>& responses, const std::vector<double>& log_probs) {
        return semantic_entropy(responses, log_probs);
      },
      py::arg("responses"), py::arg("log_probs") = std::vector<double>{});
  m.def("chain_of_embeddings", py::overload_cast<const std::vector<std::vector<double>>&>(&chain_of_embeddings),
        py::arg("layer_means"));
  m.def("normalize_answer", &normalize_answer);
  m.def("parse_confidence", &parse_confidence);
  m.def("verbalized_prompt", &verbalized_prompt, py::arg("question"), py::arg("answer"));

  // Evaluation.
  m.def(
      "auroc", [](const std::vector<double>& s, const std::vector<int>& y) { return auroc(s, y); }, py::arg("scores"),
      py::arg("labels"));
  m.def(
      "ingest_judgments",
      [](const std::vector<std::string>& verdicts) {
        const auto o = ingest_judgments(verdicts);
        py::object label = py::none();
        if (o.label != Label::unlabeled) label = py::int_(static_cast<int>(o.label));
        return py::make_tuple(label, o.reason);
      },
      py::arg("verdicts"));
  m.def(
      "sweep",
      [](const std::vector<double>& h_full, const std::vector<std::vector<double>>& h_masked, std::vector<int> ks,
         const std::vector<int>& labels, std::vector<double> alphas, double validation_fraction, std::uint64_t seed) {
        EntropyTable t;
        for (std::size_t i = 0; i < labels.size(); ++i) t.sample_ids.push_back(std::to_string(i));
        t.labels = labels;
        t.h_full = h_full;
        t.bands = {{0, 0}};
        t.ks = ks;
        t.h_masked = {h_masked};
        SweepGrid g;
        g.alphas = alphas.empty() ? SweepGrid::defaults().alphas : std::move(alphas);
        g.ks = std::move(ks);
        g.bands = t.bands;
        g.validation_fraction = validation_fraction;
        g.split_seed = seed;
        const auto r = sweep(t, g);
        return py::dict(py::arg("alpha") = r.best.alpha, py::arg("k_percent") = r.best.k_percent,
                        py::arg("validation_auroc") = r.validation_auroc, py::arg("test_auroc") = r.test_auroc,
                        py::arg("validation") = r.split.validation, py::arg("test") = r.split.test);
      },
      py::arg("h_full"), py::arg("h_masked"), py::arg("ks"), py::arg("labels"),
      py::arg("alphas") = std::vector<double>{}, py::arg("validation_fraction") = 0.2, py::arg("seed") = 0);

  // End-to-end commands.
  m.def(
      "synth",
      [](const std::string& path, std::size_t n, std::uint64_t seed, const std::string& name) {
        ToyModel model{ToyConfig{}};
        PopulationSpec spec;
        spec.n_samples = n;
        spec.seed = seed;
        spec.dataset = name;
        write_dataset(path, build_population(model, spec));
      },
      py::arg("path"), py::arg("n") = 200, py::arg("seed") = 0, py::arg("name") = "toy");
  m.def(
      "run_score",
      [](const std::string& config) {
        std::ostringstream log;
        const int code = cmd_score(run_config_from_json(json::parse(config)), log);
        return py::make_tuple(code, log.str());
      },
      py::arg("config_json"));
  m.def(
      "run_eval",
      [](const std::string& config) {
        std::ostringstream log;
        const int code = cmd_eval(run_config_from_json(json::parse(config)), log);
        return py::make_tuple(code, log.str());
      },
      py::arg("config_json"));
  m.def("known_scores", &known_scores);
}

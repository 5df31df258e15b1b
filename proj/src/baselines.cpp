#include "vauq/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "vauq/errors.hpp"
#include "vauq/scores.hpp"

namespace vauq {

double perplexity(std::span<const StepStats> steps) {
  if (steps.empty()) throw DegenerateSample("perplexity of an empty response");
  double sum = 0.0;
  for (const StepStats& s : steps) sum += s.logprob_realized;
  return std::exp(-sum / static_cast<double>(steps.size()));
}

std::string verbalized_prompt(std::string_view question, std::string_view answer) {
  std::string p;
  p += "Question: ";
  p += question;
  p += ".\nModel answer: ";
  p += answer;
  p += ".\nOn a scale of 0 to 100, how confident are you about the correctness of this answer? "
       "Respond with only a single number.";
  return p;
}

std::optional<int> parse_confidence(std::string_view reply) {
  std::size_t i = 0;
  while (i < reply.size()) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    long value = 0;
    while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) {
      if (value <= 1000) value = value * 10 + (reply[j] - '0');
      ++j;
    }
    if (value <= 100) return static_cast<int>(value);
    i = j;
  }
  return std::nullopt;
}

VerbalizedResult verbalized_from_reply(std::string reply) {
  VerbalizedResult r;
  r.confidence = parse_confidence(reply);
  r.reply = std::move(reply);
  if (r.confidence) {
    r.score = -static_cast<double>(*r.confidence) / 100.0;
  } else {
    r.parse_failed = true;
    r.score = -0.5;
  }
  return r;
}

VerbalizedResult verbalized_confidence(Backend& backend, const std::string& image_ref, std::string_view question,
                                       std::string_view answer) {
  return verbalized_from_reply(backend.query_text(image_ref, verbalized_prompt(question, answer)));
}

double svar(const GenerationTrace& trace, LayerBand layers) {
  if (trace.degenerate()) throw DegenerateSample("SVAR of an empty response");
  if (trace.n_heads == 0) throw InvalidArgument("SVAR needs attention heads");
  std::vector<std::size_t> slots;
  for (int l = layers.start; l <= layers.end; ++l) {
    const auto slot = trace.attention_slot(l);
    if (!slot) throw InvalidArgument("SVAR layer " + std::to_string(l) + " not exported");
    slots.push_back(*slot);
  }
  const std::size_t M = trace.length();
  double total = 0.0;
  for (std::size_t j = 0; j < M; ++j) {
    double per_token = 0.0;
    for (std::size_t slot : slots) {
      for (std::size_t h = 0; h < trace.n_heads; ++h) {
        for (std::size_t i = 0; i < trace.n_visual; ++i) per_token += trace.attn(slot, h, j, i);
      }
    }
    total += per_token / static_cast<double>(trace.n_heads);
  }
  return -(total / static_cast<double>(M));
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

FlaggedScore contextual_lens(std::span<const double> text_mean, const std::vector<std::vector<double>>& visual) {
  FlaggedScore out;
  const double tn = norm(text_mean);
  if (tn == 0.0) {
    out.flagged = true;
    out.note = "zero-norm text representation";
    return out;
  }
  if (visual.empty()) {
    out.flagged = true;
    out.note = "no visual representations";
    return out;
  }
  double best = -1.0;
  for (const auto& v : visual) {
    if (v.size() != text_mean.size()) throw InvalidArgument("contextual lens dimension mismatch");
    const double vn = norm(v);
    const double sim = vn == 0.0 ? 0.0 : dot(text_mean, v) / (tn * vn);
    best = std::max(best, sim);
  }
  out.value = best == 0.0 ? 0.0 : -best;
  return out;
}

FlaggedScore contextual_lens(const GenerationTrace& trace, int text_layer, int image_layer) {
  if (trace.degenerate()) throw DegenerateSample("contextual lens of an empty response");
  const HiddenStates& hs = trace.hidden;
  const auto text = hs.generated_mean(text_layer);
  const auto slot = hs.slot_of(image_layer);
  if (!slot) throw InvalidArgument("hidden states not exported for image layer " + std::to_string(image_layer));
  std::vector<std::vector<double>> visual(hs.n_visual, std::vector<double>(hs.dim));
  for (std::size_t i = 0; i < hs.n_visual; ++i) {
    auto v = hs.visual_at(*slot, i);
    std::copy(v.begin(), v.end(), visual[i].begin());
  }
  return contextual_lens(text, visual);
}

double chain_of_embeddings(const std::vector<std::vector<double>>& layer_means) {
  if (layer_means.size() < 2) throw InvalidArgument("chain of embeddings needs at least two layers");
  const std::size_t L = layer_means.size() - 1;
  double sum = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& a = layer_means[l];
    const auto& b = layer_means[l + 1];
    if (a.size() != b.size()) throw InvalidArgument("chain of embeddings dimension mismatch");
    double diff2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) diff2 += (b[k] - a[k]) * (b[k] - a[k]);
    const double na = norm(a), nb = norm(b);
    double angle = 0.0;
    if (na > 0.0 && nb > 0.0) angle = std::acos(std::clamp(dot(a, b) / (na * nb), -1.0, 1.0));
    sum += std::sqrt(diff2) - angle;
  }
  return sum / static_cast<double>(L);
}

double chain_of_embeddings(const GenerationTrace& trace) {
  if (trace.degenerate()) throw DegenerateSample("chain of embeddings of an empty response");
  const auto& layers = trace.hidden.layers;
  if (layers.empty()) throw InvalidArgument("chain of embeddings needs hidden states");
  const int top = *std::max_element(layers.begin(), layers.end());
  std::vector<std::vector<double>> means;
  for (int l = 0; l <= top; ++l) means.push_back(trace.hidden.generated_mean(l));
  return chain_of_embeddings(means);
}

SampleSet SampleSet::from_traces(const std::vector<GenerationTrace>& traces, const std::vector<std::string>& texts,
                                 int embedding_layer) {
  if (traces.size() != texts.size()) throw InvalidArgument("one text per sampled trace required");
  SampleSet set;
  set.texts = texts;
  set.embedding_layer = embedding_layer;
  for (const auto& t : traces) {
    set.embeddings.push_back(t.hidden.generated_mean(embedding_layer));
    double lp = 0.0;
    for (const StepStats& s : t.steps) lp += s.logprob_realized;
    set.log_probs.push_back(lp);
  }
  return set;
}

double eigenscore(const std::vector<std::vector<double>>& embeddings, double ridge) {
  const std::size_t K = embeddings.size();
  if (K < 2) throw InvalidArgument("eigenscore needs at least two responses");
  if (ridge < 0.0) throw InvalidArgument("eigenscore ridge must be >= 0");
  const std::size_t d = embeddings.front().size();
  if (d == 0) throw InvalidArgument("eigenscore needs non-empty embeddings");
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < K; ++r) {
    if (embeddings[r].size() != d) throw InvalidArgument("eigenscore embeddings differ in dimension");
    for (std::size_t c = 0; c < d; ++c) Z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = embeddings[r][c];
  }
  Z.rowwise() -= Z.colwise().mean();
  Eigen::MatrixXd C = (Z.transpose() * Z) / static_cast<double>(K);
  C.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw InvalidArgument("eigen decomposition failed");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    // Round-off can push a zero eigenvalue slightly negative.
    sum += std::log(std::max(solver.eigenvalues()[i], 0.0));
  }
  return sum / static_cast<double>(K);
}

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    cleaned += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ';
  }
  std::string out;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    if (j > i) {
      const std::string_view word(cleaned.data() + i, j - i);
      if (word != "a" && word != "an" && word != "the") {
        if (!out.empty()) out += ' ';
        out += word;
      }
    }
    i = j;
  }
  return out;
}

bool normalized_match(std::string_view a, std::string_view b) { return normalize_answer(a) == normalize_answer(b); }

SemanticClusters semantic_clusters(const std::vector<std::string>& responses, std::span<const double> log_probs,
                                   const Equivalence& equiv) {
  if (responses.empty()) throw InvalidArgument("semantic entropy needs at least one response");
  if (!log_probs.empty() && log_probs.size() != responses.size()) {
    throw InvalidArgument("one log-probability per response required");
  }
  SemanticClusters out;
  std::vector<std::size_t> representative;
  for (std::size_t r = 0; r < responses.size(); ++r) {
    std::optional<std::size_t> found;
    for (std::size_t c = 0; c < representative.size(); ++c) {
      const auto& rep = responses[representative[c]];
      const bool forward = equiv(responses[r], rep);
      const bool backward = equiv(rep, responses[r]);
      if (forward != backward) {
        throw InvalidArgument("equivalence oracle is not symmetric on '" + responses[r] + "' / '" + rep + "'");
      }
      if (forward) {
        found = c;
        break;
      }
    }
    if (!found) {
      found = representative.size();
      representative.push_back(r);
    }
    out.assignment.push_back(*found);
  }

  std::vector<double> weight(responses.size(), 1.0);
  if (!log_probs.empty()) {
    const double lmax = *std::max_element(log_probs.begin(), log_probs.end());
    for (std::size_t r = 0; r < responses.size(); ++r) weight[r] = std::exp(log_probs[r] - lmax);
  }
  out.probabilities.assign(representative.size(), 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < responses.size(); ++r) {
    out.probabilities[out.assignment[r]] += weight[r];
    total += weight[r];
  }
  for (double& p : out.probabilities) p /= total;
  for (double p : out.probabilities) {
    if (p > 0.0) out.entropy -= p * std::log(p);
  }
  return out;
}

double semantic_entropy(const std::vector<std::string>& responses, std::span<const double> log_probs,
                        const Equivalence& equiv) {
  return semantic_clusters(responses, log_probs, equiv).entropy;
}

}  // namespace vauq

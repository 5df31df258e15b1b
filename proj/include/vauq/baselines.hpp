#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vauq/backend.hpp"
#include "vauq/types.hpp"

namespace vauq {

// Comparison self-evaluation scores. Every function returns a value oriented
// so that higher means more likely hallucinated.

/// exp of the mean negative log-likelihood of the realized tokens.
double perplexity(std::span<const StepStats> steps);

// --- verbalized confidence -------------------------------------------------

std::string verbalized_prompt(std::string_view question, std::string_view answer);

/// First integer token of the reply that lies in [0, 100].
std::optional<int> parse_confidence(std::string_view reply);

struct VerbalizedResult {
  double score = -0.5;
  std::optional<int> confidence;
  bool parse_failed = false;
  std::string reply;
};

/// Scores a reply; an unparseable reply falls back to confidence 50 and is flagged.
VerbalizedResult verbalized_from_reply(std::string reply);
VerbalizedResult verbalized_confidence(Backend& backend, const std::string& image_ref, std::string_view question,
                                       std::string_view answer);

// --- attention / hidden-state baselines ------------------------------------

/// Summed visual attention ratio: per token, head-averaged visual attention
/// summed over `layers`, averaged over tokens, then negated.
double svar(const GenerationTrace& trace, LayerBand layers = {5, 18});

struct FlaggedScore {
  double value = 0.0;
  bool flagged = false;
  std::string note;
};

/// Negated maximum cosine similarity between the mean generated hidden state at
/// `text_layer` and each visual hidden state at `image_layer`.
FlaggedScore contextual_lens(const GenerationTrace& trace, int text_layer, int image_layer);
FlaggedScore contextual_lens(std::span<const double> text_mean, const std::vector<std::vector<double>>& visual);

/// Mean over adjacent layer pairs of (||h_{l+1} - h_l|| - angle(h_{l+1}, h_l)),
/// where h_l is the mean generated hidden state at layer l.
double chain_of_embeddings(const std::vector<std::vector<double>>& layer_means);
/// Uses hidden layers 0..L, which must all be exported.
double chain_of_embeddings(const GenerationTrace& trace);

// --- dispersion baselines --------------------------------------------------

/// K sampled responses for one (image, prompt).
struct SampleSet {
  std::vector<std::string> texts;
  std::vector<std::vector<double>> embeddings;  // mean over generated tokens at one layer
  std::vector<double> log_probs;                // sequence log-probability per response
  int embedding_layer = 0;

  static SampleSet from_traces(const std::vector<GenerationTrace>& traces, const std::vector<std::string>& texts,
                               int embedding_layer);
  std::size_t size() const { return texts.size(); }
};

/// (1/K) * sum of log eigenvalues of (1/K) Z^T Z + ridge * I, Z the centered embeddings.
double eigenscore(const std::vector<std::vector<double>>& embeddings, double ridge = 1e-3);

using Equivalence = std::function<bool(std::string_view, std::string_view)>;

/// Lower-cases, drops punctuation and the articles a/an/the, collapses spaces.
std::string normalize_answer(std::string_view text);
/// Default equivalence: normalized exact match.
bool normalized_match(std::string_view a, std::string_view b);

struct SemanticClusters {
  std::vector<std::size_t> assignment;  // cluster id per response
  std::vector<double> probabilities;    // per cluster, sums to 1
  double entropy = 0.0;
};

/// Clusters responses with `equiv` and takes the entropy of the cluster
/// distribution. `log_probs` weights responses (renormalized); empty = uniform.
/// Throws InvalidArgument if `equiv` disagrees with itself under argument swap.
SemanticClusters semantic_clusters(const std::vector<std::string>& responses, std::span<const double> log_probs,
                                   const Equivalence& equiv = normalized_match);
double semantic_entropy(const std::vector<std::string>& responses, std::span<const double> log_probs,
                        const Equivalence& equiv = normalized_match);

}  // namespace vauq

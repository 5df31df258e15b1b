#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vauq/dataset.hpp"
#include "vauq/toy_model.hpp"

namespace vauq {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Recipe for a labeled synthetic population on the toy backend.
///
/// Factual samples share the image and prior answers and lean on the prior;
/// counterfactual samples have a prior that contradicts the image. Each
/// sample gets a square evidence box of 2x2 or 3x3 patches at a random
/// position, a response sampled at `temperature`, and label 1 iff the first
/// response token differs from the image answer.
struct PopulationSpec {
  std::size_t n_samples = 200;
  double factual_fraction = 0.5;
  std::size_t grid_rows = 6;
  std::size_t grid_cols = 6;
  std::vector<std::size_t> box_sides{2, 3};
  Range factual_beta_image{0.0, 1.0};
  Range factual_beta_prior{1.0, 8.0};
  Range counterfactual_beta_image{0.0, 6.0};
  Range counterfactual_beta_prior{2.0, 6.0};
  double temperature = 0.7;
  std::uint64_t seed = 0;
  std::string dataset = "toy";
  std::string id_prefix = "s";

  void validate(const ToyArchitecture& arch) const;
};

/// Builds the records (each carrying its toy scene) using `model` to sample
/// the responses. Scenes are registered on `model` as a side effect.
std::vector<EvalRecord> build_population(ToyModel& model, const PopulationSpec& spec);

}  // namespace vauq

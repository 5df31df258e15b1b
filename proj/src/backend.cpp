#include "vauq/backend.hpp"

#include "vauq/hash.hpp"

namespace vauq {

std::string Decoding::describe() const {
  if (mode == Mode::greedy) return "greedy";
  return "sample:T=" + canonical_double(temperature) + ":seed=" + std::to_string(seed);
}

}  // namespace vauq

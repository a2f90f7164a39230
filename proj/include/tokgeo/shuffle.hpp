#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace tokgeo {

// Block shuffling: split into 4^s consecutive blocks of size ceil(n / 4^s),
// permute the blocks uniformly at random, concatenate.
struct ShuffleSpec {
  unsigned s = 0;
  std::uint64_t seed = 0;

  // Per-prompt stream derived from a dataset-level seed.
  static ShuffleSpec for_prompt(unsigned s, std::uint64_t seed, std::string_view prompt_id);
};

// Output position -> source index.
std::vector<std::size_t> shuffle_permutation(std::size_t n, const ShuffleSpec& spec);

template <typename T>
std::vector<T> shuffle_tokens(std::span<const T> tokens, const ShuffleSpec& spec) {
  const auto perm = shuffle_permutation(tokens.size(), spec);
  std::vector<T> out;
  out.reserve(tokens.size());
  for (std::size_t src : perm) out.push_back(tokens[src]);
  return out;
}

// Largest S with 4^S <= n.
unsigned full_shuffle_index(std::size_t n);

}  // namespace tokgeo

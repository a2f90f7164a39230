#include "tokgeo/shuffle.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "tokgeo/error.hpp"
#include "tokgeo/rng.hpp"

namespace tokgeo {

ShuffleSpec ShuffleSpec::for_prompt(unsigned s, std::uint64_t seed, std::string_view prompt_id) {
  return ShuffleSpec{s, derive_seed(seed, prompt_id)};
}

std::vector<std::size_t> shuffle_permutation(std::size_t n, const ShuffleSpec& spec) {
  require(n >= 1, ErrorCode::kInvalidArgument, "cannot shuffle an empty sequence");
  // 4^s <= n, checked without overflowing.
  std::size_t n_blocks = 1;
  for (unsigned i = 0; i < spec.s; ++i) {
    require(n_blocks <= n / 4, ErrorCode::kInvalidArgument,
            "4^" + std::to_string(spec.s) + " blocks exceed " + std::to_string(n) + " tokens");
    n_blocks *= 4;
  }
  const std::size_t block = (n + n_blocks - 1) / n_blocks;
  const std::size_t actual_blocks = (n + block - 1) / block;

  std::vector<std::size_t> order(actual_blocks);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  for (std::size_t i = actual_blocks; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::size_t> perm;
  perm.reserve(n);
  for (std::size_t b : order)
    for (std::size_t t = b * block; t < std::min(n, (b + 1) * block); ++t) perm.push_back(t);
  return perm;
}

unsigned full_shuffle_index(std::size_t n) {
  require(n >= 1, ErrorCode::kInvalidArgument, "n must be positive");
  unsigned s = 0;
  std::size_t p = 1;
  while (p <= n / 4) {
    p *= 4;
    ++s;
  }
  return s;
}

}  // namespace tokgeo

#pragma once

// Reference re-rankers bracketing the accuracy/exposure trade-off.

#include <algorithm>
#include <numeric>
#include <vector>

#include "fairflow/core.hpp"
#include "fairflow/random.hpp"

namespace fairflow {

/// The n least relevant entries of each long list, bottom-most first.
inline RankedBatch reverse_rerank(const RankedBatch& long_lists, std::size_t n) {
  if (n == 0 || n > long_lists.list_size()) throw InvalidArgument("n outside [1, t]");
  RankedBatch out(n);
  for (const auto& [user, list] : long_lists.lists()) {
    if (list.size() < n) throw InvalidArgument("list for '" + user + "' shorter than n");
    std::vector<ItemId> items;
    for (std::size_t k = 0; k < n; ++k) items.push_back(list[list.size() - 1 - k].item);
    out.set(user, with_positional_scores(items));
  }
  return out;
}

/// A uniform n-subset of each long list, kept in the original order. Each
/// user draws from its own stream derived from the seed.
inline RankedBatch random_rerank(const RankedBatch& long_lists, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n > long_lists.list_size()) throw InvalidArgument("n outside [1, t]");
  RankedBatch out(n);
  for (const auto& [user, list] : long_lists.lists()) {
    if (list.size() < n) throw InvalidArgument("list for '" + user + "' shorter than n");
    std::vector<std::size_t> pos(list.size());
    std::iota(pos.begin(), pos.end(), 0);
    Rng rng(derive_seed(seed, user));
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(pos[k], pos[k + uniform_below(rng, pos.size() - k)]);
    }
    pos.resize(n);
    std::sort(pos.begin(), pos.end());
    RankedList picked;
    for (auto p : pos) picked.push_back(list[p]);
    out.set(user, std::move(picked));
  }
  return out;
}

}  // namespace fairflow

#pragma once

// Popularity-skewed synthetic corpora with topic structure, used by the
// test harnesses and the `synth` command.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fairflow/core.hpp"
#include "fairflow/random.hpp"

namespace fairflow {

struct SyntheticOptions {
  std::size_t users = 500;
  std::size_t items = 300;
  std::size_t suppliers = 100;
  double zipf_exponent = 1.0;
  std::size_t topics = 10;
  /// Sampling boost for items of a user's favourite topic.
  double topic_affinity = 4.0;
  std::size_t min_profile = 20;
  std::size_t max_profile = 60;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  InteractionDataset ratings;
  SupplierCatalog catalog;
};

/// Item k (in a shuffled popularity order) is drawn with weight
/// 1 / (k + 1)^s, boosted for the user's topic. Suppliers each own at least
/// one item; the remaining items go to suppliers with the same Zipf skew.
/// Ratings are 3..5 on-topic and 1..4 off-topic.
inline SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt) {
  if (opt.items == 0 || opt.users == 0 || opt.suppliers == 0 || opt.suppliers > opt.items ||
      opt.topics == 0 || opt.min_profile == 0 || opt.min_profile > opt.max_profile ||
      opt.max_profile > opt.items) {
    throw InvalidArgument("inconsistent synthetic corpus options");
  }
  Rng rng(opt.seed);
  auto item_id = [](std::size_t i) { return "i" + std::to_string(i); };

  std::vector<std::size_t> pop_rank(opt.items);
  std::iota(pop_rank.begin(), pop_rank.end(), 0);
  fairflow::shuffle(pop_rank.begin(), pop_rank.end(), rng);
  std::vector<double> popularity(opt.items);
  std::vector<std::size_t> topic(opt.items);
  for (std::size_t i = 0; i < opt.items; ++i) {
    popularity[i] = 1.0 / std::pow(static_cast<double>(pop_rank[i] + 1), opt.zipf_exponent);
    topic[i] = uniform_below(rng, opt.topics);
  }

  SupplierCatalog catalog;
  std::vector<std::size_t> owner_order(opt.items);
  std::iota(owner_order.begin(), owner_order.end(), 0);
  fairflow::shuffle(owner_order.begin(), owner_order.end(), rng);
  std::vector<double> supplier_cdf(opt.suppliers);
  double acc = 0.0;
  for (std::size_t s = 0; s < opt.suppliers; ++s) {
    acc += 1.0 / std::pow(static_cast<double>(s + 1), opt.zipf_exponent);
    supplier_cdf[s] = acc;
  }
  for (std::size_t k = 0; k < opt.items; ++k) {
    std::size_t s = k;
    if (k >= opt.suppliers) {
      const double x = uniform_unit(rng) * acc;
      s = static_cast<std::size_t>(std::lower_bound(supplier_cdf.begin(), supplier_cdf.end(), x) -
                                   supplier_cdf.begin());
      s = std::min(s, opt.suppliers - 1);
    }
    catalog.add(item_id(owner_order[k]), "s" + std::to_string(s));
  }

  std::vector<Interaction> rows;
  std::vector<double> weight(opt.items);
  for (std::size_t u = 0; u < opt.users; ++u) {
    const std::size_t favourite = uniform_below(rng, opt.topics);
    const std::size_t size =
        opt.min_profile + uniform_below(rng, opt.max_profile - opt.min_profile + 1);
    for (std::size_t i = 0; i < opt.items; ++i) {
      weight[i] = popularity[i] * (topic[i] == favourite ? opt.topic_affinity : 1.0);
    }
    const std::string user = "u" + std::to_string(u);
    for (std::size_t k = 0; k < size; ++k) {
      const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
      double x = uniform_unit(rng) * total;
      std::size_t pick = 0;
      while (pick + 1 < opt.items && (x -= weight[pick]) >= 0.0) ++pick;
      while (weight[pick] == 0.0) pick = (pick + opt.items - 1) % opt.items;
      const bool on_topic = topic[pick] == favourite;
      const double rating = on_topic ? 3.0 + static_cast<double>(uniform_below(rng, 3))
                                     : 1.0 + static_cast<double>(uniform_below(rng, 4));
      rows.push_back({user, item_id(pick), rating});
      weight[pick] = 0.0;
    }
  }
  return {InteractionDataset(std::move(rows)), std::move(catalog)};
}

}  // namespace fairflow

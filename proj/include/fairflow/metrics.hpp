#pragma once

// Accuracy and exposure metrics over ranked batches: precision, visibility
// shifts per popularity group, alpha-aggregate diversity, long-tail
// coverage, Gini and entropy for items and suppliers, McNemar's test.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fairflow/core.hpp"

namespace fairflow {

/// Marker for metrics that are undefined on the given input.
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

inline bool is_undefined(double v) { return std::isnan(v); }

enum class Level { items, suppliers };

/// Mean over the batch's users of |L_u ∩ test_u| / n. Users without test
/// interactions count with an empty profile.
inline double precision(const RankedBatch& batch, const InteractionDataset& test) {
  if (batch.empty()) return 0.0;
  const auto n = static_cast<double>(batch.list_size());
  double sum = 0.0;
  for (const auto& [user, list] : batch.lists()) {
    const auto profile = test.items_of(user);
    std::size_t hits = 0;
    for (const auto& e : list) hits += profile.count(e.item);
    sum += static_cast<double>(hits) / n;
  }
  return sum / static_cast<double>(batch.num_users());
}

/// Raw recommendation counts per item.
inline std::unordered_map<ItemId, std::size_t> recommendation_counts(const RankedBatch& batch) {
  std::unordered_map<ItemId, std::size_t> counts;
  for (const auto& [_, list] : batch.lists()) {
    for (const auto& e : list) ++counts[e.item];
  }
  return counts;
}

/// IV over every catalogue item and SV over every supplier.
struct VisibilityTable {
  std::map<ItemId, double> item;
  std::map<SupplierId, double> supplier;

  const std::map<std::string, double>& at(Level level) const {
    return level == Level::items ? item : supplier;
  }
};

/// IV(i) = occurrences of i / number of lists; SV(s) = sum of IV over A(s).
/// Recommended items missing from the catalogue are a data error.
inline VisibilityTable visibility_table(const RankedBatch& batch, const SupplierCatalog& catalog) {
  VisibilityTable vt;
  for (const auto& [item, supplier] : catalog.item_to_supplier()) {
    vt.item[item] = 0.0;
    vt.supplier[supplier] = 0.0;
  }
  const double lists = batch.empty() ? 1.0 : static_cast<double>(batch.num_users());
  for (const auto& [item, count] : recommendation_counts(batch)) {
    auto it = vt.item.find(item);
    if (it == vt.item.end()) throw DataError("recommended item '" + item + "' not in catalogue");
    it->second = static_cast<double>(count) / lists;
  }
  for (const auto& [item, v] : vt.item) vt.supplier[catalog.supplier_of(item)] += v;
  return vt;
}

// ---------------------------------------------------------------------------

struct GroupBinning {
  /// groups[0] holds the most visible entities.
  std::array<std::vector<std::string>, 10> groups;
};

/// Sorts by visibility (descending, ties by id) and cuts into ten bins whose
/// sizes differ by at most one, larger bins first.
inline GroupBinning bin_by_visibility(const std::map<std::string, double>& visibility) {
  if (visibility.size() < 10) {
    throw InvalidArgument("need at least 10 entities to form visibility groups, got " +
                          std::to_string(visibility.size()));
  }
  std::vector<std::pair<std::string, double>> sorted(visibility.begin(), visibility.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  GroupBinning out;
  const std::size_t base = sorted.size() / 10, extra = sorted.size() % 10;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < 10; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) out.groups[g].push_back(sorted[pos++].first);
  }
  return out;
}

/// Relative change of each group's mean visibility between the base top-n
/// and the re-ranked batch. Groups come from the entities recommended in
/// the long lists, ranked by their long-list visibility. A group with zero
/// base visibility is undefined.
inline std::array<double, 10> group_visibility_shift(const RankedBatch& base_top_n,
                                                     const RankedBatch& reranked,
                                                     const RankedBatch& long_lists,
                                                     const SupplierCatalog& catalog, Level level) {
  const auto reference = visibility_table(long_lists, catalog).at(level);
  std::map<std::string, double> recommended;
  for (const auto& [id, v] : reference) {
    if (v > 0.0) recommended.emplace(id, v);
  }
  const auto bins = bin_by_visibility(recommended);
  const auto base = visibility_table(base_top_n, catalog).at(level);
  const auto after = visibility_table(reranked, catalog).at(level);

  std::array<double, 10> shift{};
  for (std::size_t g = 0; g < 10; ++g) {
    double b = 0.0, a = 0.0;
    for (const auto& id : bins.groups[g]) {
      b += base.at(id);
      a += after.at(id);
    }
    const auto size = static_cast<double>(bins.groups[g].size());
    b /= size;
    a /= size;
    shift[g] = b > 0.0 ? (a - b) / b : kUndefined;
  }
  return shift;
}

/// Fraction of catalogue items (or suppliers) recommended at least alpha
/// times; a supplier's count is the sum over its items.
inline double alpha_aggregate_diversity(const RankedBatch& batch, const SupplierCatalog& catalog,
                                        Level level, std::size_t alpha) {
  if (alpha == 0) throw InvalidArgument("alpha must be at least 1");
  const auto counts = recommendation_counts(batch);
  std::map<std::string, std::size_t> per_entity;
  for (const auto& [item, supplier] : catalog.item_to_supplier()) {
    per_entity[level == Level::items ? item : supplier] += 0;
  }
  for (const auto& [item, c] : counts) {
    if (!catalog.contains(item)) throw DataError("recommended item '" + item + "' not in catalogue");
    per_entity[level == Level::items ? item : catalog.supplier_of(item)] += c;
  }
  if (per_entity.empty()) return 0.0;
  std::size_t covered = 0;
  for (const auto& [_, c] : per_entity) covered += c >= alpha ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(per_entity.size());
}

/// Items outside the smallest most-rated prefix that holds at least 20% of
/// the training ratings (ties by id).
inline std::vector<ItemId> long_tail_items(const InteractionDataset& train,
                                           double head_share = 0.2) {
  if (train.empty()) throw InvalidArgument("empty training set");
  const auto counts = train.item_counts();
  std::vector<std::size_t> idx(counts.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto& ids = train.item_ids();
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return ids[a] < ids[b];
  });
  const double target = head_share * static_cast<double>(train.size());
  double cum = 0.0;
  std::size_t k = 0;
  while (k < idx.size() && cum < target) cum += static_cast<double>(counts[idx[k++]]);
  std::vector<ItemId> tail;
  for (; k < idx.size(); ++k) tail.push_back(ids[idx[k]]);
  return tail;
}

inline double long_tail_coverage(const RankedBatch& batch, const InteractionDataset& train) {
  const auto tail = long_tail_items(train);
  if (tail.empty()) return 0.0;
  const auto counts = recommendation_counts(batch);
  std::size_t covered = 0;
  for (const auto& i : tail) covered += counts.count(i);
  return static_cast<double>(covered) / static_cast<double>(tail.size());
}

namespace detail {

inline std::vector<double> normalized(const std::map<std::string, double>& values) {
  std::vector<double> p;
  p.reserve(values.size());
  double sum = 0.0;
  for (const auto& [_, v] : values) {
    p.push_back(v);
    sum += v;
  }
  if (!(sum > 0.0)) return {};
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace detail

/// Gini index of a visibility distribution over its whole universe:
/// (1/(N-1)) sum_k (2k - N - 1) p_k with p normalised and sorted ascending.
inline double gini_index(const std::map<std::string, double>& visibility) {
  auto p = detail::normalized(visibility);
  if (p.empty()) return kUndefined;
  if (p.size() == 1) return 0.0;
  std::sort(p.begin(), p.end());
  const auto n = static_cast<double>(p.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sum += (2.0 * static_cast<double>(k + 1) - n - 1.0) * p[k];
  }
  return std::clamp(sum / (n - 1.0), 0.0, 1.0);
}

inline double gini_index(const VisibilityTable& vt, Level level) { return gini_index(vt.at(level)); }

/// Shannon entropy (natural log) of the normalised visibility distribution.
inline double entropy(const std::map<std::string, double>& visibility) {
  const auto p = detail::normalized(visibility);
  if (p.empty()) return kUndefined;
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

inline double entropy(const VisibilityTable& vt, Level level) { return entropy(vt.at(level)); }

// ---------------------------------------------------------------------------

struct McNemarResult {
  std::size_t only_a = 0;  // b: hit under A, miss under B
  std::size_t only_b = 0;  // c
  double statistic = kUndefined;
  double p_value = kUndefined;
};

/// Continuity-corrected McNemar test over (user, test item) hit indicators
/// of two batches; undefined when there is no discordant pair.
inline McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c) {
  McNemarResult r{b, c};
  if (b + c == 0) return r;
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
  const double d = std::max(diff, 0.0);
  r.statistic = d * d / static_cast<double>(b + c);
  r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
  return r;
}

inline McNemarResult mcnemar(const RankedBatch& a, const RankedBatch& b,
                             const InteractionDataset& test) {
  if (a.users() != b.users()) throw InvalidArgument("McNemar needs batches over the same users");
  std::size_t only_a = 0, only_b = 0;
  for (const auto& [user, list_a] : a.lists()) {
    const auto profile = test.items_of(user);
    std::set<ItemId> in_a, in_b;
    for (const auto& e : list_a) in_a.insert(e.item);
    for (const auto& e : b.list(user)) in_b.insert(e.item);
    std::set<ItemId> pairs;
    for (const auto& i : in_a) {
      if (profile.count(i)) pairs.insert(i);
    }
    for (const auto& i : in_b) {
      if (profile.count(i)) pairs.insert(i);
    }
    for (const auto& i : pairs) {
      const bool ha = in_a.count(i) != 0, hb = in_b.count(i) != 0;
      if (ha && !hb) ++only_a;
      if (hb && !ha) ++only_b;
    }
  }
  return mcnemar_from_counts(only_a, only_b);
}

// ---------------------------------------------------------------------------

struct MetricReport {
  double precision = 0.0;
  std::array<double, 10> ivs{};
  std::array<double, 10> svs{};
  bool has_groups = false;
  std::map<std::size_t, double> alpha_ia;
  std::map<std::size_t, double> alpha_sa;
  double lt = 0.0;
  double ig = kUndefined;
  double sg = kUndefined;
  double ie = kUndefined;
  double se = kUndefined;
};

struct ReportOptions {
  std::size_t max_alpha = 20;
  /// Base top-n and long lists; visibility shifts are computed when both are set.
  const RankedBatch* base_top_n = nullptr;
  const RankedBatch* long_lists = nullptr;
  /// False when the catalogue is the identity fallback; supplier metrics
  /// are then left undefined.
  bool has_suppliers = true;
};

inline MetricReport evaluate(const RankedBatch& batch, const InteractionDataset& train,
                             const InteractionDataset& test, const SupplierCatalog& catalog,
                             const ReportOptions& opt = {}) {
  MetricReport r;
  r.precision = precision(batch, test);
  const auto vt = visibility_table(batch, catalog);
  for (std::size_t a = 1; a <= std::max<std::size_t>(opt.max_alpha, 5); ++a) {
    r.alpha_ia[a] = alpha_aggregate_diversity(batch, catalog, Level::items, a);
    r.alpha_sa[a] = opt.has_suppliers ? alpha_aggregate_diversity(batch, catalog, Level::suppliers, a)
                                      : kUndefined;
  }
  r.lt = long_tail_coverage(batch, train);
  r.ig = gini_index(vt, Level::items);
  r.ie = entropy(vt, Level::items);
  if (opt.has_suppliers) {
    r.sg = gini_index(vt, Level::suppliers);
    r.se = entropy(vt, Level::suppliers);
  }
  if (opt.base_top_n && opt.long_lists) {
    r.has_groups = true;
    r.ivs = group_visibility_shift(*opt.base_top_n, batch, *opt.long_lists, catalog, Level::items);
    if (opt.has_suppliers) {
      r.svs = group_visibility_shift(*opt.base_top_n, batch, *opt.long_lists, catalog,
                                     Level::suppliers);
    } else {
      r.svs.fill(kUndefined);
    }
  }
  return r;
}

}  // namespace fairflow

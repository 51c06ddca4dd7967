#pragma once

// Iterative max-flow re-ranking. Each round weights the remaining
// recommendation graph, solves max flow, and peels off the items that had to
// return flow to the source (relevant but rarely recommended). The peeled
// (item, user) pairs then replace the most visible items of each user's
// top-n list.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fairflow/core.hpp"
#include "fairflow/flow_network.hpp"

namespace fairflow {

/// Fixed-point scale applied to the real-valued edge weights.
inline constexpr double kWeightScale = 100.0;

struct RecPair {
  std::size_t item = 0;  // index into WeightedRecGraph::items
  std::size_t user = 0;  // index into WeightedRecGraph::users
  std::size_t rank = 0;  // 1-based position in the user's long list
  Capacity weight = 0;
  bool alive = true;
};

/// The (item, user) recommendation graph being peeled. Ranks are frozen from
/// the long lists; degrees always describe the live pairs.
class WeightedRecGraph {
 public:
  explicit WeightedRecGraph(const RankedBatch& long_lists) : list_size_(long_lists.list_size()) {
    std::unordered_map<ItemId, std::size_t> index;
    for (const auto& [user, list] : long_lists.lists()) {
      const std::size_t u = users_.size();
      users_.push_back(user);
      for (std::size_t k = 0; k < list.size(); ++k) {
        auto [it, inserted] = index.try_emplace(list[k].item, items_.size());
        if (inserted) items_.push_back(list[k].item);
        pairs_.push_back({it->second, u, k + 1, 0, true});
      }
    }
    degree_.assign(items_.size(), 0);
    for (const auto& p : pairs_) ++degree_[p.item];
    live_pairs_ = pairs_.size();
  }

  const std::vector<ItemId>& items() const noexcept { return items_; }
  const std::vector<UserId>& users() const noexcept { return users_; }
  const std::vector<RecPair>& pairs() const noexcept { return pairs_; }
  std::vector<RecPair>& pairs() noexcept { return pairs_; }
  std::size_t list_size() const noexcept { return list_size_; }

  std::size_t degree(std::size_t item) const { return degree_.at(item); }
  std::size_t live_pairs() const noexcept { return live_pairs_; }
  std::size_t live_items() const {
    return static_cast<std::size_t>(std::count_if(degree_.begin(), degree_.end(),
                                                  [](std::size_t d) { return d > 0; }));
  }

  /// Kills every live pair of the given items and returns them.
  std::vector<RecPair> remove_items(const std::vector<std::size_t>& items) {
    std::vector<char> drop(items_.size(), 0);
    for (auto i : items) drop.at(i) = 1;
    std::vector<RecPair> removed;
    for (auto& p : pairs_) {
      if (p.alive && drop[p.item]) {
        p.alive = false;
        --degree_[p.item];
        --live_pairs_;
        removed.push_back(p);
      }
    }
    return removed;
  }

 private:
  std::size_t list_size_ = 0;
  std::vector<ItemId> items_;
  std::vector<UserId> users_;
  std::vector<RecPair> pairs_;
  std::vector<std::size_t> degree_;
  std::size_t live_pairs_ = 0;
};

namespace detail {

/// Min-max maps the visibilities of the live items onto [1, t]; all-equal
/// visibilities map to 1.
inline std::vector<double> normalize_onto_ranks(const std::vector<double>& visibility,
                                                const std::vector<char>& live, std::size_t t) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < visibility.size(); ++i) {
    if (!live[i]) continue;
    if (first) {
      lo = hi = visibility[i];
      first = false;
    } else {
      lo = std::min(lo, visibility[i]);
      hi = std::max(hi, visibility[i]);
    }
  }
  std::vector<double> out(visibility.size(), 1.0);
  if (hi <= lo) return out;
  const double span = static_cast<double>(t) - 1.0;
  for (std::size_t i = 0; i < visibility.size(); ++i) {
    if (live[i]) out[i] = 1.0 + (visibility[i] - lo) * span / (hi - lo);
  }
  return out;
}

inline void assign_weights(WeightedRecGraph& graph, const std::vector<double>& visibility,
                           double lambda, std::size_t t) {
  std::vector<char> live(graph.items().size(), 0);
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = graph.degree(i) > 0;
  const auto norm = normalize_onto_ranks(visibility, live, t);
  for (auto& p : graph.pairs()) {
    if (!p.alive) continue;
    const double w = lambda * static_cast<double>(p.rank) + (1.0 - lambda) * norm[p.item];
    p.weight = static_cast<Capacity>(std::llround(kWeightScale * w));
  }
}

}  // namespace detail

/// w_iu = round(100 (lambda rank_iu + (1 - lambda) normDegree_i)).
inline void compute_edge_weights_item(WeightedRecGraph& graph, double lambda, std::size_t t) {
  std::vector<double> vis(graph.items().size());
  for (std::size_t i = 0; i < vis.size(); ++i) vis[i] = static_cast<double>(graph.degree(i));
  detail::assign_weights(graph, vis, lambda, t);
}

/// As the item variant, with the item's degree replaced by the summed live
/// degree of all items of its supplier.
inline void compute_edge_weights_supplier(WeightedRecGraph& graph, const SupplierCatalog& catalog,
                                          double lambda, std::size_t t) {
  const auto& items = graph.items();
  std::vector<std::size_t> supplier(items.size());
  std::map<SupplierId, std::size_t> ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!catalog.contains(items[i])) {
      throw ConfigError("item '" + items[i] + "' has no supplier");
    }
    supplier[i] = ids.try_emplace(catalog.supplier_of(items[i]), ids.size()).first->second;
  }
  std::vector<double> total(ids.size(), 0.0);
  for (std::size_t i = 0; i < items.size(); ++i) total[supplier[i]] += static_cast<double>(graph.degree(i));
  std::vector<double> vis(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) vis[i] = total[supplier[i]];
  detail::assign_weights(graph, vis, lambda, t);
}

struct TerminalCapacities {
  Capacity source = 0;
  Capacity sink = 0;

  friend bool operator==(const TerminalCapacities&, const TerminalCapacities&) = default;
};

/// Spreads the total middle capacity evenly over items and users, then
/// reduces both shares by their gcd: source = min(a, b) / g, sink = a / g with
/// a = ceil(C/|I|), b = ceil(C/|U|). Returns nullopt for a zero total.
inline std::optional<TerminalCapacities> assign_terminal_capacities(Capacity total,
                                                                    std::size_t num_items,
                                                                    std::size_t num_users) {
  if (num_items == 0 || num_users == 0) throw InvalidArgument("empty side in terminal capacities");
  if (total < 0) throw InvalidArgument("negative total capacity");
  if (total == 0) return std::nullopt;
  const auto ni = static_cast<Capacity>(num_items), nu = static_cast<Capacity>(num_users);
  const Capacity per_item = (total + ni - 1) / ni;
  const Capacity per_user = (total + nu - 1) / nu;
  const Capacity g = std::gcd(per_item, per_user);
  return TerminalCapacities{std::min(per_item / g, per_user / g), per_item / g};
}

// ---------------------------------------------------------------------------

struct Assignment {
  ItemId item;
  UserId user;
  Capacity weight = 0;
  std::size_t rank = 0;
};

struct CandidateAssignment {
  /// One entry per productive round, in discovery order.
  std::vector<std::vector<Assignment>> subgraphs;
  /// Items peeled for each user, in discovery order.
  std::map<UserId, std::vector<ItemId>> candidates_by_user;
  /// rank_iu of each peeled pair in the user's long list.
  std::map<std::pair<UserId, ItemId>, std::size_t> rank;
};

struct IterationStats {
  std::size_t iteration = 0;
  std::size_t items_remaining = 0;
  std::size_t pairs_remaining = 0;
  std::size_t candidates = 0;
  Capacity max_flow = 0;
};

/// The peeling loop alone: rounds of weighting, max flow and candidate
/// removal until a round finds nothing or the graph is exhausted.
inline CandidateAssignment select_candidates(const RankedBatch& long_lists,
                                             const SupplierCatalog* catalog, double lambda,
                                             Variant variant,
                                             std::vector<IterationStats>* stats = nullptr) {
  if (variant == Variant::supplier && catalog == nullptr) {
    throw ConfigError("supplier variant needs a supplier catalog");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in [0, 1]");
  const std::size_t t = long_lists.list_size();
  WeightedRecGraph graph(long_lists);
  CandidateAssignment out;
  const std::size_t max_rounds = graph.items().size();

  for (std::size_t round = 1;; ++round) {
    if (graph.live_pairs() == 0) break;
    if (round > max_rounds + 1) throw LogicError("candidate selection did not converge");
    if (variant == Variant::item) {
      compute_edge_weights_item(graph, lambda, t);
    } else {
      compute_edge_weights_supplier(graph, *catalog, lambda, t);
    }

    // compact the live graph into a flow network
    std::vector<std::size_t> item_slot(graph.items().size(), FlowNetwork::npos);
    std::vector<std::size_t> user_slot(graph.users().size(), FlowNetwork::npos);
    std::vector<std::size_t> slot_item;
    std::size_t live_users = 0;
    Capacity total = 0;
    for (const auto& p : graph.pairs()) {
      if (!p.alive) continue;
      if (item_slot[p.item] == FlowNetwork::npos) {
        item_slot[p.item] = slot_item.size();
        slot_item.push_back(p.item);
      }
      if (user_slot[p.user] == FlowNetwork::npos) user_slot[p.user] = live_users++;
      total += p.weight;
    }
    const auto caps = assign_terminal_capacities(total, slot_item.size(), live_users);
    if (!caps) break;

    FlowNetwork net(slot_item.size(), live_users);
    for (std::size_t i = 0; i < slot_item.size(); ++i) {
      net.add_edge(net.source(), net.item_node(i), caps->source);
    }
    for (const auto& p : graph.pairs()) {
      if (p.alive) net.add_edge(net.item_node(item_slot[p.item]), net.user_node(user_slot[p.user]), p.weight);
    }
    for (std::size_t u = 0; u < live_users; ++u) net.add_edge(net.user_node(u), net.sink(), caps->sink);

    const auto result = max_flow(net);
    std::vector<std::size_t> picked;
    for (auto slot : low_capacity_left_nodes(result.labels, net)) picked.push_back(slot_item[slot]);

    if (stats) {
      stats->push_back({round, slot_item.size(), graph.live_pairs(), picked.size(), result.value});
    }
    if (picked.empty()) break;

    std::vector<Assignment> subgraph;
    for (const auto& p : graph.remove_items(picked)) {
      const auto& item = graph.items()[p.item];
      const auto& user = graph.users()[p.user];
      subgraph.push_back({item, user, p.weight, p.rank});
      out.candidates_by_user[user].push_back(item);
      out.rank[{user, item}] = p.rank;
    }
    out.subgraphs.push_back(std::move(subgraph));
  }
  return out;
}

/// IV(i) = (lists containing i) / (number of lists).
inline std::unordered_map<ItemId, double> list_visibility(const RankedBatch& batch) {
  std::unordered_map<ItemId, double> vis;
  if (batch.empty()) return vis;
  for (const auto& [_, list] : batch.lists()) {
    for (const auto& e : list) vis[e.item] += 1.0;
  }
  const auto users = static_cast<double>(batch.num_users());
  for (auto& [_, v] : vis) v /= users;
  return vis;
}

/// Builds each user's final list from the base top-n: the r = min(floor(beta
/// n), |candidates|) most visible base items are dropped and the r least
/// visible candidates appended after the retained items. Short candidate
/// pools are backfilled from the long list beyond position n. Users with
/// nothing to replace keep their base list untouched.
inline RankedBatch reconstruct_lists(const RankedBatch& long_lists,
                                     const CandidateAssignment& assignment, std::size_t n,
                                     double beta,
                                     const std::unordered_map<ItemId, double>& base_visibility) {
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in (0, 1]");
  if (n == 0 || n > long_lists.list_size()) throw InvalidArgument("n outside [1, t]");
  auto vis = [&](const ItemId& i) {
    auto it = base_visibility.find(i);
    return it == base_visibility.end() ? 0.0 : it->second;
  };
  const auto quota = static_cast<std::size_t>(std::floor(beta * static_cast<double>(n) + 1e-9));

  RankedBatch out(n);
  for (const auto& [user, list] : long_lists.lists()) {
    RankedList base(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n));
    auto found = assignment.candidates_by_user.find(user);
    const std::size_t pool = found == assignment.candidates_by_user.end() ? 0 : found->second.size();
    const std::size_t r = std::min(quota, pool);
    if (r == 0) {
      out.set(user, std::move(base));
      continue;
    }

    // positions 0..n-1 ordered by visibility, least relevant last among ties
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return vis(base[a].item) < vis(base[b].item);
    });
    std::vector<char> dropped(n, 0);
    for (std::size_t k = n - r; k < n; ++k) dropped[order[k]] = 1;

    std::vector<ItemId> final_items;
    std::unordered_set<ItemId> present;
    for (std::size_t k = 0; k < n; ++k) {
      if (!dropped[k]) {
        final_items.push_back(base[k].item);
        present.insert(base[k].item);
      }
    }

    std::vector<ItemId> pool_items = found->second;
    std::stable_sort(pool_items.begin(), pool_items.end(), [&](const ItemId& a, const ItemId& b) {
      const double va = vis(a), vb = vis(b);
      if (va != vb) return va < vb;
      const auto ra = assignment.rank.at({user, a}), rb = assignment.rank.at({user, b});
      if (ra != rb) return ra < rb;
      return a < b;
    });
    std::size_t added = 0;
    for (const auto& item : pool_items) {
      if (added == r) break;
      if (present.insert(item).second) {
        final_items.push_back(item);
        ++added;
      }
    }
    for (std::size_t k = n; k < list.size() && final_items.size() < n; ++k) {
      if (present.insert(list[k].item).second) final_items.push_back(list[k].item);
    }
    // a long list of exactly n entries can run out; restore dropped base items
    for (std::size_t k = 0; k < n && final_items.size() < n; ++k) {
      if (present.insert(base[k].item).second) final_items.push_back(base[k].item);
    }
    out.set(user, with_positional_scores(final_items));
  }
  return out;
}

struct FairMatchResult {
  RankedBatch final_batch;
  CandidateAssignment assignment;
  std::size_t iterations = 0;
  std::vector<IterationStats> per_iteration;
};

/// End-to-end re-ranking of size-t lists into size-n lists.
inline FairMatchResult run_fair_match(const RankedBatch& long_lists, const SupplierCatalog* catalog,
                                      const ExperimentConfig& config) {
  config.validate();
  if (long_lists.list_size() != config.t) {
    throw InvalidArgument("long lists have size " + std::to_string(long_lists.list_size()) +
                          ", configured t is " + std::to_string(config.t));
  }
  if (!long_lists.complete()) throw InvalidArgument("long lists contain short entries");
  FairMatchResult out;
  out.assignment =
      select_candidates(long_lists, catalog, config.lambda, config.variant, &out.per_iteration);
  out.iterations = out.per_iteration.size();
  const auto base_vis = list_visibility(truncate(long_lists, config.n));
  out.final_batch =
      reconstruct_lists(long_lists, out.assignment, config.n, config.beta, base_vis);
  return out;
}

}  // namespace fairflow

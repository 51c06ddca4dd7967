#pragma once

// Bipartite flow network (source -> items -> users -> sink) and a FIFO
// push-relabel maximum-flow solver whose final labels mark the items that
// had to send excess back to the source.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fairflow/core.hpp"

namespace fairflow {

using Capacity = std::int64_t;
using NodeId = std::size_t;

/// Arcs come in pairs: arc 2k is a forward edge, arc 2k+1 its residual twin.
struct Arc {
  NodeId to = 0;
  Capacity residual = 0;
  Capacity capacity = 0;  // zero on residual twins
};

/// Node layout: 0 is the source, 1..|I| the items, |I|+1..|I|+|U| the users,
/// and |I|+|U|+1 the sink. Edges may only run source->item, item->user and
/// user->sink.
class FlowNetwork {
 public:
  FlowNetwork() = default;
  FlowNetwork(std::size_t num_items, std::size_t num_users)
      : num_items_(num_items), num_users_(num_users), adjacency_(num_items + num_users + 2) {}

  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_nodes() const noexcept { return adjacency_.size(); }
  std::size_t num_edges() const noexcept { return arcs_.size() / 2; }

  NodeId source() const noexcept { return 0; }
  NodeId sink() const noexcept { return num_items_ + num_users_ + 1; }
  NodeId item_node(std::size_t i) const noexcept { return 1 + i; }
  NodeId user_node(std::size_t u) const noexcept { return 1 + num_items_ + u; }
  bool is_item(NodeId v) const noexcept { return v >= 1 && v <= num_items_; }
  bool is_user(NodeId v) const noexcept { return v > num_items_ && v <= num_items_ + num_users_; }

  /// Adds a forward edge and its residual twin; returns the forward arc id.
  std::size_t add_edge(NodeId from, NodeId to, Capacity capacity) {
    const bool ok = (from == source() && is_item(to)) || (is_item(from) && is_user(to)) ||
                    (is_user(from) && to == sink());
    if (!ok) {
      throw InvalidArgument("edge " + std::to_string(from) + "->" + std::to_string(to) +
                            " breaks the source/item/user/sink layering");
    }
    if (capacity < 0) throw InvalidArgument("negative capacity");
    const std::size_t id = arcs_.size();
    arcs_.push_back({to, capacity, capacity});
    arcs_.push_back({from, 0, 0});
    adjacency_[from].push_back(id);
    adjacency_[to].push_back(id + 1);
    return id;
  }

  const std::vector<std::size_t>& arcs_of(NodeId v) const { return adjacency_.at(v); }
  const Arc& arc(std::size_t id) const { return arcs_.at(id); }
  NodeId tail(std::size_t id) const { return arcs_[id ^ 1U].to; }
  /// Flow on a forward arc.
  Capacity flow(std::size_t id) const { return arcs_[id & ~std::size_t{1}].capacity - arcs_[id & ~std::size_t{1}].residual; }

  /// Arc from -> to with positive original capacity or a residual twin;
  /// forward arcs are preferred. Returns npos if there is none.
  std::size_t find_arc(NodeId from, NodeId to) const {
    std::size_t twin = npos;
    for (auto id : adjacency_.at(from)) {
      if (arcs_[id].to != to) continue;
      if (id % 2 == 0) return id;
      twin = id;
    }
    return twin;
  }

  /// Sends `amount` along arc `id`, updating both directions.
  void send(std::size_t id, Capacity amount) {
    arcs_[id].residual -= amount;
    arcs_[id ^ 1U].residual += amount;
  }

  /// Capacity bounds and residual bookkeeping on every edge pair.
  bool audit() const {
    for (std::size_t id = 0; id < arcs_.size(); id += 2) {
      const auto f = arcs_[id].capacity - arcs_[id].residual;
      if (f < 0 || f > arcs_[id].capacity || arcs_[id + 1].residual != f) return false;
    }
    return true;
  }

  /// Edge list "from to capacity flow", one forward edge per line.
  void dump(std::ostream& out) const {
    for (std::size_t id = 0; id < arcs_.size(); id += 2) {
      out << tail(id) << ' ' << arcs_[id].to << ' ' << arcs_[id].capacity << ' ' << flow(id) << '\n';
    }
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t num_items_ = 0;
  std::size_t num_users_ = 0;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<Arc> arcs_;
};

// ---------------------------------------------------------------------------

/// Network built from long lists together with the node naming used.
struct LabeledNetwork {
  FlowNetwork network;
  std::vector<ItemId> items;  // items[i] sits at network.item_node(i)
  std::vector<UserId> users;
};

using EdgeWeights = std::map<std::pair<ItemId, UserId>, Capacity>;

/// One item->user edge per recommendation. Items are numbered by first
/// appearance walking users in id order and lists in rank order.
inline LabeledNetwork build_network(const RankedBatch& long_lists, const EdgeWeights& weights,
                                    Capacity source_weight, Capacity sink_weight) {
  if (source_weight < 0 || sink_weight < 0) throw InvalidArgument("negative terminal weight");
  std::map<ItemId, std::size_t> item_index;
  LabeledNetwork out;
  for (const auto& [user, list] : long_lists.lists()) {
    out.users.push_back(user);
    for (const auto& e : list) {
      if (item_index.try_emplace(e.item, out.items.size()).second) out.items.push_back(e.item);
    }
  }
  out.network = FlowNetwork(out.items.size(), out.users.size());
  auto& net = out.network;
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    net.add_edge(net.source(), net.item_node(i), source_weight);
  }
  for (std::size_t u = 0; u < out.users.size(); ++u) {
    for (const auto& e : long_lists.list(out.users[u])) {
      auto it = weights.find({e.item, out.users[u]});
      if (it == weights.end()) {
        throw InvalidArgument("no weight for recommendation (" + e.item + ", " + out.users[u] + ")");
      }
      if (it->second < 0) throw InvalidArgument("negative edge weight");
      net.add_edge(net.item_node(item_index.at(e.item)), net.user_node(u), it->second);
    }
  }
  for (std::size_t u = 0; u < out.users.size(); ++u) {
    net.add_edge(net.user_node(u), net.sink(), sink_weight);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SolverState {
  std::vector<Capacity> label;
  std::vector<Capacity> excess;
  std::deque<NodeId> active;
  std::vector<char> queued;
  std::vector<std::size_t> current_arc;
  std::size_t pushes = 0;
  std::size_t relabels = 0;

  /// Largest admissible label; relabelling beyond it is a solver bug.
  Capacity label_bound() const { return 2 * static_cast<Capacity>(label.size()) + 1; }
};

/// Source label |I|+|U|+2, item labels 2, user labels 1, sink 0; every
/// source edge is saturated and the items are queued in index order.
inline SolverState preflow(FlowNetwork& net) {
  const std::size_t nodes = net.num_nodes();
  SolverState st;
  st.label.assign(nodes, 0);
  st.excess.assign(nodes, 0);
  st.queued.assign(nodes, 0);
  st.current_arc.assign(nodes, 0);
  st.label[net.source()] = static_cast<Capacity>(net.num_items() + net.num_users() + 2);
  for (std::size_t i = 0; i < net.num_items(); ++i) st.label[net.item_node(i)] = 2;
  for (std::size_t u = 0; u < net.num_users(); ++u) st.label[net.user_node(u)] = 1;
  st.label[net.sink()] = 0;

  for (auto id : net.arcs_of(net.source())) {
    const Capacity c = net.arc(id).residual;
    if (id % 2 != 0 || c == 0) continue;
    const NodeId to = net.arc(id).to;
    net.send(id, c);
    st.excess[to] += c;
    st.excess[net.source()] -= c;
  }
  for (std::size_t i = 0; i < net.num_items(); ++i) {
    const NodeId v = net.item_node(i);
    if (st.excess[v] > 0) {
      st.active.push_back(v);
      st.queued[v] = 1;
    }
  }
  return st;
}

namespace detail {

inline void activate(SolverState& st, const FlowNetwork& net, NodeId v) {
  if (v == net.source() || v == net.sink() || st.queued[v] || st.excess[v] <= 0) return;
  st.active.push_back(v);
  st.queued[v] = 1;
}

inline Capacity push_arc(SolverState& st, FlowNetwork& net, std::size_t id) {
  const NodeId from = net.tail(id);
  const NodeId to = net.arc(id).to;
  const Capacity delta = std::min(st.excess[from], net.arc(id).residual);
  net.send(id, delta);
  st.excess[from] -= delta;
  st.excess[to] += delta;
  ++st.pushes;
  activate(st, net, to);
  return delta;
}

}  // namespace detail

/// Pushes min(excess(from), residual(from, to)) along an admissible arc.
/// Throws LogicError when the arc is not admissible.
inline Capacity push(SolverState& st, FlowNetwork& net, NodeId from, NodeId to) {
  std::size_t id = FlowNetwork::npos;
  for (auto a : net.arcs_of(from)) {
    if (net.arc(a).to == to && net.arc(a).residual > 0) {
      id = a;
      break;
    }
  }
  if (st.excess.at(from) <= 0) throw LogicError("push from a node without excess");
  if (id == FlowNetwork::npos) throw LogicError("push along an arc without residual capacity");
  if (st.label[from] != st.label[to] + 1) throw LogicError("push to a node not one label below");
  return detail::push_arc(st, net, id);
}

/// Sets label(v) to one more than the lowest residual neighbour.
inline Capacity relabel(SolverState& st, const FlowNetwork& net, NodeId v) {
  if (st.excess.at(v) <= 0) throw LogicError("relabel of a node without excess");
  Capacity lowest = -1;
  for (auto id : net.arcs_of(v)) {
    if (net.arc(id).residual <= 0) continue;
    const Capacity l = st.label[net.arc(id).to];
    if (l < st.label[v]) throw LogicError("relabel while an admissible arc exists");
    if (lowest < 0 || l < lowest) lowest = l;
  }
  if (lowest < 0) throw LogicError("relabel of a node with no residual arcs");
  st.label[v] = lowest + 1;
  if (st.label[v] > st.label_bound()) throw LogicError("label bound exceeded");
  ++st.relabels;
  return st.label[v];
}

struct MaxFlowResult {
  Capacity value = 0;
  std::vector<Capacity> labels;
  SolverState state;
};

/// FIFO discharge until no node is active. The value is the total flow into
/// the sink. Runs on `net` in place, leaving the final flow on its arcs.
inline MaxFlowResult max_flow(FlowNetwork& net) {
  SolverState st = preflow(net);
  const auto v_count = static_cast<double>(net.num_nodes());
  const auto e_count = static_cast<double>(std::max<std::size_t>(net.num_edges(), 1));
  const double budget = v_count * v_count * e_count + 1e6;

  while (!st.active.empty()) {
    const NodeId v = st.active.front();
    st.active.pop_front();
    st.queued[v] = 0;
    const auto& arcs = net.arcs_of(v);
    while (st.excess[v] > 0) {
      auto& cur = st.current_arc[v];
      if (cur == arcs.size()) {
        relabel(st, net, v);
        cur = 0;
        continue;
      }
      const std::size_t id = arcs[cur];
      const Arc& a = net.arc(id);
      if (a.residual > 0 && st.label[v] == st.label[a.to] + 1) {
        detail::push_arc(st, net, id);
      } else {
        ++cur;
      }
    }
    if (static_cast<double>(st.pushes + st.relabels) > budget) {
      throw LogicError("push-relabel exceeded its O(V^2 E) operation budget");
    }
  }
  MaxFlowResult out;
  out.value = st.excess[net.sink()];
  out.labels = st.label;
  out.state = std::move(st);
  return out;
}

/// Item indices whose final label reached the source's initial label, i.e.
/// the items that returned excess to the source.
inline std::vector<std::size_t> low_capacity_left_nodes(const std::vector<Capacity>& labels,
                                                        const FlowNetwork& net) {
  const auto threshold = static_cast<Capacity>(net.num_items() + net.num_users() + 2);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < net.num_items(); ++i) {
    if (labels.at(net.item_node(i)) >= threshold) out.push_back(i);
  }
  return out;
}

}  // namespace fairflow

#pragma once

// Shared domain types: interaction data, supplier catalogs, ranked
// recommendation lists and experiment configuration.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fairflow {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (usage 1, data 2, internal 3).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed, inconsistent or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Broken algorithm invariant (solver preconditions, watchdogs).
class LogicError : public Error {
 public:
  using Error::Error;
};

using UserId = std::string;
using ItemId = std::string;
using SupplierId = std::string;

// ---------------------------------------------------------------------------

struct Interaction {
  UserId user;
  ItemId item;
  double value = 0.0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// User/item/value triples with dense indices for users and items.
///
/// Indices follow first appearance in the interaction sequence. A dataset is
/// immutable once built; every transform returns a new one.
class InteractionDataset {
 public:
  InteractionDataset() = default;

  /// Builds the dataset, collapsing duplicate (user, item) pairs onto the
  /// last occurrence (kept at the position of the first).
  explicit InteractionDataset(std::vector<Interaction> rows) {
    std::unordered_map<std::string, std::size_t> seen;
    seen.reserve(rows.size());
    interactions_.reserve(rows.size());
    for (auto& row : rows) {
      if (row.value < 0.0) {
        throw DataError("negative interaction value for (" + row.user + ", " + row.item + ")");
      }
      std::string key = row.user;
      key.push_back('\x1f');
      key += row.item;
      auto [it, inserted] = seen.try_emplace(std::move(key), interactions_.size());
      if (inserted) {
        interactions_.push_back(std::move(row));
      } else {
        interactions_[it->second].value = row.value;
      }
    }
    for (const auto& r : interactions_) {
      if (user_index_.try_emplace(r.user, user_ids_.size()).second) user_ids_.push_back(r.user);
      if (item_index_.try_emplace(r.item, item_ids_.size()).second) item_ids_.push_back(r.item);
    }
    profiles_.resize(user_ids_.size());
    for (std::size_t k = 0; k < interactions_.size(); ++k) {
      profiles_[user_index_.at(interactions_[k].user)].push_back(k);
    }
  }

  const std::vector<Interaction>& interactions() const noexcept { return interactions_; }
  std::size_t size() const noexcept { return interactions_.size(); }
  bool empty() const noexcept { return interactions_.empty(); }

  std::size_t num_users() const noexcept { return user_ids_.size(); }
  std::size_t num_items() const noexcept { return item_ids_.size(); }
  const std::vector<UserId>& user_ids() const noexcept { return user_ids_; }
  const std::vector<ItemId>& item_ids() const noexcept { return item_ids_; }

  bool has_user(const UserId& u) const { return user_index_.count(u) != 0; }
  bool has_item(const ItemId& i) const { return item_index_.count(i) != 0; }
  std::size_t user_index(const UserId& u) const { return lookup(user_index_, u, "user"); }
  std::size_t item_index(const ItemId& i) const { return lookup(item_index_, i, "item"); }

  /// Positions in interactions() belonging to the user with dense index `u`.
  const std::vector<std::size_t>& profile(std::size_t u) const { return profiles_.at(u); }

  /// Items of a user's profile; empty if the user is unknown.
  std::set<ItemId> items_of(const UserId& u) const {
    std::set<ItemId> out;
    auto it = user_index_.find(u);
    if (it == user_index_.end()) return out;
    for (auto k : profiles_[it->second]) out.insert(interactions_[k].item);
    return out;
  }

  /// Number of interactions per item, indexed by item index.
  std::vector<std::size_t> item_counts() const {
    std::vector<std::size_t> counts(item_ids_.size(), 0);
    for (const auto& r : interactions_) ++counts[item_index_.at(r.item)];
    return counts;
  }

 private:
  static std::size_t lookup(const std::unordered_map<std::string, std::size_t>& index,
                            const std::string& key, const char* what) {
    auto it = index.find(key);
    if (it == index.end()) throw DataError(std::string("unknown ") + what + " '" + key + "'");
    return it->second;
  }

  std::vector<Interaction> interactions_;
  std::vector<UserId> user_ids_;
  std::vector<ItemId> item_ids_;
  std::unordered_map<std::string, std::size_t> user_index_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::vector<std::vector<std::size_t>> profiles_;
};

// ---------------------------------------------------------------------------

/// Total item -> supplier mapping with its inverse.
class SupplierCatalog {
 public:
  SupplierCatalog() = default;

  /// Throws DataError if an item is given two different suppliers.
  explicit SupplierCatalog(const std::vector<std::pair<ItemId, SupplierId>>& rows) {
    for (const auto& [item, supplier] : rows) add(item, supplier);
  }

  void add(const ItemId& item, const SupplierId& supplier) {
    auto [it, inserted] = item_to_supplier_.try_emplace(item, supplier);
    if (!inserted) {
      if (it->second != supplier) {
        throw DataError("item '" + item + "' mapped to two suppliers: '" + it->second +
                        "' and '" + supplier + "'");
      }
      return;
    }
    supplier_to_items_[supplier].insert(item);
  }

  const SupplierId& supplier_of(const ItemId& item) const {
    auto it = item_to_supplier_.find(item);
    if (it == item_to_supplier_.end()) throw DataError("no supplier for item '" + item + "'");
    return it->second;
  }

  const std::set<ItemId>& items_of(const SupplierId& supplier) const {
    auto it = supplier_to_items_.find(supplier);
    if (it == supplier_to_items_.end()) throw DataError("unknown supplier '" + supplier + "'");
    return it->second;
  }

  bool contains(const ItemId& item) const { return item_to_supplier_.count(item) != 0; }
  std::size_t num_items() const noexcept { return item_to_supplier_.size(); }
  std::size_t num_suppliers() const noexcept { return supplier_to_items_.size(); }

  const std::map<ItemId, SupplierId>& item_to_supplier() const noexcept { return item_to_supplier_; }
  const std::map<SupplierId, std::set<ItemId>>& supplier_to_items() const noexcept {
    return supplier_to_items_;
  }

  std::vector<ItemId> items() const {
    std::vector<ItemId> out;
    out.reserve(item_to_supplier_.size());
    for (const auto& [item, _] : item_to_supplier_) out.push_back(item);
    return out;
  }

  std::vector<SupplierId> suppliers() const {
    std::vector<SupplierId> out;
    out.reserve(supplier_to_items_.size());
    for (const auto& [s, _] : supplier_to_items_) out.push_back(s);
    return out;
  }

  /// Every item is its own supplier.
  template <typename Range>
  static SupplierCatalog identity(const Range& items) {
    SupplierCatalog c;
    for (const auto& i : items) c.add(i, i);
    return c;
  }

 private:
  std::map<ItemId, SupplierId> item_to_supplier_;
  std::map<SupplierId, std::set<ItemId>> supplier_to_items_;
};

inline const SupplierId& supplier_of(const SupplierCatalog& catalog, const ItemId& item) {
  return catalog.supplier_of(item);
}

// ---------------------------------------------------------------------------

struct ScoredItem {
  ItemId item;
  double score = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

using RankedList = std::vector<ScoredItem>;

/// Descending score, ties by ascending item id.
inline bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

/// Per-user ordered recommendation lists of a common size. Position k holds
/// rank k + 1.
class RankedBatch {
 public:
  RankedBatch() = default;
  explicit RankedBatch(std::size_t list_size) : list_size_(list_size) {}

  /// Validates length and uniqueness; order is taken as given.
  void set(const UserId& user, RankedList list) {
    if (list.size() != list_size_) {
      throw DataError("list for user '" + user + "' has " + std::to_string(list.size()) +
                      " entries, expected " + std::to_string(list_size_));
    }
    store(user, std::move(list));
  }

  /// Accepts a list shorter than list_size() (catalogue exhausted). Such a
  /// batch is incomplete and rejected by the re-rankers.
  void set_short(const UserId& user, RankedList list) {
    if (list.size() > list_size_) {
      throw DataError("list for user '" + user + "' exceeds " + std::to_string(list_size_));
    }
    if (list.size() < list_size_) ++short_lists_;
    store(user, std::move(list));
  }

  bool complete() const noexcept { return short_lists_ == 0; }

  std::size_t list_size() const noexcept { return list_size_; }
  std::size_t num_users() const noexcept { return lists_.size(); }
  bool empty() const noexcept { return lists_.empty(); }
  bool has_user(const UserId& u) const { return lists_.count(u) != 0; }

  const RankedList& list(const UserId& u) const& {
    auto it = lists_.find(u);
    if (it == lists_.end()) throw DataError("no list for user '" + u + "'");
    return it->second;
  }
  // a reference into a temporary batch would dangle
  const RankedList& list(const UserId& u) const&& = delete;

  const std::map<UserId, RankedList>& lists() const& noexcept { return lists_; }
  const std::map<UserId, RankedList>& lists() const&& = delete;

  std::vector<UserId> users() const {
    std::vector<UserId> out;
    out.reserve(lists_.size());
    for (const auto& [u, _] : lists_) out.push_back(u);
    return out;
  }

  friend bool operator==(const RankedBatch&, const RankedBatch&) = default;

 private:
  void store(const UserId& user, RankedList list) {
    std::set<ItemId> seen;
    for (const auto& e : list) {
      if (!seen.insert(e.item).second) {
        throw DataError("duplicate item '" + e.item + "' in list for user '" + user + "'");
      }
    }
    auto it = lists_.find(user);
    if (it != lists_.end() && it->second.size() < list_size_) --short_lists_;
    lists_[user] = std::move(list);
  }

  std::size_t list_size_ = 0;
  std::size_t short_lists_ = 0;
  std::map<UserId, RankedList> lists_;
};

/// Scores 1.0, (n-1)/n, ... by position. Re-rankers emit these so that the
/// written order stays consistent with the score column.
inline RankedList with_positional_scores(const std::vector<ItemId>& items) {
  RankedList out;
  out.reserve(items.size());
  const double n = static_cast<double>(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    out.push_back({items[k], (n - static_cast<double>(k)) / n});
  }
  return out;
}

/// First `n` entries of every list.
inline RankedBatch truncate(const RankedBatch& batch, std::size_t n) {
  if (n == 0 || n > batch.list_size()) {
    throw InvalidArgument("truncate: n=" + std::to_string(n) + " outside [1, " +
                          std::to_string(batch.list_size()) + "]");
  }
  RankedBatch out(n);
  for (const auto& [user, list] : batch.lists()) {
    const auto take = static_cast<std::ptrdiff_t>(std::min(n, list.size()));
    out.set_short(user, RankedList(list.begin(), list.begin() + take));
  }
  return out;
}

// ---------------------------------------------------------------------------

enum class Variant { item, supplier };

inline const char* to_string(Variant v) { return v == Variant::item ? "item" : "supplier"; }

struct ExperimentConfig {
  std::size_t t = 50;
  std::size_t n = 10;
  double lambda = 0.5;
  double beta = 1.0;
  Variant variant = Variant::item;
  std::uint64_t seed = 42;

  void validate() const {
    if (n == 0) throw InvalidArgument("n must be positive");
    if (t <= n) throw InvalidArgument("t must exceed n");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in [0, 1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in (0, 1]");
  }
};

}  // namespace fairflow

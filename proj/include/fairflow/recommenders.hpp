#pragma once

// Base recommenders that produce the long lists re-ranked downstream:
// user-based kNN, most-popular, and an importer for lists computed elsewhere.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fairflow/core.hpp"
#include "fairflow/ingestion.hpp"

namespace fairflow {

enum class Similarity { cosine, pearson };

inline Similarity parse_similarity(std::string_view name) {
  if (name == "cosine") return Similarity::cosine;
  if (name == "pearson") return Similarity::pearson;
  throw InvalidArgument("unknown similarity '" + std::string(name) + "'");
}

/// Denominator of the neighbourhood score. `neighborhood` divides by the
/// total |sim| of the user's neighbours (a per-user constant, so the ranking
/// is by similarity-weighted rating mass); `raters` divides only by the
/// neighbours that rated the item (a weighted average rating).
enum class ScoreNormalization { neighborhood, raters };

struct Neighbor {
  std::size_t user = 0;  // dense index in the training set
  double similarity = 0.0;
};

/// Per-user top-k neighbourhoods over the training set. Indices refer to
/// train.user_ids(); neighbourhoods never contain the user itself and only
/// hold positive similarities.
struct NeighborModel {
  std::size_t k = 0;
  Similarity similarity = Similarity::cosine;
  std::vector<std::vector<Neighbor>> neighbors;
};

namespace detail {

struct RatingRows {
  // per user: (item index, rating) sorted by item index
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> mean;
  std::vector<double> norm;
  // per item: (user index, rating)
  std::vector<std::vector<std::pair<std::size_t, double>>> raters;
};

inline RatingRows rating_rows(const InteractionDataset& train) {
  RatingRows r;
  r.rows.resize(train.num_users());
  r.mean.assign(train.num_users(), 0.0);
  r.norm.assign(train.num_users(), 0.0);
  r.raters.resize(train.num_items());
  for (std::size_t u = 0; u < train.num_users(); ++u) {
    for (auto k : train.profile(u)) {
      const auto& x = train.interactions()[k];
      const auto i = train.item_index(x.item);
      r.rows[u].emplace_back(i, x.value);
      r.raters[i].emplace_back(u, x.value);
      r.mean[u] += x.value;
      r.norm[u] += x.value * x.value;
    }
    std::sort(r.rows[u].begin(), r.rows[u].end());
    if (!r.rows[u].empty()) r.mean[u] /= static_cast<double>(r.rows[u].size());
    r.norm[u] = std::sqrt(r.norm[u]);
  }
  return r;
}

}  // namespace detail

/// Similarity of two users' rating rows (sorted by item index). Cosine uses
/// full-profile norms; Pearson centres each user on their own mean and sums
/// over co-rated items. Zero when nothing is co-rated.
inline double user_similarity(const std::vector<std::pair<std::size_t, double>>& a,
                              const std::vector<std::pair<std::size_t, double>>& b,
                              Similarity kind, double mean_a, double mean_b, double norm_a,
                              double norm_b) {
  double dot = 0.0, va = 0.0, vb = 0.0;
  bool any = false;
  auto ia = a.begin(), ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      any = true;
      if (kind == Similarity::cosine) {
        dot += ia->second * ib->second;
      } else {
        const double x = ia->second - mean_a, y = ib->second - mean_b;
        dot += x * y;
        va += x * x;
        vb += y * y;
      }
      ++ia;
      ++ib;
    }
  }
  if (!any) return 0.0;
  const double denom = kind == Similarity::cosine ? norm_a * norm_b : std::sqrt(va * vb);
  if (denom <= 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

inline NeighborModel train_user_knn(const InteractionDataset& train, std::size_t k,
                                    Similarity kind = Similarity::cosine) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (train.empty()) throw InvalidArgument("empty training set");
  const auto r = detail::rating_rows(train);
  const auto& ids = train.user_ids();

  NeighborModel model{k, kind, std::vector<std::vector<Neighbor>>(train.num_users())};
  std::vector<char> touched(train.num_users(), 0);
  std::vector<std::size_t> candidates;
  for (std::size_t u = 0; u < train.num_users(); ++u) {
    candidates.clear();
    for (const auto& [i, _] : r.rows[u]) {
      for (const auto& [v, __] : r.raters[i]) {
        if (v != u && !touched[v]) {
          touched[v] = 1;
          candidates.push_back(v);
        }
      }
    }
    auto& nb = model.neighbors[u];
    for (auto v : candidates) {
      touched[v] = 0;
      const double s =
          user_similarity(r.rows[u], r.rows[v], kind, r.mean[u], r.mean[v], r.norm[u], r.norm[v]);
      if (s > 0.0) nb.push_back({v, s});
    }
    auto better = [&](const Neighbor& a, const Neighbor& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return ids[a.user] < ids[b.user];
    };
    if (nb.size() > k) {
      std::partial_sort(nb.begin(), nb.begin() + static_cast<std::ptrdiff_t>(k), nb.end(), better);
      nb.resize(k);
    } else {
      std::sort(nb.begin(), nb.end(), better);
    }
  }
  return model;
}

/// Items ordered by training rating count (descending, ties by id).
inline std::vector<ItemId> popularity_order(const InteractionDataset& train) {
  const auto counts = train.item_counts();
  std::vector<std::size_t> idx(train.num_items());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto& ids = train.item_ids();
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return ids[a] < ids[b];
  });
  std::vector<ItemId> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ids[i]);
  return out;
}

namespace detail {

/// Appends popular unseen items until the list reaches `t`. Padding entries
/// score strictly below everything already in the list.
inline void pad_with_popular(RankedList& list, const std::vector<ItemId>& order,
                             const std::vector<std::size_t>& counts_in_order,
                             const std::unordered_set<ItemId>& exclude, std::size_t t,
                             double ceiling) {
  std::unordered_set<ItemId> present;
  for (const auto& e : list) present.insert(e.item);
  const double top = counts_in_order.empty() ? 1.0 : static_cast<double>(counts_in_order.front());
  for (std::size_t k = 0; k < order.size() && list.size() < t; ++k) {
    const auto& item = order[k];
    if (exclude.count(item) || present.count(item)) continue;
    // map counts into [ceiling - 1, ceiling) so padding never outranks a real score
    const double s = ceiling - 1.0 + static_cast<double>(counts_in_order[k]) / (top + 1.0);
    list.push_back({item, s});
  }
}

inline std::vector<std::size_t> counts_in(const InteractionDataset& train,
                                          const std::vector<ItemId>& order) {
  const auto counts = train.item_counts();
  std::vector<std::size_t> out;
  out.reserve(order.size());
  for (const auto& i : order) out.push_back(counts[train.item_index(i)]);
  return out;
}

inline void place(RankedBatch& batch, const UserId& user, RankedList list,
                  std::vector<UserId>* short_users) {
  if (list.size() == batch.list_size()) {
    batch.set(user, std::move(list));
  } else {
    batch.set_short(user, std::move(list));
    if (short_users) short_users->push_back(user);
  }
}

}  // namespace detail

/// Top-t unseen items by training popularity for every training user.
/// Users who have seen nearly the whole catalogue get shorter lists and are
/// reported through `short_users`.
inline RankedBatch most_popular(const InteractionDataset& train, std::size_t t,
                                std::vector<UserId>* short_users = nullptr) {
  if (t == 0) throw InvalidArgument("t must be positive");
  const auto order = popularity_order(train);
  const auto counts = detail::counts_in(train, order);
  RankedBatch batch(t);
  for (const auto& user : train.user_ids()) {
    const auto seen = train.items_of(user);
    std::unordered_set<ItemId> exclude(seen.begin(), seen.end());
    RankedList list;
    detail::pad_with_popular(list, order, counts, exclude, t, 1.0);
    detail::place(batch, user, std::move(list), short_users);
  }
  return batch;
}

struct KnnOptions {
  ScoreNormalization normalization = ScoreNormalization::neighborhood;
};

/// Neighbourhood scores sum_v sim(u,v) r(v,i) / Z over unseen items, top t by
/// score with ties by item id; lists are padded from the popularity order.
inline RankedBatch recommend_top_t(const NeighborModel& model, const InteractionDataset& train,
                                   std::size_t t, const KnnOptions& opt = {},
                                   std::vector<UserId>* short_users = nullptr) {
  if (t == 0) throw InvalidArgument("t must be positive");
  if (model.neighbors.size() != train.num_users()) {
    throw InvalidArgument("neighbour model was trained on a different dataset");
  }
  const auto r = detail::rating_rows(train);
  const auto order = popularity_order(train);
  const auto counts = detail::counts_in(train, order);
  const auto& item_ids = train.item_ids();

  RankedBatch batch(t);
  std::vector<double> num(train.num_items(), 0.0), den(train.num_items(), 0.0);
  std::vector<char> seen(train.num_items(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t u = 0; u < train.num_users(); ++u) {
    for (const auto& [i, _] : r.rows[u]) seen[i] = 1;
    double total = 0.0;
    for (const auto& nb : model.neighbors[u]) {
      total += std::abs(nb.similarity);
      for (const auto& [i, rating] : r.rows[nb.user]) {
        if (seen[i]) continue;
        if (num[i] == 0.0 && den[i] == 0.0) touched.push_back(i);
        num[i] += nb.similarity * rating;
        den[i] += std::abs(nb.similarity);
      }
    }
    RankedList scored;
    scored.reserve(touched.size());
    for (auto i : touched) {
      const double z = opt.normalization == ScoreNormalization::raters ? den[i] : total;
      if (num[i] > 0.0 && z > 0.0) scored.push_back({item_ids[i], num[i] / z});
      num[i] = den[i] = 0.0;
    }
    touched.clear();
    if (scored.size() > t) {
      std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(t),
                        scored.end(), ranks_before);
      scored.resize(t);
    } else {
      std::sort(scored.begin(), scored.end(), ranks_before);
    }
    if (scored.size() < t) {
      const double ceiling = scored.empty() ? 1.0 : std::min(scored.back().score, 1.0);
      std::unordered_set<ItemId> exclude;
      for (const auto& [i, _] : r.rows[u]) exclude.insert(item_ids[i]);
      detail::pad_with_popular(scored, order, counts, exclude, t, ceiling);
    }
    for (const auto& [i, _] : r.rows[u]) seen[i] = 0;
    detail::place(batch, train.user_ids()[u], std::move(scored), short_users);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Ranked-batch file: userId \t itemId \t score \t rank, ranks ascending per user.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline void write_ranked_batch(std::ostream& out, const RankedBatch& batch) {
  std::string buf;
  for (const auto& [user, list] : batch.lists()) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      buf += user;
      buf += '\t';
      buf += list[k].item;
      buf += '\t';
      buf += detail::format_double(list[k].score);
      buf += '\t';
      buf += std::to_string(k + 1);
      buf += '\n';
    }
  }
  out << buf;
}

/// Reads a ranked-batch file. Every user must carry ranks 1..t exactly once
/// and scores must not increase with rank.
inline RankedBatch import_ranked_batch(std::istream& in, std::size_t t,
                                       const std::string& source = "<stream>") {
  if (t == 0) throw InvalidArgument("t must be positive");
  struct Row {
    long long rank;
    ScoredItem entry;
    std::size_t line;
  };
  std::map<UserId, std::vector<Row>> rows;
  detail::for_each_record(in, "\t", [&](const auto& f, std::size_t line) {
    if (f.size() != 4) throw ParseError(source, line, "expected userId, itemId, score, rank");
    auto score = detail::parse_double(f[2]);
    auto rank = detail::parse_int(f[3]);
    if (!score) throw ParseError(source, line, "bad score '" + std::string(f[2]) + "'");
    if (!rank) throw ParseError(source, line, "bad rank '" + std::string(f[3]) + "'");
    rows[std::string(f[0])].push_back({*rank, {std::string(f[1]), *score}, line});
  });
  if (rows.empty()) throw DataError(source + ": empty input");

  RankedBatch batch(t);
  for (auto& [user, entries] : rows) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    RankedList list;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto expected = static_cast<long long>(k + 1);
      if (entries[k].rank != expected) {
        throw ParseError(source, entries[k].line,
                         "user '" + user + "': expected rank " + std::to_string(expected) +
                             ", found " + std::to_string(entries[k].rank));
      }
      if (k > 0 && entries[k].entry.score > entries[k - 1].entry.score) {
        throw DataError(source + ":" + std::to_string(entries[k].line) + ": user '" + user +
                        "': score increases from rank " + std::to_string(k) + " to " +
                        std::to_string(k + 1));
      }
      list.push_back(entries[k].entry);
    }
    if (list.size() != t) {
      throw DataError(source + ": user '" + user + "' has " + std::to_string(list.size()) +
                      " ranks, expected " + std::to_string(t));
    }
    batch.set(user, std::move(list));
  }
  return batch;
}

inline RankedBatch import_ranked_batch(const std::string& path, std::size_t t) {
  auto in = detail::open_input(path);
  return import_ranked_batch(in, t, path);
}

}  // namespace fairflow

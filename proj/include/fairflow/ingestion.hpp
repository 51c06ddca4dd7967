#pragma once

// Rating and supplier files, preprocessing filters, per-user train/test split.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fairflow/core.hpp"
#include "fairflow/random.hpp"

namespace fairflow {

enum class Dialect { tsv, csv, dat };

inline Dialect parse_dialect(std::string_view name) {
  if (name == "tsv") return Dialect::tsv;
  if (name == "csv") return Dialect::csv;
  if (name == "dat") return Dialect::dat;
  throw InvalidArgument("unknown file format '" + std::string(name) + "' (expected tsv, csv or dat)");
}

namespace detail {

inline std::string_view delimiter(Dialect d) {
  switch (d) {
    case Dialect::tsv: return "\t";
    case Dialect::csv: return ",";
    case Dialect::dat: return "::";
  }
  return "\t";
}

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

/// Calls `row(fields, line_no)` for every non-blank, non-comment line.
template <typename Fn>
std::size_t for_each_record(std::istream& in, std::string_view delim, Fn&& row) {
  std::string line;
  std::size_t line_no = 0, records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = split_fields(view, delim);
    for (auto& f : fields) f = trim(f);
    row(fields, line_no);
    ++records;
  }
  return records;
}

}  // namespace detail

/// Reads userId, itemId, value[, timestamp] rows. Duplicate pairs keep the
/// last value.
inline InteractionDataset parse_ratings(std::istream& in, Dialect dialect,
                                        const std::string& source = "<stream>") {
  std::vector<Interaction> rows;
  auto records = detail::for_each_record(
      in, detail::delimiter(dialect), [&](const auto& f, std::size_t line) {
        if (f.size() < 3 || f.size() > 4) {
          throw ParseError(source, line, "expected 3 or 4 fields, got " + std::to_string(f.size()));
        }
        if (f[0].empty() || f[1].empty()) throw ParseError(source, line, "empty user or item id");
        auto value = detail::parse_double(f[2]);
        if (!value) throw ParseError(source, line, "bad value '" + std::string(f[2]) + "'");
        if (*value < 0.0) throw ParseError(source, line, "negative value");
        rows.push_back({std::string(f[0]), std::string(f[1]), *value});
      });
  if (records == 0) throw DataError(source + ": empty input");
  return InteractionDataset(std::move(rows));
}

inline InteractionDataset parse_ratings(const std::string& path, Dialect dialect) {
  auto in = detail::open_input(path);
  return parse_ratings(in, dialect, path);
}

inline void write_ratings(std::ostream& out, const InteractionDataset& ds, Dialect dialect) {
  const auto delim = detail::delimiter(dialect);
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& r : ds.interactions()) {
    buf << r.user << delim << r.item << delim << r.value << '\n';
  }
  out << buf.str();
}

// ---------------------------------------------------------------------------

/// Maps per-user interaction counts onto integer ratings 1..levels using the
/// user's empirical CDF: rating(c) = ceil(levels * |{c' <= c}| / m). With the
/// default five levels this is a per-user quintile mapping; a user whose
/// counts are all equal gets the top rating everywhere.
inline InteractionDataset interactions_to_ratings(const InteractionDataset& raw, int levels = 5) {
  if (levels < 1) throw InvalidArgument("rating levels must be positive");
  std::vector<Interaction> out = raw.interactions();
  for (std::size_t u = 0; u < raw.num_users(); ++u) {
    const auto& prof = raw.profile(u);
    std::vector<double> counts;
    counts.reserve(prof.size());
    for (auto k : prof) {
      double c = raw.interactions()[k].value;
      if (!(c > 0.0)) {
        throw DataError("non-positive interaction count for user '" + raw.user_ids()[u] + "'");
      }
      counts.push_back(c);
    }
    std::sort(counts.begin(), counts.end());
    const auto m = static_cast<long long>(counts.size());
    for (auto k : prof) {
      auto le = static_cast<long long>(
          std::upper_bound(counts.begin(), counts.end(), raw.interactions()[k].value) -
          counts.begin());
      out[k].value = static_cast<double>((levels * le + m - 1) / m);
    }
  }
  return InteractionDataset(std::move(out));
}

// ---------------------------------------------------------------------------

struct CoreFilterOptions {
  std::size_t min_user_ratings = 0;
  std::size_t min_item_ratings = 0;
  std::optional<std::size_t> sample_users;
  std::uint64_t seed = 42;
  /// Repeat the user/item passes until neither removes anything.
  bool iterate = false;
};

namespace detail {

inline InteractionDataset keep_rows(const InteractionDataset& ds, const auto& keep) {
  std::vector<Interaction> rows;
  rows.reserve(ds.size());
  for (const auto& r : ds.interactions()) {
    if (keep(r)) rows.push_back(r);
  }
  return InteractionDataset(std::move(rows));
}

}  // namespace detail

/// One user pass then one item pass, optionally repeated to a fixed point,
/// then a uniform sample of the surviving users.
inline InteractionDataset apply_core_filter(const InteractionDataset& ds,
                                            const CoreFilterOptions& opt) {
  InteractionDataset cur = ds;
  while (true) {
    const std::size_t before = cur.size();
    std::vector<std::size_t> per_user(cur.num_users(), 0);
    for (const auto& r : cur.interactions()) ++per_user[cur.user_index(r.user)];
    cur = detail::keep_rows(cur, [&](const Interaction& r) {
      return per_user[cur.user_index(r.user)] >= opt.min_user_ratings;
    });
    auto per_item = cur.item_counts();
    cur = detail::keep_rows(cur, [&](const Interaction& r) {
      return per_item[cur.item_index(r.item)] >= opt.min_item_ratings;
    });
    if (!opt.iterate || cur.size() == before) break;
  }

  if (opt.sample_users) {
    std::vector<UserId> users = cur.user_ids();
    if (*opt.sample_users > users.size()) {
      throw InvalidArgument("cannot sample " + std::to_string(*opt.sample_users) + " users, only " +
                            std::to_string(users.size()) + " survive filtering");
    }
    std::sort(users.begin(), users.end());
    Rng rng(opt.seed);
    fairflow::shuffle(users.begin(), users.end(), rng);
    std::unordered_set<UserId> chosen(users.begin(),
                                      users.begin() + static_cast<std::ptrdiff_t>(*opt.sample_users));
    cur = detail::keep_rows(cur, [&](const Interaction& r) { return chosen.count(r.user) != 0; });
  }
  return cur;
}

// ---------------------------------------------------------------------------

struct TrainTestSplit {
  InteractionDataset train;
  InteractionDataset test;
  /// Users with fewer than two interactions, placed entirely in train.
  std::vector<UserId> train_only_users;
};

/// Per-user split: floor(fraction * |profile|) interactions go to train.
inline TrainTestSplit split_train_test(const InteractionDataset& ds, double train_fraction,
                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  std::vector<bool> to_train(ds.size(), false);
  TrainTestSplit out;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    std::vector<std::size_t> prof = ds.profile(u);
    if (prof.size() < 2) {
      for (auto k : prof) to_train[k] = true;
      out.train_only_users.push_back(ds.user_ids()[u]);
      continue;
    }
    Rng rng(derive_seed(seed, ds.user_ids()[u]));
    fairflow::shuffle(prof.begin(), prof.end(), rng);
    const auto keep = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(prof.size()) + 1e-9));
    for (std::size_t j = 0; j < keep; ++j) to_train[prof[j]] = true;
  }
  std::vector<Interaction> train, test;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    (to_train[k] ? train : test).push_back(ds.interactions()[k]);
  }
  out.train = InteractionDataset(std::move(train));
  out.test = InteractionDataset(std::move(test));
  return out;
}

// ---------------------------------------------------------------------------

/// Reads itemId, supplierId rows. An item listed with two different
/// suppliers is a conflict.
inline SupplierCatalog parse_supplier_map(std::istream& in, Dialect dialect,
                                          const std::string& source = "<stream>") {
  SupplierCatalog catalog;
  auto records = detail::for_each_record(
      in, detail::delimiter(dialect), [&](const auto& f, std::size_t line) {
        if (f.size() != 2 || f[0].empty() || f[1].empty()) {
          throw ParseError(source, line, "expected itemId and supplierId");
        }
        try {
          catalog.add(std::string(f[0]), std::string(f[1]));
        } catch (const DataError& e) {
          throw ParseError(source, line, e.what());
        }
      });
  if (records == 0) throw DataError(source + ": empty input");
  return catalog;
}

inline SupplierCatalog parse_supplier_map(const std::string& path, Dialect dialect = Dialect::tsv) {
  auto in = detail::open_input(path);
  return parse_supplier_map(in, dialect, path);
}

/// The catalog restricted to the dataset's items; throws if any dataset item
/// has no supplier, naming the offenders.
inline SupplierCatalog catalog_for(const InteractionDataset& ds, const SupplierCatalog& full) {
  SupplierCatalog out;
  std::vector<ItemId> missing;
  for (const auto& item : ds.item_ids()) {
    if (full.contains(item)) {
      out.add(item, full.supplier_of(item));
    } else {
      missing.push_back(item);
    }
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = std::to_string(missing.size()) + " item(s) without supplier:";
    for (std::size_t k = 0; k < missing.size() && k < 10; ++k) msg += " " + missing[k];
    if (missing.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  return out;
}

inline void write_supplier_map(std::ostream& out, const SupplierCatalog& catalog,
                               Dialect dialect = Dialect::tsv) {
  const auto delim = detail::delimiter(dialect);
  for (const auto& [item, supplier] : catalog.item_to_supplier()) {
    out << item << delim << supplier << '\n';
  }
}

}  // namespace fairflow

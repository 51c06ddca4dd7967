#pragma once

// Command-line pipeline: ingest -> recommend -> rerank -> evaluate, plus a
// lambda/beta sweep and a synthetic-corpus generator.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fairflow/baselines.hpp"
#include "fairflow/core.hpp"
#include "fairflow/fairmatch.hpp"
#include "fairflow/ingestion.hpp"
#include "fairflow/metrics.hpp"
#include "fairflow/recommenders.hpp"
#include "fairflow/report.hpp"
#include "fairflow/synthetic.hpp"

namespace fairflow::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

namespace fs = std::filesystem;

namespace detail {

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

inline std::string ranked_batch_text(const RankedBatch& batch, const std::string& header) {
  std::ostringstream out;
  out << "# " << header << '\n';
  write_ranked_batch(out, batch);
  return out.str();
}

inline std::string trim_copy(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim_copy(tok);
    if (tok.empty()) continue;
    auto v = fairflow::detail::parse_double(tok);
    if (!v) throw InvalidArgument("bad grid value '" + tok + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw InvalidArgument("empty grid");
  return out;
}

inline std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

/// Options without a value; a config entry "name=true" turns them on.
inline const std::set<std::string>& boolean_flags() {
  static const std::set<std::string> flags{"groups", "iterate-filter", "interactions"};
  return flags;
}

/// Merges key=value lines from --config into the argument list. Explicit
/// command-line flags win; config entries only fill flags that are absent.
inline std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[k + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k),
                 args.begin() + static_cast<std::ptrdiff_t>(k + 2));
      break;
    }
    if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    }
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) throw ConfigError("cannot open config '" + *path + "'");
  auto present = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_copy(line);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(*path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim_copy(line.substr(0, eq));
    std::string value = trim_copy(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    const std::string flag = "--" + key;
    if (present(flag)) continue;
    if (boolean_flags().count(key)) {
      if (value == "true" || value == "1") args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

inline SupplierCatalog load_catalog_for(const std::string& path, const InteractionDataset& ds,
                                        Dialect dialect) {
  return catalog_for(ds, parse_supplier_map(path, dialect));
}

enum class RerankVariant { none, item, supplier, random, reverse };

inline RerankVariant parse_variant(const std::string& v) {
  if (v == "none") return RerankVariant::none;
  if (v == "item") return RerankVariant::item;
  if (v == "supplier") return RerankVariant::supplier;
  if (v == "random") return RerankVariant::random;
  if (v == "reverse") return RerankVariant::reverse;
  throw InvalidArgument("unknown variant '" + v + "'");
}

struct RerankOutput {
  RankedBatch batch;
  std::optional<std::vector<IterationStats>> stats;
};

inline RerankOutput rerank(const RankedBatch& long_lists, RerankVariant variant,
                           const SupplierCatalog* catalog, const ExperimentConfig& cfg) {
  switch (variant) {
    case RerankVariant::none: return {truncate(long_lists, cfg.n), std::nullopt};
    case RerankVariant::random: return {random_rerank(long_lists, cfg.n, cfg.seed), std::nullopt};
    case RerankVariant::reverse: return {reverse_rerank(long_lists, cfg.n), std::nullopt};
    case RerankVariant::item:
    case RerankVariant::supplier: {
      auto c = cfg;
      c.variant = variant == RerankVariant::item ? Variant::item : Variant::supplier;
      auto r = run_fair_match(long_lists, catalog, c);
      return {std::move(r.final_batch), std::move(r.per_iteration)};
    }
  }
  throw LogicError("unhandled variant");
}

/// Catalogue for evaluation: the supplier map if given, otherwise every
/// training item as its own supplier (supplier metrics are then undefined).
inline std::pair<SupplierCatalog, bool> evaluation_catalog(const std::string& suppliers,
                                                           const InteractionDataset& train,
                                                           Dialect dialect) {
  if (suppliers.empty()) return {SupplierCatalog::identity(train.item_ids()), false};
  return {load_catalog_for(suppliers, train, dialect), true};
}

/// Every user with test interactions must have a list.
inline void check_users(const RankedBatch& batch, const InteractionDataset& test) {
  std::vector<UserId> missing;
  for (const auto& u : test.user_ids()) {
    if (!batch.has_user(u)) missing.push_back(u);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw DataError(std::to_string(missing.size()) + " test user(s) have no recommendation list, e.g. '" +
                    missing.front() + "'");
  }
}

}  // namespace detail

/// Runs one CLI invocation; args excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"fairflow: exposure-fair re-ranking of recommendation lists", "fairflow"};
  app.require_subcommand(1);

  std::string format = "tsv";
  std::uint64_t seed = 42;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse, filter and split a rating file");
  std::string ratings, suppliers, out_dir = ".";
  std::size_t min_user = 0, min_item = 0;
  std::optional<std::size_t> sample_users;
  double train_fraction = 0.8;
  bool iterate_filter = false, interactions = false;
  ingest->add_option("--ratings", ratings, "rating or interaction file")->required();
  ingest->add_option("--suppliers", suppliers, "itemId/supplierId map");
  ingest->add_option("--format", format, "tsv, csv or dat");
  ingest->add_option("--min-user", min_user, "drop users with fewer ratings");
  ingest->add_option("--min-item", min_item, "drop items with fewer ratings");
  ingest->add_option("--sample-users", sample_users, "keep a random sample of users");
  ingest->add_flag("--iterate-filter", iterate_filter, "repeat filtering to a fixed point");
  ingest->add_flag("--interactions", interactions, "values are counts; map them to 1..5");
  ingest->add_option("--train-fraction", train_fraction, "per-user train share");
  ingest->add_option("--seed", seed);
  ingest->add_option("--out", out_dir, "output directory");

  // recommend
  auto* recommend = app.add_subcommand("recommend", "produce long lists of size t");
  std::string algo = "userknn", train_path = "train.tsv", import_file, similarity = "cosine",
              output = "long.tsv", normalization = "neighborhood";
  std::size_t k = 50, t = 50, n = 10;
  recommend->add_option("--algo", algo, "userknn, mostpop or import");
  recommend->add_option("--ratings,--train", train_path, "training split");
  recommend->add_option("--k", k, "neighbourhood size");
  recommend->add_option("--similarity", similarity, "cosine or pearson");
  recommend->add_option("--normalization", normalization, "neighborhood or raters");
  recommend->add_option("--t", t, "long list size");
  recommend->add_option("--file", import_file, "ranked-batch file for --algo import");
  recommend->add_option("--seed", seed);
  recommend->add_option("--out", output, "long-list file");

  // rerank
  auto* rr = app.add_subcommand("rerank", "re-rank long lists into size-n lists");
  std::string input = "long.tsv", variant = "item", stats_path;
  double lambda = 0.5, beta = 1.0;
  std::string rr_out = "final.tsv";
  rr->add_option("--ratings,--input", input, "long-list file");
  rr->add_option("--suppliers", suppliers, "itemId/supplierId map");
  rr->add_option("--format", format, "supplier map dialect");
  rr->add_option("--variant", variant, "item, supplier, random, reverse or none");
  rr->add_option("--t", t);
  rr->add_option("--n", n);
  rr->add_option("--lambda", lambda);
  rr->add_option("--beta", beta);
  rr->add_option("--seed", seed);
  rr->add_option("--stats", stats_path, "round statistics JSON (default <out>.stats.json)");
  rr->add_option("--out", rr_out, "final-list file");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "metric panel for a final-list file");
  std::string test_path = "test.tsv", long_path, mcnemar_path, ev_out = "report";
  bool groups = false;
  ev->add_option("--ratings,--input", input, "final-list file")->required();
  ev->add_option("--train", train_path);
  ev->add_option("--test", test_path);
  ev->add_option("--suppliers", suppliers);
  ev->add_option("--format", format, "supplier map dialect");
  ev->add_option("--n", n);
  ev->add_option("--t", t);
  ev->add_option("--long", long_path, "long lists (needed for --groups)");
  ev->add_flag("--groups", groups, "emit the ten-group visibility shift table");
  ev->add_option("--mcnemar", mcnemar_path, "second final-list file to test against");
  ev->add_option("--seed", seed);
  ev->add_option("--out", ev_out, "output prefix (.json, .csv, .groups.csv)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "lambda/beta/variant grid of rerank + evaluate");
  std::string lambdas = "0,0.25,0.5,0.75,1", betas, variants = "item,supplier", sw_out = "sweep.csv";
  sw->add_option("--ratings,--input", input, "long-list file");
  sw->add_option("--train", train_path);
  sw->add_option("--test", test_path);
  sw->add_option("--suppliers", suppliers);
  sw->add_option("--format", format, "supplier map dialect");
  sw->add_option("--t", t);
  sw->add_option("--n", n);
  sw->add_option("--lambda", lambdas, "comma-separated lambda grid");
  sw->add_option("--beta", betas, "comma-separated beta grid (default 1)");
  sw->add_option("--variant", variants, "comma-separated variants");
  sw->add_option("--seed", seed);
  sw->add_option("--out", sw_out, "tidy CSV");

  // synth
  auto* sy = app.add_subcommand("synth", "write a popularity-skewed synthetic corpus");
  SyntheticOptions syn;
  std::string sy_out = ".";
  sy->add_option("--users", syn.users);
  sy->add_option("--items", syn.items);
  sy->add_option("--suppliers", syn.suppliers);
  sy->add_option("--zipf", syn.zipf_exponent);
  sy->add_option("--seed", seed);
  sy->add_option("--out", sy_out, "output directory");

  try {
    args = detail::apply_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    const Dialect dialect = parse_dialect(format);

    if (ingest->parsed()) {
      auto ds = parse_ratings(ratings, dialect);
      if (interactions) ds = interactions_to_ratings(ds);
      ds = apply_core_filter(ds, {min_user, min_item, sample_users, seed, iterate_filter});
      std::optional<SupplierCatalog> catalog;
      if (!suppliers.empty()) catalog = detail::load_catalog_for(suppliers, ds, dialect);
      auto split = split_train_test(ds, train_fraction, seed);
      for (const auto& u : split.train_only_users) {
        err << "warning: user '" << u << "' has fewer than 2 ratings; kept in train only\n";
      }
      const fs::path dir(out_dir);
      std::ostringstream tr, te;
      write_ratings(tr, split.train, Dialect::tsv);
      write_ratings(te, split.test, Dialect::tsv);
      detail::write_file(dir / "train.tsv", tr.str());
      detail::write_file(dir / "test.tsv", te.str());
      nlohmann::json stats{{"users", ds.num_users()},
                           {"items", ds.num_items()},
                           {"ratings", ds.size()},
                           {"density", ds.num_users() && ds.num_items()
                                           ? static_cast<double>(ds.size()) /
                                                 (static_cast<double>(ds.num_users()) *
                                                  static_cast<double>(ds.num_items()))
                                           : 0.0},
                           {"train_ratings", split.train.size()},
                           {"test_ratings", split.test.size()},
                           {"train_only_users", split.train_only_users.size()},
                           {"seed", seed}};
      stats["suppliers"] = nullptr;
      if (catalog) {
        std::ostringstream sm;
        write_supplier_map(sm, *catalog);
        detail::write_file(dir / "suppliers.tsv", sm.str());
        stats["suppliers"] = catalog->num_suppliers();
      }
      detail::write_file(dir / "stats.json", stats.dump(2) + "\n");
      out << stats.dump() << '\n';
      return kOk;
    }

    if (recommend->parsed()) {
      RankedBatch batch;
      std::vector<UserId> short_users;
      if (algo == "import") {
        if (import_file.empty()) throw InvalidArgument("--algo import needs --file");
        batch = import_ranked_batch(import_file, t);
      } else {
        const auto train = parse_ratings(train_path, Dialect::tsv);
        if (algo == "userknn") {
          KnnOptions opt;
          if (normalization == "raters") {
            opt.normalization = ScoreNormalization::raters;
          } else if (normalization != "neighborhood") {
            throw InvalidArgument("unknown normalization '" + normalization + "'");
          }
          const auto model = train_user_knn(train, k, parse_similarity(similarity));
          batch = recommend_top_t(model, train, t, opt, &short_users);
        } else if (algo == "mostpop") {
          batch = most_popular(train, t, &short_users);
        } else {
          throw InvalidArgument("unknown recommender '" + algo + "'");
        }
      }
      for (const auto& u : short_users) {
        err << "warning: only " << batch.list(u).size() << " unseen items for user '" << u << "'\n";
      }
      std::ostringstream header;
      header << "fairflow recommend algo=" << algo << " t=" << t;
      if (algo == "userknn") header << " k=" << k << " similarity=" << similarity;
      detail::write_file(output, detail::ranked_batch_text(batch, header.str()));
      out << "wrote " << batch.num_users() << " lists of size " << t << " to " << output << '\n';
      return kOk;
    }

    if (rr->parsed()) {
      const auto v = detail::parse_variant(variant);
      if (v == detail::RerankVariant::supplier && suppliers.empty()) {
        throw ConfigError("the supplier variant needs --suppliers");
      }
      ExperimentConfig cfg{t, n, lambda, beta, Variant::item, seed};
      cfg.validate();
      const auto long_lists = import_ranked_batch(input, t);
      std::optional<SupplierCatalog> catalog;
      if (!suppliers.empty()) catalog = parse_supplier_map(suppliers, dialect);
      auto result = detail::rerank(long_lists, v, catalog ? &*catalog : nullptr, cfg);
      std::ostringstream header;
      header << "fairflow rerank variant=" << variant << " t=" << t << " n=" << n
             << " lambda=" << lambda << " beta=" << beta << " seed=" << seed;
      detail::write_file(rr_out, detail::ranked_batch_text(result.batch, header.str()));
      if (result.stats) {
        const std::string path = stats_path.empty() ? rr_out + ".stats.json" : stats_path;
        detail::write_file(path, to_json(*result.stats).dump(2) + "\n");
      }
      out << "wrote " << result.batch.num_users() << " lists of size " << n << " to " << rr_out
          << '\n';
      return kOk;
    }

    if (ev->parsed()) {
      const auto batch = import_ranked_batch(input, n);
      const auto train = parse_ratings(train_path, Dialect::tsv);
      const auto test = parse_ratings(test_path, Dialect::tsv);
      detail::check_users(batch, test);
      const auto [catalog, has_suppliers] = detail::evaluation_catalog(suppliers, train, dialect);
      ReportOptions opt;
      opt.has_suppliers = has_suppliers;
      std::optional<RankedBatch> long_lists, base;
      if (groups) {
        if (long_path.empty()) throw InvalidArgument("--groups needs --long");
        long_lists = import_ranked_batch(long_path, t);
        base = truncate(*long_lists, n);
        opt.long_lists = &*long_lists;
        opt.base_top_n = &*base;
      }
      const auto report = evaluate(batch, train, test, catalog, opt);
      auto j = to_json(report);
      j["seed"] = seed;
      j["n"] = n;
      if (!mcnemar_path.empty()) {
        const auto other = import_ranked_batch(mcnemar_path, n);
        j["mcnemar"] = to_json(mcnemar(batch, other, test));
      }
      detail::write_file(ev_out + ".json", j.dump(2) + "\n");
      detail::write_file(ev_out + ".csv", metric_csv_header() + "\n" + metric_csv_row(report) + "\n");
      if (groups) {
        std::ostringstream g;
        write_group_table(g, report);
        detail::write_file(ev_out + ".groups.csv", g.str());
      }
      out << metric_csv_header() << '\n' << metric_csv_row(report) << '\n';
      return kOk;
    }

    if (sw->parsed()) {
      const auto lambda_grid = detail::parse_grid(lambdas);
      const auto beta_grid = betas.empty() ? std::vector<double>{1.0} : detail::parse_grid(betas);
      std::vector<detail::RerankVariant> variant_grid;
      std::vector<std::string> variant_names;
      {
        std::stringstream ss(variants);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          tok = detail::trim_copy(tok);
          if (tok.empty()) continue;
          variant_grid.push_back(detail::parse_variant(tok));
          variant_names.push_back(tok);
        }
      }
      const bool needs_catalog = std::find(variant_grid.begin(), variant_grid.end(),
                                           detail::RerankVariant::supplier) != variant_grid.end();
      if (needs_catalog && suppliers.empty()) throw ConfigError("the supplier variant needs --suppliers");

      const auto long_lists = import_ranked_batch(input, t);
      const auto train = parse_ratings(train_path, Dialect::tsv);
      const auto test = parse_ratings(test_path, Dialect::tsv);
      detail::check_users(long_lists, test);
      const auto [catalog, has_suppliers] = detail::evaluation_catalog(suppliers, train, dialect);
      const auto base = truncate(long_lists, n);

      struct Cell {
        std::string variant_name;
        detail::RerankVariant variant;
        double lambda, beta;
        std::optional<MetricReport> report;
        std::string error;
      };
      std::vector<Cell> cells;
      for (std::size_t vi = 0; vi < variant_grid.size(); ++vi) {
        for (double l : lambda_grid) {
          for (double b : beta_grid) cells.push_back({variant_names[vi], variant_grid[vi], l, b, {}, {}});
        }
      }

      std::size_t workers = std::max(1U, std::thread::hardware_concurrency());
      if (const char* env = std::getenv("FAIRFLOW_WORKERS")) {
        auto w = fairflow::detail::parse_int(env);
        if (!w || *w < 1) throw ConfigError("FAIRFLOW_WORKERS must be a positive integer");
        workers = static_cast<std::size_t>(*w);
      }
      workers = std::min(workers, cells.size());
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t c = next++; c < cells.size(); c = next++) {
          auto& cell = cells[c];
          try {
            ExperimentConfig cfg{t, n, cell.lambda, cell.beta, Variant::item, seed};
            cfg.validate();
            auto result = detail::rerank(long_lists, cell.variant, &catalog, cfg);
            ReportOptions opt;
            opt.has_suppliers = has_suppliers;
            cell.report = evaluate(result.batch, train, test, catalog, opt);
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
        }
      };
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& th : pool) th.join();

      std::ostringstream csv;
      csv << "variant,lambda,beta,seed," << metric_csv_header() << ",error\n";
      {
        ReportOptions opt;
        opt.has_suppliers = has_suppliers;
        csv << "base,,,"  << seed << ',' << metric_csv_row(evaluate(base, train, test, catalog, opt))
            << ",\n";
      }
      bool failed = false;
      for (const auto& cell : cells) {
        csv << cell.variant_name << ',' << detail::fmt(cell.lambda) << ',' << detail::fmt(cell.beta)
            << ',' << seed << ',';
        if (cell.report) {
          csv << metric_csv_row(*cell.report) << ",\n";
        } else {
          failed = true;
          std::string msg = cell.error;
          std::replace(msg.begin(), msg.end(), ',', ';');
          std::replace(msg.begin(), msg.end(), '\n', ' ');
          csv << std::string(metric_csv_columns().size() - 1, ',') << ',' << msg << '\n';
          err << "cell " << cell.variant_name << " lambda=" << cell.lambda << " beta=" << cell.beta
              << " failed: " << cell.error << '\n';
        }
      }
      detail::write_file(sw_out, csv.str());
      out << "wrote " << cells.size() << " cells to " << sw_out << '\n';
      return failed ? kData : kOk;
    }

    if (sy->parsed()) {
      syn.seed = seed;
      const auto corpus = make_synthetic_corpus(syn);
      std::ostringstream r, s;
      write_ratings(r, corpus.ratings, Dialect::tsv);
      write_supplier_map(s, corpus.catalog);
      const fs::path dir(sy_out);
      detail::write_file(dir / "ratings.tsv", r.str());
      detail::write_file(dir / "suppliers.tsv", s.str());
      out << "wrote " << corpus.ratings.size() << " ratings to " << (dir / "ratings.tsv").string()
          << '\n';
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace fairflow::cli

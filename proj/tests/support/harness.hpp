#pragma once

// The synthetic experiment used by the statistical checks: a skewed corpus,
// an 80/20 split and UserKNN long lists.

#include <cstdint>

#include "fairflow/baselines.hpp"
#include "fairflow/fairmatch.hpp"
#include "fairflow/ingestion.hpp"
#include "fairflow/metrics.hpp"
#include "fairflow/recommenders.hpp"
#include "fairflow/synthetic.hpp"

namespace testing_support {

struct HarnessRun {
  fairflow::InteractionDataset train;
  fairflow::InteractionDataset test;
  fairflow::SupplierCatalog catalog;
  fairflow::RankedBatch long_lists;
  fairflow::RankedBatch base;
};

struct HarnessOptions {
  std::size_t users = 500;
  std::size_t items = 300;
  std::size_t suppliers = 100;
  double zipf = 1.0;
  std::size_t k = 50;
  std::size_t t = 50;
  std::size_t n = 10;
};

inline HarnessRun harness_run(std::uint64_t seed, const HarnessOptions& opt = {}) {
  fairflow::SyntheticOptions so;
  so.users = opt.users;
  so.items = opt.items;
  so.suppliers = opt.suppliers;
  so.zipf_exponent = opt.zipf;
  so.seed = seed;
  auto corpus = fairflow::make_synthetic_corpus(so);
  auto split = fairflow::split_train_test(corpus.ratings, 0.8, seed);
  HarnessRun run{std::move(split.train), std::move(split.test), {}, fairflow::RankedBatch(opt.t),
                 fairflow::RankedBatch(opt.n)};
  run.catalog = fairflow::catalog_for(run.train, corpus.catalog);
  const auto model = fairflow::train_user_knn(run.train, opt.k);
  run.long_lists = fairflow::recommend_top_t(model, run.train, opt.t);
  run.base = fairflow::truncate(run.long_lists, opt.n);
  return run;
}

inline fairflow::MetricReport harness_metrics(const HarnessRun& run, const fairflow::RankedBatch& batch) {
  fairflow::ReportOptions opt;
  opt.max_alpha = 5;
  return fairflow::evaluate(batch, run.train, run.test, run.catalog, opt);
}

inline fairflow::RankedBatch harness_fair_match(const HarnessRun& run, double lambda,
                                                fairflow::Variant variant, double beta = 1.0) {
  fairflow::ExperimentConfig cfg;
  cfg.t = run.long_lists.list_size();
  cfg.n = run.base.list_size();
  cfg.lambda = lambda;
  cfg.beta = beta;
  cfg.variant = variant;
  return fairflow::run_fair_match(run.long_lists, &run.catalog, cfg).final_batch;
}

}  // namespace testing_support

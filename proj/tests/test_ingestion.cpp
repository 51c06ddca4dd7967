#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "fairflow/ingestion.hpp"
#include "fairflow/random.hpp"

namespace fairflow {
namespace {

InteractionDataset parse(const std::string& text, Dialect d = Dialect::tsv) {
  std::istringstream in(text);
  return parse_ratings(in, d);
}

InteractionDataset random_dataset(Rng& rng, std::size_t users, std::size_t items, std::size_t max_profile) {
  std::vector<Interaction> rows;
  for (std::size_t u = 0; u < users; ++u) {
    const auto m = uniform_below(rng, max_profile + 1);
    for (std::size_t k = 0; k < m; ++k) {
      rows.push_back({"u" + std::to_string(u), "i" + std::to_string(uniform_below(rng, items)),
                      static_cast<double>(1 + uniform_below(rng, 5))});
    }
  }
  return InteractionDataset(std::move(rows));
}

TEST(ParseRatings, WellFormedRows) {
  const auto ds = parse("u1\ta\t4\nu1\tb\t3\t978300760\nu2\ta\t5\n");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.num_users(), 2u);
  EXPECT_EQ(ds.num_items(), 2u);
}

TEST(ParseRatings, DuplicateRowsKeepTheLastValue) {
  const auto ds = parse("u,a,1\nu,a,5\n", Dialect::csv);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.interactions()[0].value, 5.0);
}

TEST(ParseRatings, CommentsAndBlankLinesAreSkipped) {
  const auto ds = parse("# header\n\nu\ta\t1\n");
  EXPECT_EQ(ds.size(), 1u);
}

TEST(ParseRatings, DoubleColonDialect) {
  const auto ds = parse("1::1193::5::978300760\n1::661::3::978302109\n", Dialect::dat);
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.interactions()[1].item, "661");
}

TEST(ParseRatings, MalformedRowReportsItsLine) {
  try {
    parse("u\ta\t1\nu\tb\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("u\ta\tfive\n"), ParseError);
  EXPECT_THROW(parse("u\ta\t-1\n"), ParseError);
}

TEST(ParseRatings, EmptyInput) {
  EXPECT_THROW(parse(""), DataError);
  EXPECT_THROW(parse("# only a comment\n"), DataError);
}

TEST(ParseRatings, WriteThenParseRoundTrips) {
  Rng rng(4);
  const auto ds = random_dataset(rng, 20, 30, 10);
  std::ostringstream out;
  write_ratings(out, ds, Dialect::csv);
  EXPECT_EQ(parse(out.str(), Dialect::csv).interactions(), ds.interactions());
}

TEST(InteractionsToRatings, Monotone) {
  const auto r = interactions_to_ratings(InteractionDataset({{"u", "i1", 1}, {"u", "i2", 10}}));
  EXPECT_GE(r.interactions()[1].value, r.interactions()[0].value);
}

TEST(InteractionsToRatings, IdenticalCountsMapToFive) {
  const auto r = interactions_to_ratings(InteractionDataset({{"u", "a", 3}, {"u", "b", 3}, {"u", "c", 3}}));
  for (const auto& x : r.interactions()) EXPECT_EQ(x.value, 5.0);
}

TEST(InteractionsToRatings, QuintilesOfOneToFive) {
  std::vector<Interaction> rows;
  for (int c : {4, 1, 5, 3, 2}) rows.push_back({"u", "i" + std::to_string(c), static_cast<double>(c)});
  const auto r = interactions_to_ratings(InteractionDataset(rows));
  for (const auto& x : r.interactions()) EXPECT_EQ(x.value, std::stod(x.item.substr(1)));
}

TEST(InteractionsToRatings, MatchesIndependentQuintileComputation) {
  Rng rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Interaction> rows;
    const auto m = 1 + uniform_below(rng, 30);
    for (std::size_t k = 0; k < m; ++k) {
      rows.push_back({"u", "i" + std::to_string(k), static_cast<double>(1 + uniform_below(rng, 8))});
    }
    const auto r = interactions_to_ratings(InteractionDataset(rows));
    std::vector<double> sorted;
    for (const auto& x : rows) sorted.push_back(x.value);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < m; ++k) {
      // position of the last occurrence in the sorted vector, as a fraction of m
      std::size_t last = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (sorted[j] <= rows[k].value) last = j + 1;
      }
      const double quantile = static_cast<double>(last) / static_cast<double>(m);
      double expected = 1;
      while (expected < 5 && quantile > expected / 5.0 + 1e-12) ++expected;
      EXPECT_EQ(r.interactions()[k].value, expected);
    }
  }
}

TEST(InteractionsToRatings, RejectsNonPositiveCounts) {
  EXPECT_THROW(interactions_to_ratings(InteractionDataset({{"u", "a", 0}})), DataError);
}

TEST(CoreFilter, ZeroThresholdsAreIdentity) {
  Rng rng(2);
  const auto ds = random_dataset(rng, 15, 20, 8);
  EXPECT_EQ(apply_core_filter(ds, {}).interactions(), ds.interactions());
}

TEST(CoreFilter, UserThresholdMatchesBruteForceCount) {
  Rng rng(3);
  const auto ds = random_dataset(rng, 10, 12, 6);
  CoreFilterOptions opt;
  opt.min_user_ratings = 3;
  const auto out = apply_core_filter(ds, opt);
  std::set<UserId> expected;
  for (const auto& u : ds.user_ids()) {
    int c = 0;
    for (const auto& r : ds.interactions()) c += r.user == u ? 1 : 0;
    if (c >= 3) expected.insert(u);
  }
  EXPECT_EQ(std::set<UserId>(out.user_ids().begin(), out.user_ids().end()), expected);
}

TEST(CoreFilter, ItemPassRunsAfterTheUserPass) {
  // item z is rated by two users, one of whom is dropped first
  InteractionDataset ds({{"a", "x", 1}, {"a", "z", 1}, {"b", "z", 1}, {"a", "y", 1}, {"c", "x", 1}});
  CoreFilterOptions opt;
  opt.min_user_ratings = 2;
  opt.min_item_ratings = 2;
  const auto out = apply_core_filter(ds, opt);
  EXPECT_TRUE(out.empty());
  const auto items_only = apply_core_filter(ds, {0, 2});
  EXPECT_EQ(items_only.size(), 4u);
}

TEST(CoreFilter, IteratedFilterReachesAFixedPoint) {
  Rng rng(13);
  const auto ds = random_dataset(rng, 40, 25, 12);
  CoreFilterOptions opt;
  opt.min_user_ratings = 5;
  opt.min_item_ratings = 6;
  opt.iterate = true;
  const auto out = apply_core_filter(ds, opt);
  std::map<std::string, int> users, items;
  for (const auto& r : out.interactions()) {
    ++users[r.user];
    ++items[r.item];
  }
  for (const auto& [_, c] : users) EXPECT_GE(c, 5);
  for (const auto& [_, c] : items) EXPECT_GE(c, 6);
}

TEST(CoreFilter, SamplingIsDeterministicAndSized) {
  Rng rng(14);
  const auto ds = random_dataset(rng, 30, 20, 8);
  CoreFilterOptions opt;
  opt.min_user_ratings = 1;
  opt.sample_users = 10;
  const auto a = apply_core_filter(ds, opt);
  const auto b = apply_core_filter(ds, opt);
  EXPECT_EQ(a.num_users(), 10u);
  EXPECT_EQ(a.interactions(), b.interactions());
  opt.sample_users = 1000;
  EXPECT_THROW(apply_core_filter(ds, opt), InvalidArgument);
}

TEST(Split, TenRatingsGiveEightAndTwo) {
  std::vector<Interaction> rows;
  for (int k = 0; k < 10; ++k) rows.push_back({"u", "i" + std::to_string(k), 1});
  const auto s = split_train_test(InteractionDataset(rows), 0.8, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, SizeIsTheSumOfPerUserFloors) {
  Rng rng(15);
  const auto ds = random_dataset(rng, 50, 40, 20);
  const auto s = split_train_test(ds, 0.8, 7);
  std::size_t expected = 0;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto m = ds.profile(u).size();
    expected += m < 2 ? m : static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(m) + 1e-9));
  }
  EXPECT_EQ(s.train.size(), expected);
  EXPECT_EQ(s.train.size() + s.test.size(), ds.size());
}

TEST(Split, DisjointPartitionPerUser) {
  Rng rng(16);
  const auto ds = random_dataset(rng, 30, 40, 15);
  const auto s = split_train_test(ds, 0.7, 3);
  for (const auto& u : ds.user_ids()) {
    const auto tr = s.train.items_of(u);
    const auto te = s.test.items_of(u);
    std::set<ItemId> all = tr;
    all.insert(te.begin(), te.end());
    EXPECT_EQ(all.size(), tr.size() + te.size());
    EXPECT_EQ(all, ds.items_of(u));
  }
}

TEST(Split, DeterministicUnderSeedAndSingletonsGoToTrain) {
  InteractionDataset ds({{"solo", "a", 1}, {"u", "a", 1}, {"u", "b", 1}, {"u", "c", 1}});
  const auto a = split_train_test(ds, 0.5, 9);
  const auto b = split_train_test(ds, 0.5, 9);
  EXPECT_EQ(a.train.interactions(), b.train.interactions());
  EXPECT_EQ(a.train_only_users, std::vector<UserId>{"solo"});
  EXPECT_TRUE(a.train.has_user("solo"));
  EXPECT_THROW(split_train_test(ds, 1.0, 1), InvalidArgument);
}

TEST(SupplierMap, TwoItemsOneSupplier) {
  std::istringstream in("x\tS1\ny\tS1\n");
  const auto c = parse_supplier_map(in, Dialect::tsv);
  EXPECT_EQ(c.num_suppliers(), 1u);
  EXPECT_EQ(c.num_items(), 2u);
}

TEST(SupplierMap, ConflictIsAnError) {
  std::istringstream in("x\tS1\nx\tS2\n");
  try {
    parse_supplier_map(in, Dialect::tsv);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(SupplierMap, MissingItemsAreNamed) {
  SupplierCatalog full(std::vector<std::pair<ItemId, SupplierId>>{{"x", "S1"}});
  InteractionDataset ds({{"u", "x", 1}, {"u", "q", 1}});
  try {
    catalog_for(ds, full);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("q"), std::string::npos);
  }
  InteractionDataset covered({{"u", "x", 1}});
  EXPECT_EQ(catalog_for(covered, full).num_items(), 1u);
}

}  // namespace
}  // namespace fairflow

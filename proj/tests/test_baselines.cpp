#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fairflow/baselines.hpp"

namespace fairflow {
namespace {

RankedBatch five() {
  RankedBatch b(5);
  b.set("u", {{"a", 5}, {"b", 4}, {"c", 3}, {"d", 2}, {"e", 1}});
  b.set("v", {{"e", 0.9}, {"c", 0.8}, {"a", 0.7}, {"b", 0.6}, {"d", 0.5}});
  return b;
}

std::vector<ItemId> ids(const RankedList& list) {
  std::vector<ItemId> out;
  for (const auto& e : list) out.push_back(e.item);
  return out;
}

TEST(ReverseRerank, TakesTheBottomEntries) {
  const auto out = reverse_rerank(five(), 2);
  EXPECT_EQ(ids(out.list("u")), (std::vector<ItemId>{"e", "d"}));
  EXPECT_EQ(ids(out.list("v")), (std::vector<ItemId>{"d", "b"}));
  EXPECT_EQ(out.list_size(), 2u);
  EXPECT_TRUE(out.complete());
}

TEST(ReverseRerank, FullLengthReversesTheList) {
  const auto out = reverse_rerank(five(), 5);
  EXPECT_EQ(ids(out.list("v")), (std::vector<ItemId>{"d", "b", "a", "c", "e"}));
}

TEST(ReverseRerank, RejectsBadLength) {
  EXPECT_THROW(reverse_rerank(five(), 0), InvalidArgument);
  EXPECT_THROW(reverse_rerank(five(), 6), InvalidArgument);
}

TEST(RandomRerank, FullLengthKeepsTheList) {
  const auto out = random_rerank(five(), 5, 3);
  const auto original = five();
  EXPECT_EQ(out.list("u"), original.list("u"));
  EXPECT_EQ(out.list("v"), original.list("v"));
}

TEST(RandomRerank, DeterministicForASeed) {
  const auto a = random_rerank(five(), 3, 42);
  const auto b = random_rerank(five(), 3, 42);
  EXPECT_EQ(a, b);
  bool differs = false;
  for (std::uint64_t seed = 43; seed < 60 && !differs; ++seed) differs = !(random_rerank(five(), 3, seed) == a);
  EXPECT_TRUE(differs);
}

TEST(RandomRerank, SubsetInOriginalOrder) {
  const auto batch = five();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto out = random_rerank(batch, 3, seed);
    for (const auto& [user, list] : out.lists()) {
      ASSERT_EQ(list.size(), 3u);
      const auto& source = batch.list(user);
      std::size_t cursor = 0;
      std::set<ItemId> seen;
      for (const auto& e : list) {
        EXPECT_TRUE(seen.insert(e.item).second);
        while (cursor < source.size() && !(source[cursor] == e)) ++cursor;
        ASSERT_LT(cursor, source.size()) << "entry missing or out of order";
      }
    }
  }
}

TEST(RandomRerank, InclusionIsRoughlyUniform) {
  const auto batch = five();
  std::map<ItemId, int> hits;
  const int draws = 5000;
  for (int d = 0; d < draws; ++d) {
    const auto out = random_rerank(batch, 2, static_cast<std::uint64_t>(d));
    for (const auto& e : out.list("u")) ++hits[e.item];
  }
  for (const auto& id : {"a", "b", "c", "d", "e"}) {
    EXPECT_NEAR(hits[id] / static_cast<double>(draws), 0.4, 0.03) << id;
  }
}

}  // namespace
}  // namespace fairflow

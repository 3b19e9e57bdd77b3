#include <gtest/gtest.h>

#include <sstream>

#include "../support/metric_oracles.hpp"
#include "xst/evalmetrics/metrics.hpp"

namespace xst::evalmetrics {
namespace {

using numcore::RngStream;

TEST(Bleu, IdenticalIsHundred) {
  std::vector<std::string> c{"the cat sat on the mat", "a quick brown fox jumps"};
  EXPECT_DOUBLE_EQ(bleu(c, c), 100.0);
}

TEST(Bleu, NoFourGramsIsZero) {
  EXPECT_EQ(bleu({"the cat sat"}, {"the cat sat"}), 0.0);
  EXPECT_EQ(bleu({"a b c d e"}, {"e d c b a"}), 0.0);
}

TEST(Bleu, WorkedSentenceMatchesOracle) {
  std::vector<std::string> h{"the cat sat on the mat"}, r{"the cat is on the mat"};
  EXPECT_EQ(bleu(h, r), 0.0);  // no shared 4-gram
  std::vector<std::string> h2{"the cat sat on the mat today"}, r2{"the cat sat on the mat"};
  EXPECT_NEAR(bleu(h2, r2), testing::oracle_bleu(h2, r2), 0.01);
  EXPECT_NEAR(bleu(h2, r2), 100.0 * std::pow((6.0 / 7) * (5.0 / 6) * (4.0 / 5) * (3.0 / 4), 0.25), 1e-9);
}

TEST(Bleu, MatchesOracleOnRandomCorpora) {
  RngStream rng(1, "bleu");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> h, r;
    for (int i = 0; i < 5; ++i) {
      h.push_back(testing::random_sentence(rng, 12, 6));
      r.push_back(testing::random_sentence(rng, 12, 6));
    }
    EXPECT_NEAR(bleu(h, r), testing::oracle_bleu(h, r), 0.01);
  }
}

TEST(Bleu, Errors) {
  EXPECT_THROW(bleu({"a"}, {"a", "b"}), MetricError);
  EXPECT_THROW(bleu({}, {}), MetricError);
}

TEST(Bleu, PermutationInvariant) {
  std::vector<std::string> h{"a b c d e f", "x y z w", "p q r s t"}, r{"a b c d e", "x y z w v", "p q r s"};
  auto h2 = h, r2 = r;
  std::swap(h2[0], h2[2]);
  std::swap(r2[0], r2[2]);
  EXPECT_DOUBLE_EQ(bleu(h, r), bleu(h2, r2));
}

TEST(Wer, Examples) {
  EXPECT_EQ(wer({"a", "b"}, {"a", "b"}), 0.0);
  EXPECT_EQ(wer({}, {"a", "b", "c", "d"}), 1.0);
  EXPECT_NEAR(wer({"a", "x", "c"}, {"a", "b", "c"}), 1.0 / 3, 1e-12);
  EXPECT_THROW(wer({"a"}, {}), MetricError);
}

TEST(Wer, MatchesRecursiveOracle) {
  RngStream rng(2, "wer");
  for (int trial = 0; trial < 500; ++trial) {
    auto a = tokenize(testing::random_sentence(rng, 12, 4));
    auto b = tokenize(testing::random_sentence(rng, 12, 4));
    EXPECT_EQ(edit_distance(a, b), testing::oracle_edit_distance(a, b));
  }
}

TEST(Wer, TriangleInequality) {
  RngStream rng(3, "tri");
  for (int trial = 0; trial < 200; ++trial) {
    auto a = tokenize(testing::random_sentence(rng, 8, 3));
    auto b = tokenize(testing::random_sentence(rng, 8, 3));
    auto c = tokenize(testing::random_sentence(rng, 8, 3));
    EXPECT_LE(edit_distance(a, c), edit_distance(a, b) + edit_distance(b, c));
  }
}

TEST(UnigramPr, ExamplesFromDefinition) {
  auto id = unigram_pr({"the cat sat"}, {"the cat sat"});
  EXPECT_DOUBLE_EQ(id.precision, 1.0);
  EXPECT_DOUBLE_EQ(id.recall, 1.0);
  auto none = unigram_pr({"a b"}, {"c d e"});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
}

TEST(UnigramPr, EatFeedSynonymRecall) {
  MatchResource res;
  res.synonyms = SynonymTable::parse("eat feed consume\nbig large\n");
  MatchTiers tiers;
  tiers.synonym = true;
  EXPECT_DOUBLE_EQ(unigram_pr({"eat"}, {"eat"}, res, tiers).recall, 1.0);
  EXPECT_DOUBLE_EQ(unigram_pr({"eat"}, {"feed"}, res, tiers).recall, 0.8);
  EXPECT_THROW(unigram_pr({"eat"}, {"feed"}, {}, tiers), MetricError);
}

TEST(UnigramPr, TierOrderPrefersExact) {
  MatchResource res;
  res.synonyms = SynonymTable::parse("eat feed\n");
  MatchTiers tiers;
  tiers.synonym = true;
  // "feed" matches "feed" exactly; "eat" is then free to match nothing
  auto m = unigram_match({"eat", "feed"}, {"feed"}, res, tiers);
  EXPECT_DOUBLE_EQ(m.weight, 1.0);
  // maximum matching: both hypothesis tokens find partners
  auto m2 = unigram_match({"eat", "feed"}, {"feed", "eat"}, res, tiers);
  EXPECT_DOUBLE_EQ(m2.weight, 2.0);
}

TEST(UnigramPr, StemTier) {
  MatchResource res;
  res.stemmer = Stemmer::builtin("en");
  MatchTiers tiers;
  tiers.stem = true;
  auto pr = unigram_pr({"cats walking"}, {"cat walked"}, res, tiers);
  EXPECT_DOUBLE_EQ(pr.recall, 0.8);
}

TEST(UnigramPr, SwapSymmetry) {
  RngStream rng(4, "swap");
  std::vector<std::string> h, r;
  for (int i = 0; i < 20; ++i) {
    h.push_back(testing::random_sentence(rng, 10, 8));
    r.push_back(testing::random_sentence(rng, 10, 8));
  }
  auto a = unigram_pr(h, r), b = unigram_pr(r, h);
  EXPECT_DOUBLE_EQ(a.precision, b.recall);
  EXPECT_DOUBLE_EQ(a.recall, b.precision);
  EXPECT_GE(a.precision, 0.0);
  EXPECT_LE(a.precision, 1.0);
}

TEST(Stemmer, IdempotentAndDeterministic) {
  for (const char* lang : {"en", "fr"}) {
    auto s = Stemmer::builtin(lang);
    for (const std::string w : {"nationalization", "relational", "feeding", "classes", "walked", "happiness",
                                "généralement", "heureuses", "activités", "mangées", "a", "is", "feed"}) {
      EXPECT_EQ(s.stem(s.stem(w)), s.stem(w)) << lang << " " << w;
    }
  }
  auto en = Stemmer::builtin("en");
  EXPECT_EQ(en.stem("walking"), "walk");
  EXPECT_EQ(en.stem("feed"), "feed");
  EXPECT_EQ(en.stem("class"), "class");
  EXPECT_THROW(Stemmer::builtin("de"), MetricError);
  EXPECT_THROW(Stemmer("ab abc\n"), MetricError);
}

TEST(NaiveTopK, TopFiveReferencesArePerfect) {
  std::vector<std::string> train;
  for (int w = 0; w < 10; ++w)
    for (int rep = 0; rep < 20 - w; ++rep) train.push_back("w" + std::to_string(w));
  auto r = naive_topk(train, {"w0 w1 w2 w3 w4", "w4 w3 w2 w1 w0"});
  EXPECT_EQ(r.k, 5u);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(NaiveTopK, DisjointReferencesPickFive) {
  auto r = naive_topk({"a b c d e f g"}, {"x y z"});
  EXPECT_EQ(r.k, 5u);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
}

TEST(NaiveTopK, BalancedAtEightAgainstSweep) {
  std::vector<std::string> train, refs;
  testing::balanced_at_eight(train, refs, 5);
  auto r = naive_topk(train, refs);
  EXPECT_EQ(r.k, 8u);
  auto sweep = testing::oracle_topk_sweep(train, refs, 5, 20);
  std::size_t best = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i)
    if (std::abs(sweep[i].precision - sweep[i].recall) < std::abs(sweep[best].precision - sweep[best].recall))
      best = i;
  EXPECT_EQ(best + 5, 8u);
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    EXPECT_NEAR(r.sweep[i].precision, sweep[i].precision, 1e-12);
    EXPECT_NEAR(r.sweep[i].recall, sweep[i].recall, 1e-12);
  }
}

TEST(NaiveTopK, ChosenKInRangeOnRandomCorpora) {
  RngStream rng(6, "topk");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> train, refs;
    for (int i = 0; i < 50; ++i) train.push_back(testing::random_sentence(rng, 10, 40));
    train.push_back("w1");
    for (int i = 0; i < 10; ++i) refs.push_back(testing::random_sentence(rng, 10, 40));
    auto r = naive_topk(train, refs);
    EXPECT_GE(r.k, 5u);
    EXPECT_LE(r.k, 20u);
  }
  EXPECT_THROW(naive_topk({"", " "}, {"a"}), MetricError);
}

TEST(CodeSwitch, Flag) {
  EXPECT_TRUE(code_switch_flag({"hola", "amigo"}, {"hola", "amigo"}));
  EXPECT_FALSE(code_switch_flag({"a", "b"}, {"c", "d"}));
  EXPECT_FALSE(code_switch_flag({"a", "b", "c", "d"}, {"a", "b", "x", "y"}));
  EXPECT_TRUE(code_switch_flag({"a", "b", "c", "d"}, {"a", "b", "c", "y"}));
  EXPECT_THROW(code_switch_flag({}, {"a"}), MetricError);
}

TEST(Report, JsonAndCsv) {
  auto r = evaluate({"a b c", "d e"}, {"a b c", "d f"}, {}, {}, true);
  auto j = r.to_json();
  EXPECT_TRUE(j.contains("bleu"));
  EXPECT_NEAR(j["wer"].get<double>(), 1.0 / 5, 1e-12);
  std::ostringstream os;
  r.write_breakdown_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "index,hyp_tokens,ref_tokens,precision,recall,wer");
}

}  // namespace
}  // namespace xst::evalmetrics

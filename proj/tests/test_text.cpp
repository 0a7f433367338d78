#include <gtest/gtest.h>

#include "rrag/hash.hpp"
#include "rrag/text.hpp"
#include "test_util.hpp"

using namespace rrag;

TEST(Normalize, FoldsCaseWhitespaceAndCompatibilityForms) {
  EXPECT_EQ(text::normalize("  Hello\tWORLD \n"), "hello world");
  EXPECT_EQ(text::normalize("ﬁle"), "file");
  EXPECT_EQ(text::normalize("ＡＢＣ"), "abc");
  EXPECT_EQ(text::normalize("a\xC2\xA0\xC2\xA0" "b"), "a b");
  EXPECT_EQ(text::normalize("x\xE3\x80\x80y"), "x y");
  EXPECT_EQ(text::normalize("E\xCC\x81" "cole"), "\xC3\xA9" "cole");
}

TEST(Normalize, KeepsPunctuation) {
  EXPECT_EQ(text::normalize("U.S.A."), "u.s.a.");
  EXPECT_EQ(text::normalize("Saint-Étienne, France"), "saint-étienne, france");
}

TEST(Normalize, EmptyAndBlank) {
  EXPECT_EQ(text::normalize(""), "");
  EXPECT_EQ(text::normalize(" \t\n "), "");
}

TEST(Normalize, InvalidUtf8BecomesReplacementCharacter) {
  EXPECT_EQ(text::normalize("a\xFF" "b"), "a\xEF\xBF\xBD" "b");
}

TEST(NormalizeProperty, Idempotent) {
  fixtures::Gen gen(11);
  for (int i = 0; i < 2000; ++i) {
    const auto s = gen.messy_text(gen.integer(0, 12));
    const auto once = text::normalize(s);
    ASSERT_EQ(text::normalize(once), once) << "input: " << s;
  }
}

TEST(NormalizeProperty, NoEdgeOrRepeatedSpaces) {
  fixtures::Gen gen(12);
  for (int i = 0; i < 2000; ++i) {
    const auto n = text::normalize(gen.messy_text(gen.integer(0, 12)));
    if (n.empty()) continue;
    ASSERT_NE(n.front(), ' ');
    ASSERT_NE(n.back(), ' ');
    ASSERT_EQ(n.find("  "), std::string::npos);
    ASSERT_EQ(n.find('\t'), std::string::npos);
    ASSERT_EQ(n.find('\n'), std::string::npos);
  }
}

TEST(ContainsNormalized, MatchesAcrossCaseAndSpacing) {
  EXPECT_TRUE(text::contains_normalized("The capital is  NEW\tYork city", "new york"));
  EXPECT_TRUE(text::contains_normalized("ＮＥＷ ＹＯＲＫ", "new york"));
  EXPECT_FALSE(text::contains_normalized("Newark", "new york"));
}

TEST(ContainsNormalized, EmptyNeedleNeverMatches) {
  EXPECT_FALSE(text::contains_normalized("anything", ""));
  EXPECT_FALSE(text::contains_normalized("anything", " \t "));
  EXPECT_FALSE(text::contains_normalized("", ""));
}

TEST(Tokenize, SplitsOnNonAlphanumerics) {
  EXPECT_EQ(text::tokenize("Hello, World! 42nd-street"),
            (std::vector<std::string>{"hello", "world", "42nd", "street"}));
  EXPECT_EQ(text::tokenize("Café Ωmega"), (std::vector<std::string>{"café", "ωmega"}));
  EXPECT_TRUE(text::tokenize(" ,;! ").empty());
}

TEST(Tokenize, StopwordsAndStemming) {
  EXPECT_EQ(text::tokenize("The cat is on the mat", {false, true}),
            (std::vector<std::string>{"cat", "mat"}));
  EXPECT_EQ(text::tokenize("running cats", {true, false}), (std::vector<std::string>{"run", "cat"}));
  EXPECT_TRUE(text::is_stopword("the"));
  EXPECT_FALSE(text::is_stopword("cat"));
}

// Reference outputs of the Porter algorithm for the examples in its
// original description.
TEST(PorterStem, ReferenceVectors) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"caresses", "caress"},   {"ponies", "poni"},        {"ties", "ti"},
      {"caress", "caress"},     {"cats", "cat"},           {"feed", "feed"},
      {"agreed", "agre"},       {"plastered", "plaster"},  {"bled", "bled"},
      {"motoring", "motor"},    {"sing", "sing"},          {"conflated", "conflat"},
      {"troubled", "troubl"},   {"sized", "size"},         {"hopping", "hop"},
      {"tanned", "tan"},        {"falling", "fall"},       {"hissing", "hiss"},
      {"fizzed", "fizz"},       {"failing", "fail"},       {"filing", "file"},
      {"happy", "happi"},       {"sky", "sky"},            {"relational", "relat"},
      {"conditional", "condit"}, {"rational", "ration"},   {"valenci", "valenc"},
      {"hesitanci", "hesit"},   {"digitizer", "digit"},    {"conformabli", "conform"},
      {"radicalli", "radic"},   {"differentli", "differ"}, {"vileli", "vile"},
      {"analogousli", "analog"}, {"vietnamization", "vietnam"}, {"predication", "predic"},
      {"operator", "oper"},     {"feudalism", "feudal"},   {"decisiveness", "decis"},
      {"hopefulness", "hope"},  {"callousness", "callous"}, {"formaliti", "formal"},
      {"sensitiviti", "sensit"}, {"sensibiliti", "sensibl"}, {"triplicate", "triplic"},
      {"formative", "form"},    {"formalize", "formal"},   {"electriciti", "electr"},
      {"electrical", "electr"}, {"hopeful", "hope"},       {"goodness", "good"},
      {"revival", "reviv"},     {"allowance", "allow"},    {"inference", "infer"},
      {"airliner", "airlin"},   {"gyroscopic", "gyroscop"}, {"adjustable", "adjust"},
      {"defensible", "defens"}, {"irritant", "irrit"},     {"replacement", "replac"},
      {"adjustment", "adjust"}, {"dependent", "depend"},   {"adoption", "adopt"},
      {"homologou", "homolog"}, {"communism", "commun"},   {"activate", "activ"},
      {"angulariti", "angular"}, {"homologous", "homolog"}, {"effective", "effect"},
      {"bowdlerize", "bowdler"}, {"probate", "probat"},    {"rate", "rate"},
      {"cease", "ceas"},        {"controll", "control"},   {"roll", "roll"},
      {"generalizations", "gener"}, {"oscillators", "oscil"}};
  for (const auto& [word, stem] : cases) EXPECT_EQ(text::porter_stem(word), stem) << word;
}

TEST(PorterStem, ShortAndNonAsciiWordsUnchanged) {
  EXPECT_EQ(text::porter_stem("a"), "a");
  EXPECT_EQ(text::porter_stem("is"), "is");
  EXPECT_EQ(text::porter_stem("café"), "café");
}

TEST(WordCount, CountsWhitespaceSeparatedWords) {
  EXPECT_EQ(text::word_count("  a  b\tc\n"), 3u);
  EXPECT_EQ(text::word_count(""), 0u);
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Sha256, FileMatchesString) {
  fixtures::TempDir dir;
  fixtures::write_file(dir / "f", "abc");
  EXPECT_EQ(sha256_file(dir / "f"), sha256_hex("abc"));
}

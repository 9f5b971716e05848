#include <filesystem>
#include <random>

#include "doctest.h"
#include "ventcast/error.hpp"
#include "ventcast/text/tokenize.hpp"

using namespace ventcast;
using namespace ventcast::text;

TEST_CASE("build_vocab ranks by frequency") {
  std::vector<std::string> corpus{"a a b"};
  auto v = Vocabulary::build(corpus, 1, 0);
  CHECK(v.size() == 5);
  CHECK(v.contains("a"));
  CHECK(v.contains("b"));
  CHECK(v.id("a") < v.id("b"));
  CHECK(v.cls() != v.unk());
  CHECK(v.unk() != v.pad());

  auto none = Vocabulary::build(corpus, 10, 0);
  CHECK(none.size() == Vocabulary::kSpecialCount);

  std::vector<std::string> ties{"zeta alpha mid mid", "alpha zeta"};
  auto t = Vocabulary::build(ties, 1, 0);
  CHECK(t.token(3) == "alpha");  // tie with zeta at count 2, lexicographic
  CHECK(t.token(4) == "mid");
  CHECK(t.token(5) == "zeta");
  CHECK(Vocabulary::build(ties, 1, 0) == t);
  CHECK(Vocabulary::build(ties, 1, 2).size() == 5);

  std::vector<std::string> empty;
  CHECK_THROWS_AS(Vocabulary::build(empty, 1, 0), Error);
}

TEST_CASE("tokenize examples") {
  std::vector<std::string> corpus{"pt on vent", "pt stable"};
  auto v = Vocabulary::build(corpus, 1, 0);

  auto empty = tokenize("", v, 8);
  CHECK(empty.ids[0] == v.cls());
  CHECK(empty.true_length == 1);
  for (std::size_t i = 1; i < 8; ++i) CHECK(empty.ids[i] == v.pad());

  auto s = tokenize("Pt on VENT", v, 8);
  std::vector<TokenId> expected{v.cls(), v.id("pt"), v.id("on"), v.id("vent"), v.pad(), v.pad(), v.pad(), v.pad()};
  CHECK(s.ids == expected);
  CHECK(s.true_length == 4);

  auto oov = tokenize("pt intubated", v, 8);
  CHECK(oov.ids[2] == v.unk());

  auto truncated = tokenize("pt on vent pt on vent", v, 4);
  CHECK(truncated.ids.size() == 4);
  CHECK(truncated.true_length == 4);

  auto punct = split_words("BP 120/80, sat.");
  CHECK(punct == std::vector<std::string>{"bp", "120", "/", "80", ",", "sat", "."});
  CHECK_THROWS_AS(tokenize("x", v, 1), Error);
}

TEST_CASE("tokenize fuzz: invariants and retokenize round trip") {
  std::mt19937_64 rng(17);
  const std::string alphabet = "abcXYZ019 ,.;:/\n\t-()[]\xc3\xa9";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 80);
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (std::size_t k = len(rng); k > 0; --k) s.push_back(alphabet[pick(rng)]);
    corpus.push_back(s);
  }
  auto v = Vocabulary::build(corpus, 2, 0);
  for (const auto& text : corpus) {
    auto seq = tokenize(text, v, 24);
    CHECK_NOTHROW(validate(seq, v));
    bool all_known = true;
    for (std::size_t i = 1; i < seq.true_length; ++i) all_known = all_known && seq.ids[i] != v.unk();
    if (all_known) {
      auto again = tokenize(detokenize(seq, v), v, 24);
      CHECK(again.ids == seq.ids);
    }
  }
}

TEST_CASE("vocabulary file round trip") {
  std::vector<std::string> corpus{"pt on vent , sedated"};
  auto v = Vocabulary::build(corpus, 1, 0);
  auto path = std::filesystem::temp_directory_path() / "ventcast_vocab_test.txt";
  v.save(path);
  auto loaded = Vocabulary::load(path);
  CHECK(loaded == v);
  CHECK(loaded.id(",") == v.id(","));
  std::filesystem::remove(path);
}

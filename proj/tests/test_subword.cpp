#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "lowmt/error.hpp"
#include "lowmt/subword.hpp"
#include "lowmt/unicode.hpp"

using namespace lowmt;
using namespace lowmt::subword;

namespace {

const std::vector<std::string> kText = {
    "the cat sat on the mat",        "the dog sat on the log",       "a cat and a dog",
    "cats and dogs sit on mats",     "an teach agus an madra",       "tá an cat ar an mata",
    "tá an madra ar an log",         "the lower the newest",         "widest and lowest",
};

SubwordModel toy_unigram() {
  SubwordModel m;
  m.kind = ModelKind::unigram;
  m.pieces = {{"a", std::log(0.3)}, {"b", std::log(0.3)}, {"ab", std::log(0.4)}};
  m.vocab_size = 3;
  return m;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("vocabulary presets") {
  CHECK(std::vector<int>(std::begin(kVocabPresets), std::end(kVocabPresets)) ==
        std::vector<int>{4000, 8000, 16000, 32000});
  CHECK(kDefaultVocabSize == 16000);
}

TEST_CASE("pretokenize marks every whitespace") {
  const auto w = pretokenize("a  b");
  REQUIRE(w.size() == 3);
  CHECK(unicode::to_utf8(w[0]) == "▁a");
  CHECK(unicode::to_utf8(w[1]) == "▁");
  CHECK(unicode::to_utf8(w[2]) == "▁b");
  CHECK(pretokenize("").empty());
}

TEST_CASE("BPE merges on the classic frequency table") {
  const auto m = bpe_train_counts({{"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}}, 50);
  REQUIRE(m.merges.size() >= 2);
  CHECK(m.merges[0] == Merge{"e", "s"});
  CHECK(m.merges[1] == Merge{"es", "t"});
}

TEST_CASE("BPE ties break on byte order") {
  const auto m = bpe_train_counts({{"aaaa", 1}}, 4);
  REQUIRE(m.merges.size() == 2);
  CHECK(m.merges[0] == Merge{"a", "a"});
  CHECK(m.merges[1] == Merge{"aa", "aa"});
  CHECK(m.vocab_size == 4);
}

TEST_CASE("BPE stops when no pair is left") {
  const auto m = bpe_train_counts({{"ab", 1}}, 100);
  CHECK(m.vocab_size == static_cast<int>(m.alphabet.size() + m.merges.size()));
  CHECK(m.vocab_size < 100);
}

TEST_CASE("BPE vocab must exceed the alphabet") {
  CHECK(kind_of([] { bpe_train_counts({{"abc", 1}}, 3); }) == ErrorKind::configuration);
}

TEST_CASE("BPE encode and decode") {
  const auto m = bpe_train(kText, 60);
  for (const auto& line : kText) CHECK(decode(encode(m, line)) == line);
  const auto pieces = encode(m, "the cat");
  CHECK(pieces.front().rfind("▁", 0) == 0);
}

TEST_CASE("BPE keeps unseen characters as single symbols") {
  const auto m = bpe_train(kText, 60);
  CHECK(encode(m, "ηξ") == std::vector<std::string>{"▁", "η", "ξ"});
}

TEST_CASE("unigram Viterbi on a hand vocabulary") {
  const auto m = toy_unigram();
  CHECK(viterbi_segment(m, U"ab") == std::vector<std::string>{"ab"});
  CHECK(viterbi_segment(m, U"aab") == std::vector<std::string>{"a", "ab"});
  CHECK(viterbi_segment(m, U"ba") == std::vector<std::string>{"b", "a"});
  CHECK(kind_of([&] { viterbi_segment(m, U"abc"); }) == ErrorKind::coverage);
}

TEST_CASE("unigram training") {
  UnigramOptions o;
  o.vocab_size = 60;
  o.seed_vocab_size = 400;
  UnigramTrace trace;
  const auto m = unigram_train(kText, o, &trace);
  CHECK(m.kind == ModelKind::unigram);
  CHECK(m.vocab_size == static_cast<int>(m.pieces.size()));
  CHECK(m.vocab_size <= 60);
  REQUIRE_FALSE(trace.rounds.empty());
  for (const auto& round : trace.rounds)
    for (std::size_t i = 1; i < round.size(); ++i) CHECK(round[i] >= round[i - 1] - 1e-9);
  for (const auto& line : kText) CHECK(decode(encode(m, line)) == line);
  double mass = 0;
  for (const auto& p : m.pieces) mass += std::exp(p.log_prob);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("unigram configuration errors") {
  UnigramOptions o;
  o.vocab_size = 50;
  o.seed_vocab_size = 40;
  CHECK(kind_of([&] { unigram_train(kText, o); }) == ErrorKind::configuration);
  o.seed_vocab_size = 400;
  o.shrink_factor = 1.0;
  CHECK(kind_of([&] { unigram_train(kText, o); }) == ErrorKind::configuration);
  o.shrink_factor = 0.75;
  o.vocab_size = 5;
  CHECK(kind_of([&] { unigram_train(kText, o); }) == ErrorKind::configuration);
  o.vocab_size = 50;
  CHECK(kind_of([&] { unigram_train({}, o); }) == ErrorKind::empty_input);
}

TEST_CASE("unigram rejects uncovered characters") {
  UnigramOptions o;
  o.vocab_size = 60;
  o.seed_vocab_size = 400;
  const auto m = unigram_train(kText, o);
  CHECK(kind_of([&] { encode(m, "qqq ζ"); }) == ErrorKind::coverage);
}

TEST_CASE("model kind mismatch") {
  const auto bpe = bpe_train(kText, 40);
  CHECK(kind_of([&] { unigram_encode(bpe, "the"); }) == ErrorKind::model_kind);
  CHECK(kind_of([] { bpe_encode(toy_unigram(), "a"); }) == ErrorKind::model_kind);
}

TEST_CASE("model files round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto bpe = bpe_train(kText, 60);
  save_model(bpe, dir / "lowmt_test.bpe");
  CHECK(load_model(dir / "lowmt_test.bpe") == bpe);
  UnigramOptions o;
  o.vocab_size = 60;
  o.seed_vocab_size = 400;
  const auto uni = unigram_train(kText, o);
  save_model(uni, dir / "lowmt_test.uni");
  const auto back = load_model(dir / "lowmt_test.uni");
  CHECK(back == uni);
  for (const auto& line : kText) CHECK(encode(back, line) == encode(uni, line));
}

TEST_CASE("malformed model files") {
  CHECK(kind_of([] { parse_model(""); }) == ErrorKind::parse);
  CHECK(kind_of([] { parse_model("sentencepiece 3 1\n"); }) == ErrorKind::parse);
  CHECK(kind_of([] { parse_model("bpe 3 9\na\nb\nc\n"); }) == ErrorKind::parse);
  const auto text = serialize_model(bpe_train(kText, 60));
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  try {
    parse_model(cut);
    FAIL("truncated model accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  CHECK(kind_of([] { parse_model("unigram 1 1\na\tnot-a-number\n"); }) == ErrorKind::parse);
}

TEST_CASE("decode drops exactly one leading space") {
  CHECK(decode({"▁a", "▁", "▁b"}) == "a  b");
  CHECK(decode({}).empty());
}

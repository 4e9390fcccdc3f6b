#include <doctest.h>

#include <filesystem>

#include <unistd.h>
#include <fstream>

#include "lowmt/corpus.hpp"
#include "lowmt/error.hpp"
#include "lowmt/unicode.hpp"

using namespace lowmt;
using namespace lowmt::corpus;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lowmt_corpus_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
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

ParallelCorpus sample(std::size_t n) {
  std::vector<SentencePair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({"src " + std::to_string(i), "tgt " + std::to_string(i)});
  return ParallelCorpus(pairs);
}

}  // namespace

TEST_CASE("loading aligned files") {
  const auto s = scratch("a.en"), t = scratch("a.ga");
  write(s, "Hello there\nsecond line\n");
  write(t, "Dia duit\ndara líne\n");
  const auto c = load_parallel(s, t);
  REQUIRE(c.size() == 2);
  CHECK(c.pairs()[1].target == "dara líne");
  CHECK_FALSE(c.is_labeled());
}

TEST_CASE("misaligned files are rejected") {
  const auto s = scratch("b.en"), t = scratch("b.ga");
  write(s, "one\ntwo\nthree\n");
  write(t, "aon\ndó\n");
  CHECK(kind_of([&] { load_parallel(s, t); }) == ErrorKind::alignment);
}

TEST_CASE("invalid UTF-8 reports an encoding error") {
  const auto s = scratch("c.en"), t = scratch("c.ga");
  write(s, "fine\n");
  write(t, std::string("bad \xC3\x28 byte\n"));
  try {
    load_parallel(s, t);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::encoding);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("pairs blank on both sides are rejected, one-sided pairs are kept") {
  CHECK(kind_of([] { ParallelCorpus(std::vector<SentencePair>{{"", ""}}); }) == ErrorKind::validation);
  const ParallelCorpus c(std::vector<SentencePair>{{"x", ""}, {"y", "z"}});
  CHECK(c.one_sided_pairs() == std::vector<std::size_t>{0});
}

TEST_CASE("split sizes and determinism") {
  const auto c = sample(50);
  const auto a = split_corpus(c, 5, 7, 42);
  const auto b = split_corpus(c, 5, 7, 42);
  CHECK(a == b);
  CHECK(a.count(Split::dev) == 5);
  CHECK(a.count(Split::test) == 7);
  CHECK(a.count(Split::train) == 38);
  CHECK(a.pairs() == c.pairs());
  const auto other = split_corpus(c, 5, 7, 43);
  CHECK(other.labels() != a.labels());
}

TEST_CASE("split larger than the corpus fails") {
  const auto c = sample(10);
  CHECK(kind_of([&] { split_corpus(c, 6, 4, 0); }) == ErrorKind::size);
  CHECK(kind_of([&] { split_corpus(c, 20, 0, 0); }) == ErrorKind::size);
}

TEST_CASE("bilingual concatenation uses train split, sources first") {
  const auto split = split_corpus(sample(20), 3, 3, 1);
  const auto lines = concat_bilingual(split);
  REQUIRE(lines.size() == 28);
  for (std::size_t i = 0; i < 14; ++i) CHECK(lines[i].rfind("src", 0) == 0);
  for (std::size_t i = 14; i < 28; ++i) CHECK(lines[i].rfind("tgt", 0) == 0);
  CHECK(kind_of([] { concat_bilingual(ParallelCorpus()); }) == ErrorKind::empty_input);
}

TEST_CASE("normalization is casefold then NFC") {
  const std::string decomposed = "Cu\xCC\x81";  // U+0301 combining acute
  CHECK(normalize(decomposed, {false, NormalizationForm::nfc}) == "Cú");
  CHECK(normalize(decomposed, {true, NormalizationForm::nfc}) == "cú");
  CHECK(normalize("ÉIRE", {true, NormalizationForm::none}) == "éire");
}

TEST_CASE("word tokenizer splits punctuation") {
  CHECK(tokenize_words("teaghlaigh ina gcoimeádtar peataí;") ==
        std::vector<std::string>{"teaghlaigh", "ina", "gcoimeádtar", "peataí", ";"});
  CHECK(tokenize_words("  a,b  ") == std::vector<std::string>{"a", ",", "b"});
  CHECK(tokenize_words("").empty());
}

TEST_CASE("TSV round trip") {
  const auto split = split_corpus(sample(12), 2, 2, 9);
  const auto p = scratch("corpus.tsv");
  save_tsv(split, p);
  CHECK(load_tsv(p) == split);
}

TEST_CASE("read_lines tolerates CRLF and a missing final newline") {
  const auto p = scratch("lines.txt");
  write(p, "a\r\nb");
  CHECK(read_lines(p) == std::vector<std::string>{"a", "b"});
}

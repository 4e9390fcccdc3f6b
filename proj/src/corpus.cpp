#include "lowmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lowmt/error.hpp"
#include "lowmt/unicode.hpp"

namespace lowmt::corpus {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c == ' '; });
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw Error(ErrorKind::parse, "unknown split label '" + std::string(name) + "'");
}

ParallelCorpus::ParallelCorpus(std::vector<SentencePair> pairs,
                               std::optional<std::vector<Split>> labels)
    : pairs_(std::move(pairs)), labels_(std::move(labels)) {
  if (labels_ && labels_->size() != pairs_.size()) {
    throw Error(ErrorKind::alignment, "split labels (" + std::to_string(labels_->size()) +
                                          ") do not cover pairs (" +
                                          std::to_string(pairs_.size()) + ")");
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (is_blank(pairs_[i].source) && is_blank(pairs_[i].target)) {
      throw Error(ErrorKind::validation,
                  "pair " + std::to_string(i + 1) + " is empty on both sides");
    }
  }
}

std::size_t ParallelCorpus::count(Split split) const {
  if (!labels_) return split == Split::train ? pairs_.size() : 0;
  return static_cast<std::size_t>(std::count(labels_->begin(), labels_->end(), split));
}

std::vector<std::size_t> ParallelCorpus::one_sided_pairs() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (is_blank(pairs_[i].source) != is_blank(pairs_[i].target)) out.push_back(i);
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string data = slurp(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!unicode::is_valid_utf8(line)) {
      throw Error(ErrorKind::encoding, path.string() + ": invalid UTF-8 on line " +
                                           std::to_string(lines.size() + 1));
    }
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

ParallelCorpus load_parallel(const std::filesystem::path& source_path,
                             const std::filesystem::path& target_path) {
  auto sources = read_lines(source_path);
  auto targets = read_lines(target_path);
  if (sources.size() != targets.size()) {
    throw Error(ErrorKind::alignment, "line count mismatch: " + source_path.string() + " has " +
                                          std::to_string(sources.size()) + " lines, " +
                                          target_path.string() + " has " +
                                          std::to_string(targets.size()));
  }
  std::vector<SentencePair> pairs;
  pairs.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].find('\t') != std::string::npos || targets[i].find('\t') != std::string::npos) {
      throw Error(ErrorKind::parse, "tab character in sentence on line " + std::to_string(i + 1));
    }
    pairs.push_back({std::move(sources[i]), std::move(targets[i])});
  }
  return ParallelCorpus(std::move(pairs));
}

ParallelCorpus split_corpus(const ParallelCorpus& corpus, std::size_t dev_count,
                            std::size_t test_count, std::uint64_t seed) {
  if (dev_count + test_count >= corpus.size()) {
    throw Error(ErrorKind::size, "dev (" + std::to_string(dev_count) + ") + test (" +
                                     std::to_string(test_count) +
                                     ") must be smaller than the corpus (" +
                                     std::to_string(corpus.size()) + ")");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Split> labels(corpus.size(), Split::train);
  for (std::size_t k = 0; k < dev_count; ++k) labels[order[k]] = Split::dev;
  for (std::size_t k = dev_count; k < dev_count + test_count; ++k) labels[order[k]] = Split::test;
  return ParallelCorpus(corpus.pairs(), std::move(labels));
}

std::vector<std::string> concat_bilingual(const ParallelCorpus& corpus) {
  if (corpus.empty()) throw Error(ErrorKind::empty_input, "corpus is empty");
  const auto& pairs = corpus.pairs();
  const auto in_train = [&](std::size_t i) {
    return !corpus.is_labeled() || (*corpus.labels())[i] == Split::train;
  };
  std::vector<std::string> stream;
  stream.reserve(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (in_train(i)) stream.push_back(pairs[i].source);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (in_train(i)) stream.push_back(pairs[i].target);
  return stream;
}

std::string normalize(std::string_view text, const TextNormalizationConfig& config) {
  std::string out(text);
  if (config.casefold) out = unicode::casefold(out);
  if (config.form == NormalizationForm::nfc) out = unicode::nfc(out);
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::u32string current;
  const auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(unicode::to_utf8(current));
      current.clear();
    }
  };
  for (char32_t c : unicode::to_u32(text)) {
    if (unicode::is_whitespace(c)) {
      flush();
    } else if (unicode::is_punctuation(c)) {
      flush();
      tokens.push_back(unicode::to_utf8(c));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

void save_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus.pairs()[i];
    const Split split = corpus.is_labeled() ? (*corpus.labels())[i] : Split::train;
    out << p.source << '\t' << p.target << '\t' << to_string(split) << '\n';
  }
}

ParallelCorpus load_tsv(const std::filesystem::path& path) {
  std::vector<SentencePair> pairs;
  std::vector<Split> labels;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(i + 1) +
                                        ": expected source<TAB>target<TAB>split");
    }
    pairs.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1)});
    labels.push_back(parse_split(std::string_view(line).substr(t2 + 1)));
  }
  return ParallelCorpus(std::move(pairs), std::move(labels));
}

}  // namespace lowmt::corpus

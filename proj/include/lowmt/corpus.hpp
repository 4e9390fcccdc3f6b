#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lowmt::corpus {

enum class Split { train, dev, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SentencePair {
  std::string source;
  std::string target;

  bool operator==(const SentencePair&) const = default;
};

// Aligned source/target sentences, optionally labeled with a split.
// Construction enforces the invariants: no pair is blank on both sides, and
// labels (when present) cover every pair.
class ParallelCorpus {
 public:
  ParallelCorpus() = default;
  explicit ParallelCorpus(std::vector<SentencePair> pairs,
                          std::optional<std::vector<Split>> labels = std::nullopt);

  const std::vector<SentencePair>& pairs() const { return pairs_; }
  const std::optional<std::vector<Split>>& labels() const { return labels_; }

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  bool is_labeled() const { return labels_.has_value(); }
  std::size_t count(Split split) const;

  // Indices of pairs with exactly one blank side. They are kept; metrics
  // score them as zero-match hypotheses.
  std::vector<std::size_t> one_sided_pairs() const;

  bool operator==(const ParallelCorpus&) const = default;

 private:
  std::vector<SentencePair> pairs_;
  std::optional<std::vector<Split>> labels_;
};

enum class NormalizationForm { none, nfc };

struct TextNormalizationConfig {
  bool casefold = false;
  NormalizationForm form = NormalizationForm::none;
};

ParallelCorpus load_parallel(const std::filesystem::path& source_path,
                             const std::filesystem::path& target_path);

// Seeded uniform shuffle; the first dev_count shuffled pairs become dev, the
// next test_count become test, the rest train. Pair order is preserved.
ParallelCorpus split_corpus(const ParallelCorpus& corpus, std::size_t dev_count,
                            std::size_t test_count, std::uint64_t seed);

// All (train) source sentences followed by all (train) target sentences.
std::vector<std::string> concat_bilingual(const ParallelCorpus& corpus);

std::string normalize(std::string_view text, const TextNormalizationConfig& config);

// Whitespace split, with every punctuation code point emitted as its own token.
std::vector<std::string> tokenize_words(std::string_view text);

// Labeled TSV persistence: source<TAB>target<TAB>split per line.
void save_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path);
ParallelCorpus load_tsv(const std::filesystem::path& path);

// Reads a UTF-8 file as lines; a single trailing newline is tolerated and a
// trailing '\r' is stripped from each line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace lowmt::corpus

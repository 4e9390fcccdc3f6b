#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lowmt::subword {

// U+2581, prefixed to every word (SentencePiece convention).
inline constexpr char32_t kBoundary = U'▁';
inline constexpr std::string_view kBoundaryUtf8 = "▁";
inline constexpr int kFormatVersion = 1;

// Vocabulary size presets; 16k is the default.
inline constexpr int kVocabPresets[] = {4000, 8000, 16000, 32000};
inline constexpr int kDefaultVocabSize = 16000;

enum class ModelKind { bpe, unigram };

std::string_view to_string(ModelKind kind);

struct Merge {
  std::string left;
  std::string right;

  std::string joined() const { return left + right; }
  auto operator<=>(const Merge&) const = default;
};

struct ScoredPiece {
  std::string piece;
  double log_prob = 0.0;

  bool operator==(const ScoredPiece&) const = default;
};

struct SubwordModel {
  ModelKind kind = ModelKind::bpe;
  // Size of the final vocabulary: characters plus merged pieces (bpe) or the
  // number of scored pieces (unigram).
  int vocab_size = 0;
  // bpe only: the training alphabet, one code point per entry, sorted.
  std::vector<std::string> alphabet;
  // bpe only, in learned order.
  std::vector<Merge> merges;
  // unigram only.
  std::vector<ScoredPiece> pieces;

  bool operator==(const SubwordModel&) const = default;
};

// Splits raw text into boundary-prefixed words: every whitespace code point
// becomes the marker and non-empty text gets one leading marker, so
// "a b" -> ["▁a", "▁b"] and "a  b" -> ["▁a", "▁", "▁b"]. decode() inverts
// this exactly for text whose only whitespace is U+0020.
std::vector<std::u32string> pretokenize(std::string_view text);

// Training on a word frequency table (words without the marker; it is added).
SubwordModel bpe_train_counts(const std::map<std::string, long>& word_counts, int vocab_size);
SubwordModel bpe_train(const std::vector<std::string>& lines, int vocab_size);

std::vector<std::string> bpe_encode(const SubwordModel& model, std::string_view text);

struct UnigramOptions {
  int vocab_size = kDefaultVocabSize;
  int seed_vocab_size = 4 * kDefaultVocabSize;
  double shrink_factor = 0.75;
  int em_iterations = 2;
  int max_piece_length = 8;
};

// Corpus log-likelihood after every EM step, grouped by pruning round. Within
// a round the sequence is non-decreasing.
struct UnigramTrace {
  std::vector<std::vector<double>> rounds;
};

SubwordModel unigram_train(const std::vector<std::string>& lines, const UnigramOptions& options,
                           UnigramTrace* trace = nullptr);

// Viterbi segmentation of one raw string against the model's pieces, with
// no boundary handling. Ties go to the lexicographically smallest sequence.
std::vector<std::string> viterbi_segment(const SubwordModel& model, std::u32string_view text);

std::vector<std::string> unigram_encode(const SubwordModel& model, std::string_view text);

// Dispatches on model.kind.
std::vector<std::string> encode(const SubwordModel& model, std::string_view text);

std::string decode(const std::vector<std::string>& pieces);

void save_model(const SubwordModel& model, const std::filesystem::path& path);
SubwordModel load_model(const std::filesystem::path& path);

std::string serialize_model(const SubwordModel& model);
SubwordModel parse_model(std::string_view text);

}  // namespace lowmt::subword

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lowmt::metrics {

inline constexpr int kBleuOrder = 4;
inline constexpr int kReportVersion = 1;

enum class BleuSmoothing { none, add_one_for_n_ge_2 };

std::string_view to_string(BleuSmoothing smoothing);

struct BleuReport {
  double score = 0.0;
  std::array<double, kBleuOrder> ngram_precisions{};
  std::array<long, kBleuOrder> matches{};
  std::array<long, kBleuOrder> totals{};
  double brevity_penalty = 0.0;
  long hypothesis_length = 0;
  long reference_length = 0;
  BleuSmoothing smoothing = BleuSmoothing::none;
};

struct TerReport {
  double score = 0.0;
  long insertions = 0;
  long deletions = 0;
  long substitutions = 0;
  long shifts = 0;
  long reference_length = 0;

  long total_edits() const { return insertions + deletions + substitutions + shifts; }
};

struct ChrfReport {
  double score = 0.0;
  double beta = 3.0;
  int max_ngram = 6;
  double char_precision = 0.0;
  double char_recall = 0.0;
};

struct MetricConfig {
  bool case_insensitive = false;
  int chrf_max_ngram = 6;
  double chrf_beta = 3.0;
};

struct MetricReport {
  BleuReport bleu;
  TerReport ter;
  ChrfReport chrf;
  MetricConfig config;
};

// Word tokens as every metric sees them: NFC, optional casefold, then the
// punctuation-splitting tokenizer.
std::vector<std::string> metric_tokens(std::string_view text, bool case_insensitive);

BleuReport bleu_corpus(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references, bool case_insensitive = false);

// Single-pair BLEU in [0, 100]. add_one_for_n_ge_2 adds one to the matched
// and total counts of every order n >= 2.
BleuReport bleu_sentence_report(std::string_view hypothesis, std::string_view reference,
                                BleuSmoothing smoothing = BleuSmoothing::add_one_for_n_ge_2,
                                bool case_insensitive = false);
double bleu_sentence(std::string_view hypothesis, std::string_view reference,
                     BleuSmoothing smoothing = BleuSmoothing::add_one_for_n_ge_2,
                     bool case_insensitive = false);

// Block shifts are limited to this many tokens.
inline constexpr int kMaxShiftLength = 10;

// TER on pre-tokenized input.
TerReport ter_tokens(const std::vector<std::string>& hypothesis,
                     const std::vector<std::string>& reference);

TerReport ter(std::string_view hypothesis, std::string_view reference, bool case_insensitive = false);

TerReport ter_corpus(const std::vector<std::string>& hypotheses,
                     const std::vector<std::string>& references, bool case_insensitive = false);

ChrfReport chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                int max_ngram = 6, double beta = 3.0, bool case_insensitive = false);

MetricReport evaluate_all(const std::vector<std::string>& hypotheses,
                          const std::vector<std::string>& references, const MetricConfig& config = {});

nlohmann::json to_json(const MetricReport& report);
// "BLEU 100.0" / "TER 0.00" / "CHRF3 1.00" lines.
std::string render_text(const MetricReport& report);
// Tab-separated BLEU, TER, CHRF3 with table precision.
std::string render_tsv_row(const MetricReport& report);

}  // namespace lowmt::metrics

#include "lowmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "lowmt/corpus.hpp"
#include "lowmt/error.hpp"
#include "lowmt/unicode.hpp"

namespace lowmt::metrics {

namespace {

using Tokens = std::vector<std::string>;

void check_aligned(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size()) {
    throw Error(ErrorKind::alignment, "hypotheses (" + std::to_string(hyps.size()) +
                                          ") and references (" + std::to_string(refs.size()) +
                                          ") differ in length");
  }
  if (hyps.empty()) throw Error(ErrorKind::empty_input, "no segments to score");
}

template <typename Seq>
std::map<Seq, long> ngram_counts(const Seq& seq, std::size_t n) {
  std::map<Seq, long> counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[Seq(seq.begin() + static_cast<std::ptrdiff_t>(i),
                 seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

template <typename Seq>
long clipped_matches(const std::map<Seq, long>& hyp, const std::map<Seq, long>& ref) {
  long m = 0;
  for (const auto& [gram, count] : hyp) {
    const auto it = ref.find(gram);
    if (it != ref.end()) m += std::min(count, it->second);
  }
  return m;
}

struct BleuStats {
  std::array<long, kBleuOrder> matches{};
  std::array<long, kBleuOrder> totals{};
  long hyp_len = 0;
  long ref_len = 0;

  void add(const Tokens& hyp, const Tokens& ref) {
    hyp_len += static_cast<long>(hyp.size());
    ref_len += static_cast<long>(ref.size());
    for (int n = 1; n <= kBleuOrder; ++n) {
      const auto hc = ngram_counts(hyp, static_cast<std::size_t>(n));
      matches[n - 1] += clipped_matches(hc, ngram_counts(ref, static_cast<std::size_t>(n)));
      totals[n - 1] += std::max<long>(0, static_cast<long>(hyp.size()) - n + 1);
    }
  }

  BleuReport finish(BleuSmoothing smoothing) const {
    BleuReport r;
    r.matches = matches;
    r.totals = totals;
    r.hypothesis_length = hyp_len;
    r.reference_length = ref_len;
    r.smoothing = smoothing;
    bool any_zero = false;
    double log_sum = 0.0;
    for (int n = 0; n < kBleuOrder; ++n) {
      double m = static_cast<double>(matches[n]);
      double t = static_cast<double>(totals[n]);
      if (smoothing == BleuSmoothing::add_one_for_n_ge_2 && n >= 1) {
        m += 1.0;
        t += 1.0;
      }
      const double p = t > 0.0 ? m / t : 0.0;
      r.ngram_precisions[n] = p;
      if (p == 0.0) {
        any_zero = true;
      } else {
        log_sum += std::log(p);
      }
    }
    if (hyp_len == 0) {
      r.brevity_penalty = 0.0;
    } else {
      r.brevity_penalty = hyp_len >= ref_len
                              ? 1.0
                              : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    }
    r.score = (any_zero || hyp_len == 0) ? 0.0
                                         : 100.0 * r.brevity_penalty * std::exp(log_sum / kBleuOrder);
    return r;
  }
};

long edit_distance(const Tokens& hyp, const Tokens& ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<long> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<long>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const long sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Insertion/deletion/substitution split of a minimum-cost alignment that
// turns hyp into ref.
void count_edits(const Tokens& hyp, const Tokens& ref, TerReport& out) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::vector<long>> d(n + 1, std::vector<long>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1), d[i - 1][j] + 1,
                          d[i][j - 1] + 1});
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
      if (hyp[i - 1] != ref[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
}

bool occurs_in(const Tokens& ref, const Tokens& cur, std::size_t start, std::size_t len) {
  if (len > ref.size()) return false;
  for (std::size_t j = 0; j + len <= ref.size(); ++j) {
    if (std::equal(cur.begin() + static_cast<std::ptrdiff_t>(start),
                   cur.begin() + static_cast<std::ptrdiff_t>(start + len),
                   ref.begin() + static_cast<std::ptrdiff_t>(j))) {
      return true;
    }
  }
  return false;
}

// cur with the block [start, start+len) removed and reinserted so that it
// begins at index dest of the result.
Tokens shifted(const Tokens& cur, std::size_t start, std::size_t len, std::size_t dest) {
  Tokens rest;
  rest.reserve(cur.size());
  rest.insert(rest.end(), cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(start));
  rest.insert(rest.end(), cur.begin() + static_cast<std::ptrdiff_t>(start + len), cur.end());
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(dest),
              cur.begin() + static_cast<std::ptrdiff_t>(start),
              cur.begin() + static_cast<std::ptrdiff_t>(start + len));
  return rest;
}

std::string strip_whitespace(std::string_view text) {
  std::u32string kept;
  for (char32_t c : unicode::to_u32(text))
    if (!unicode::is_whitespace(c)) kept.push_back(c);
  return unicode::to_utf8(kept);
}

std::string prepare(std::string_view text, bool case_insensitive) {
  return corpus::normalize(text, {case_insensitive, corpus::NormalizationForm::nfc});
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

}  // namespace

std::string_view to_string(BleuSmoothing smoothing) {
  return smoothing == BleuSmoothing::none ? "none" : "add_one_for_n_ge_2";
}

std::vector<std::string> metric_tokens(std::string_view text, bool case_insensitive) {
  return corpus::tokenize_words(prepare(text, case_insensitive));
}

BleuReport bleu_corpus(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references, bool case_insensitive) {
  check_aligned(hypotheses, references);
  BleuStats stats;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    stats.add(metric_tokens(hypotheses[i], case_insensitive),
              metric_tokens(references[i], case_insensitive));
  }
  return stats.finish(BleuSmoothing::none);
}

BleuReport bleu_sentence_report(std::string_view hypothesis, std::string_view reference,
                                BleuSmoothing smoothing, bool case_insensitive) {
  BleuStats stats;
  stats.add(metric_tokens(hypothesis, case_insensitive), metric_tokens(reference, case_insensitive));
  return stats.finish(smoothing);
}

double bleu_sentence(std::string_view hypothesis, std::string_view reference,
                     BleuSmoothing smoothing, bool case_insensitive) {
  return bleu_sentence_report(hypothesis, reference, smoothing, case_insensitive).score;
}

TerReport ter_tokens(const std::vector<std::string>& hypothesis,
                     const std::vector<std::string>& reference) {
  TerReport report;
  report.reference_length = static_cast<long>(reference.size());
  if (reference.empty()) {
    if (!hypothesis.empty()) {
      throw Error(ErrorKind::degenerate_reference, "empty reference with a non-empty hypothesis");
    }
    return report;
  }

  Tokens cur = hypothesis;
  long distance = edit_distance(cur, reference);
  // Greedy descent: take the shift with the largest edit-distance reduction
  // until none reduces it. Equal gains keep the first candidate found.
  while (distance > 0) {
    long best_gain = 0;
    Tokens best;
    for (std::size_t start = 0; start < cur.size(); ++start) {
      for (std::size_t len = 1;
           len <= static_cast<std::size_t>(kMaxShiftLength) && start + len <= cur.size(); ++len) {
        if (!occurs_in(reference, cur, start, len)) break;
        for (std::size_t dest = 0; dest + len <= cur.size(); ++dest) {
          if (dest == start) continue;
          Tokens candidate = shifted(cur, start, len, dest);
          const long gain = distance - edit_distance(candidate, reference);
          if (gain > best_gain) {
            best_gain = gain;
            best = std::move(candidate);
          }
        }
      }
    }
    if (best_gain <= 0) break;
    cur = std::move(best);
    distance -= best_gain;
    ++report.shifts;
  }
  count_edits(cur, reference, report);
  report.score = static_cast<double>(report.total_edits()) / static_cast<double>(report.reference_length);
  return report;
}

TerReport ter(std::string_view hypothesis, std::string_view reference, bool case_insensitive) {
  return ter_tokens(metric_tokens(hypothesis, case_insensitive),
                    metric_tokens(reference, case_insensitive));
}

TerReport ter_corpus(const std::vector<std::string>& hypotheses,
                     const std::vector<std::string>& references, bool case_insensitive) {
  check_aligned(hypotheses, references);
  TerReport total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto r = ter(hypotheses[i], references[i], case_insensitive);
    total.insertions += r.insertions;
    total.deletions += r.deletions;
    total.substitutions += r.substitutions;
    total.shifts += r.shifts;
    total.reference_length += r.reference_length;
  }
  if (total.reference_length == 0) {
    throw Error(ErrorKind::degenerate_reference, "references contain no tokens");
  }
  total.score = static_cast<double>(total.total_edits()) / static_cast<double>(total.reference_length);
  return total;
}

ChrfReport chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                int max_ngram, double beta, bool case_insensitive) {
  check_aligned(hypotheses, references);
  if (max_ngram < 1) throw Error(ErrorKind::configuration, "max_ngram must be >= 1");
  if (!(beta > 0.0)) throw Error(ErrorKind::configuration, "beta must be positive");
  const auto orders = static_cast<std::size_t>(max_ngram);
  std::vector<long> matches(orders, 0), hyp_total(orders, 0), ref_total(orders, 0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = unicode::to_u32(strip_whitespace(prepare(hypotheses[i], case_insensitive)));
    const auto ref = unicode::to_u32(strip_whitespace(prepare(references[i], case_insensitive)));
    for (std::size_t n = 1; n <= orders; ++n) {
      const auto hc = ngram_counts(hyp, n);
      matches[n - 1] += clipped_matches(hc, ngram_counts(ref, n));
      hyp_total[n - 1] += std::max<long>(0, static_cast<long>(hyp.size()) - static_cast<long>(n) + 1);
      ref_total[n - 1] += std::max<long>(0, static_cast<long>(ref.size()) - static_cast<long>(n) + 1);
    }
  }
  // Orders with no n-grams on a side do not enter that side's average.
  double p_sum = 0.0, r_sum = 0.0;
  int p_orders = 0, r_orders = 0;
  for (std::size_t n = 0; n < orders; ++n) {
    if (hyp_total[n] > 0) {
      p_sum += static_cast<double>(matches[n]) / static_cast<double>(hyp_total[n]);
      ++p_orders;
    }
    if (ref_total[n] > 0) {
      r_sum += static_cast<double>(matches[n]) / static_cast<double>(ref_total[n]);
      ++r_orders;
    }
  }
  ChrfReport r;
  r.beta = beta;
  r.max_ngram = max_ngram;
  r.char_precision = p_orders > 0 ? p_sum / p_orders : 0.0;
  r.char_recall = r_orders > 0 ? r_sum / r_orders : 0.0;
  const double b2 = beta * beta;
  const double p = r.char_precision, rec = r.char_recall;
  r.score = (p + rec > 0.0) ? (1.0 + b2) * p * rec / (b2 * p + rec) : 0.0;
  return r;
}

MetricReport evaluate_all(const std::vector<std::string>& hypotheses,
                          const std::vector<std::string>& references, const MetricConfig& config) {
  MetricReport report;
  report.config = config;
  report.bleu = bleu_corpus(hypotheses, references, config.case_insensitive);
  report.ter = ter_corpus(hypotheses, references, config.case_insensitive);
  report.chrf = chrf(hypotheses, references, config.chrf_max_ngram, config.chrf_beta,
                     config.case_insensitive);
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  using nlohmann::json;
  const auto& b = report.bleu;
  const auto& t = report.ter;
  const auto& c = report.chrf;
  return json{
      {"version", kReportVersion},
      {"config",
       {{"case_insensitive", report.config.case_insensitive},
        {"tokenizer", "punctuation-split"},
        {"normalization", "nfc"},
        {"chrf_max_ngram", report.config.chrf_max_ngram},
        {"chrf_beta", report.config.chrf_beta}}},
      {"bleu",
       {{"score", b.score},
        {"ngram_precisions", b.ngram_precisions},
        {"matches", b.matches},
        {"totals", b.totals},
        {"brevity_penalty", b.brevity_penalty},
        {"hypothesis_length", b.hypothesis_length},
        {"reference_length", b.reference_length},
        {"smoothing", std::string(to_string(b.smoothing))}}},
      {"ter",
       {{"score", t.score},
        {"insertions", t.insertions},
        {"deletions", t.deletions},
        {"substitutions", t.substitutions},
        {"shifts", t.shifts},
        {"reference_length", t.reference_length}}},
      {"chrf",
       {{"score", c.score},
        {"beta", c.beta},
        {"max_ngram", c.max_ngram},
        {"char_precision", c.char_precision},
        {"char_recall", c.char_recall}}},
  };
}

std::string render_text(const MetricReport& report) {
  return "BLEU " + fixed(report.bleu.score, 1) + "\nTER " + fixed(report.ter.score, 2) +
         "\nCHRF3 " + fixed(report.chrf.score, 2) + "\n";
}

std::string render_tsv_row(const MetricReport& report) {
  return fixed(report.bleu.score, 1) + "\t" + fixed(report.ter.score, 2) + "\t" +
         fixed(report.chrf.score, 2) + "\n";
}

}  // namespace lowmt::metrics

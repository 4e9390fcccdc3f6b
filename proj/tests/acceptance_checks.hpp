#pragma once
// Checks shared by the acceptance runner and the property suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "humeval_fixtures.hpp"
#include "lowmt/hpo.hpp"
#include "lowmt/humeval.hpp"
#include "lowmt/metrics.hpp"
#include "lowmt/subword.hpp"
#include "lowmt/unicode.hpp"
#include "oracles/bleu_oracle.hpp"
#include "oracles/chrf_oracle.hpp"
#include "oracles/segment_oracle.hpp"
#include "oracles/ter_oracle.hpp"

namespace checks {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

inline std::string random_sentence(std::mt19937_64& rng, const std::vector<std::string>& words, int min_len,
                                   int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::string out;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) out += (i ? " " : "") + words[pick(rng)];
  return out;
}

inline std::vector<std::pair<std::string, std::string>> random_pairs(std::uint64_t seed, std::size_t count,
                                                                     int max_len,
                                                                     const std::vector<std::string>& words) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto ref = random_sentence(rng, words, 1, max_len);
    // Hypotheses are perturbed references so that long n-grams match often.
    auto tokens = oracle::split_ws(ref);
    std::uniform_int_distribution<int> op(0, 3);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    const int edits = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int e = 0; e < edits && !tokens.empty(); ++e) {
      const std::size_t at = std::uniform_int_distribution<std::size_t>(0, tokens.size() - 1)(rng);
      switch (op(rng)) {
        case 0: tokens[at] = words[pick(rng)]; break;
        case 1: tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(at)); break;
        case 2:
          if (static_cast<int>(tokens.size()) < max_len) tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), words[pick(rng)]);
          break;
        default: std::rotate(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(at), tokens.end());
      }
    }
    if (tokens.empty()) tokens.push_back(words[pick(rng)]);
    std::string hyp;
    for (std::size_t k = 0; k < tokens.size(); ++k) hyp += (k ? " " : "") + tokens[k];
    out.emplace_back(hyp, ref);
  }
  return out;
}

inline const std::vector<std::string>& metric_words() {
  static const std::vector<std::string> w = {"an", "cat", "ar", "mata", "ta", "se", "madra", "beag", "mor", "agus"};
  return w;
}

inline Outcome metrics_identity() {
  Outcome o;
  const std::vector<std::string> text = {"Is é seo an chéad abairt.", "teaghlaigh ina gcoimeádtar peataí;",
                                         "An bhfuil tú ag teacht abhaile inniu, a chara?"};
  const auto r = lowmt::metrics::evaluate_all(text, text);
  if (r.bleu.score != 100.0) o.fail("BLEU " + std::to_string(r.bleu.score));
  if (r.ter.score != 0.0) o.fail("TER " + std::to_string(r.ter.score));
  if (r.chrf.score != 1.0) o.fail("ChrF3 " + std::to_string(r.chrf.score));
  const double s = lowmt::metrics::bleu_sentence("teaghlaigh ina gcoimeádtar peataí;",
                                                 "teaghlaigh ina gcoimeádtar peataí;");
  if (s != 100.0) o.fail("sentence BLEU " + std::to_string(s));
  return o;
}

inline Outcome metric_oracles(std::uint64_t seed = 2024) {
  Outcome o;
  const auto pairs = random_pairs(seed, 200, 12, metric_words());
  std::vector<std::string> hyps, refs;
  for (const auto& [h, r] : pairs) {
    hyps.push_back(h);
    refs.push_back(r);
    const double got = lowmt::metrics::bleu_sentence(h, r);
    const double want = oracle::sentence_bleu(h, r);
    if (std::abs(got - want) > 1e-9) o.fail("sentence BLEU differs on '" + h + "' / '" + r + "'");
    const double c_got = lowmt::metrics::chrf({h}, {r}).score;
    const double c_want = oracle::corpus_chrf({h}, {r});
    if (std::abs(c_got - c_want) > 1e-9) o.fail("chrF differs on '" + h + "' / '" + r + "'");
  }
  if (std::abs(lowmt::metrics::bleu_corpus(hyps, refs).score - oracle::corpus_bleu(hyps, refs)) > 1e-9) {
    o.fail("corpus BLEU differs");
  }
  if (std::abs(lowmt::metrics::chrf(hyps, refs).score - oracle::corpus_chrf(hyps, refs)) > 1e-9) {
    o.fail("corpus chrF differs");
  }

  const std::vector<std::string> small = {"a", "b", "c", "d"};
  const auto short_pairs = random_pairs(seed + 1, 200, 6, small);
  int worse = 0;
  for (const auto& [h, r] : short_pairs) {
    const auto ht = oracle::split_ws(h), rt = oracle::split_ws(r);
    const long greedy = lowmt::metrics::ter_tokens(ht, rt).total_edits();
    const long best = oracle::exhaustive_ter_edits(ht, rt);
    if (greedy < best) o.fail("greedy TER beats exhaustive on '" + h + "' / '" + r + "'");
    if (greedy > best) {
      ++worse;
      o.fail("greedy TER " + std::to_string(greedy) + " > exhaustive " + std::to_string(best) + " on '" + h +
             "' / '" + r + "'");
    }
  }
  if (worse > 0) o.detail += " (" + std::to_string(worse) + " of 200 pairs)";
  return o;
}

inline Outcome bpe_merges() {
  Outcome o;
  const auto m = lowmt::subword::bpe_train_counts({{"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}}, 40);
  if (m.merges.size() < 2 || !(m.merges[0] == lowmt::subword::Merge{"e", "s"}) ||
      !(m.merges[1] == lowmt::subword::Merge{"es", "t"})) {
    o.fail("first merges are not (e,s), (es,t)");
  }
  return o;
}

inline std::vector<std::string> training_lines() {
  std::mt19937_64 rng(77);
  const std::vector<std::string> words = {"teach", "madra", "cat", "beag", "mor", "agus", "the", "house",
                                          "dog",   "small", "big", "and",  "níl", "fós", "éan"};
  std::vector<std::string> lines;
  for (int i = 0; i < 300; ++i) lines.push_back(random_sentence(rng, words, 2, 9));
  return lines;
}

inline Outcome subword_roundtrip(std::size_t count = 1000) {
  Outcome o;
  const auto lines = training_lines();
  const auto bpe = lowmt::subword::bpe_train(lines, 80);
  lowmt::subword::UnigramOptions opts;
  opts.vocab_size = 80;
  opts.seed_vocab_size = 600;
  const auto uni = lowmt::subword::unigram_train(lines, opts);

  std::u32string alphabet;
  for (const auto& line : lines)
    for (char32_t c : lowmt::unicode::to_u32(line))
      if (c != U' ' && alphabet.find(c) == std::u32string::npos) alphabet.push_back(c);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size());
  std::uniform_int_distribution<int> len(0, 20);
  for (std::size_t i = 0; i < count; ++i) {
    std::u32string s;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) {
      const auto idx = pick(rng);
      s.push_back(idx == alphabet.size() ? U' ' : alphabet[idx]);
    }
    const auto text = lowmt::unicode::to_utf8(s);
    if (lowmt::subword::decode(lowmt::subword::encode(bpe, text)) != text) o.fail("BPE roundtrip fails on '" + text + "'");
    if (lowmt::subword::decode(lowmt::subword::encode(uni, text)) != text) {
      o.fail("unigram roundtrip fails on '" + text + "'");
    }
  }
  return o;
}

inline Outcome viterbi_exhaustive(std::size_t trials = 300) {
  Outcome o;
  std::mt19937_64 rng(99);
  const std::u32string letters = U"abcd";
  std::uniform_real_distribution<double> score(-8.0, -0.1);
  for (std::size_t t = 0; t < trials; ++t) {
    std::map<std::u32string, double> vocab;
    for (char32_t c : letters) vocab[std::u32string(1, c)] = score(rng);
    std::uniform_int_distribution<int> plen(2, 4);
    std::uniform_int_distribution<std::size_t> pl(0, letters.size() - 1);
    while (vocab.size() < 20) {
      std::u32string p;
      const int n = plen(rng);
      for (int k = 0; k < n; ++k) p.push_back(letters[pl(rng)]);
      vocab.emplace(p, score(rng));
    }
    lowmt::subword::SubwordModel model;
    model.kind = lowmt::subword::ModelKind::unigram;
    for (const auto& [p, s] : vocab) model.pieces.push_back({lowmt::unicode::to_utf8(p), s});
    model.vocab_size = static_cast<int>(model.pieces.size());
    std::uniform_int_distribution<int> slen(1, 10);
    for (int q = 0; q < 5; ++q) {
      std::u32string text;
      const int n = slen(rng);
      for (int k = 0; k < n; ++k) text.push_back(letters[pl(rng)]);
      const auto want = oracle::best_segmentation(text, vocab);
      const auto got = lowmt::subword::viterbi_segment(model, text);
      std::vector<std::string> want_u8;
      for (const auto& p : want->pieces) want_u8.push_back(lowmt::unicode::to_utf8(p));
      if (got != want_u8) o.fail("Viterbi differs from exhaustive argmax on '" + lowmt::unicode::to_utf8(text) + "'");
    }
  }
  return o;
}

inline Outcome em_monotone() {
  Outcome o;
  lowmt::subword::UnigramOptions opts;
  opts.vocab_size = 60;
  opts.seed_vocab_size = 500;
  opts.em_iterations = 3;
  lowmt::subword::UnigramTrace trace;
  lowmt::subword::unigram_train(training_lines(), opts, &trace);
  if (trace.rounds.empty()) o.fail("no EM rounds recorded");
  for (std::size_t r = 0; r < trace.rounds.size(); ++r) {
    const auto& round = trace.rounds[r];
    for (std::size_t i = 1; i < round.size(); ++i) {
      if (round[i] < round[i - 1] - 1e-9) {
        std::ostringstream msg;
        msg << "log-likelihood fell in round " << r << ": " << round[i - 1] << " -> " << round[i];
        o.fail(msg.str());
      }
    }
  }
  return o;
}

inline Outcome hpo_recovery(std::uint64_t seed = 0) {
  Outcome o;
  auto trainer = lowmt::hpo::toy_trainer(seed);
  lowmt::hpo::SearchOptions opts;
  opts.seed = seed;
  const auto space = lowmt::hpo::transformer_space();
  const auto r = lowmt::hpo::staged_search(space, trainer, opts);
  if (r.trials.size() > 24) o.fail(std::to_string(r.trials.size()) + " trials used");
  if (space.exhaustive_size() != 2304) o.fail("exhaustive size " + std::to_string(space.exhaustive_size()));
  for (const auto& [name, value] : lowmt::hpo::transformer_optimum()) {
    if (!lowmt::hpo::same_value(r.best.at(name), value)) {
      o.fail(name + " = " + lowmt::hpo::to_string(r.best.at(name)) + ", expected " + lowmt::hpo::to_string(value));
    }
  }
  return o;
}

inline Outcome emissions() {
  Outcome o;
  lowmt::hpo::EmissionsLedger ledger;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> kwh(0.0, 5.0);
  double sum_kg = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double e = kwh(rng);
    const auto& entry = ledger.record(i, e);
    sum_kg += e * 0.324;
    if (entry.kg_co2 != e * 324.0 / 1000.0) o.fail("entry " + std::to_string(i) + " is not kWh x 0.324");
  }
  if (std::abs(ledger.total_kg() - sum_kg) > 1e-9) o.fail("ledger total differs from the sum");
  lowmt::hpo::EmissionsLedger reported;
  reported.record(0, 30.86);
  if (std::abs(reported.total_kg() - 10.0) > 0.01) o.fail("30.86 kWh gives " + std::to_string(reported.total_kg()) + " kg");
  return o;
}

inline Outcome kappa_fixtures(std::size_t random_sets = 100) {
  using namespace lowmt::humeval;
  Outcome o;
  auto perfect = fixtures::campaign(1);
  fixtures::complete(perfect, [](const std::string&, int seg, const std::string& sys) {
    std::vector<Category> c;
    if (seg % 3 == 0) c.push_back(Category::grammar);
    if (sys == "rnn" && seg % 4 == 1) c.push_back(Category::mistranslation);
    return c;
  });
  for (const auto& sys : perfect.systems())
    for (auto cat : kCategories)
      if (kappa_per_category(perfect, "ann1", "ann2", sys, cat).kappa != 1.0) {
        o.fail("perfect agreement gives kappa != 1 for " + std::string(to_string(cat)));
      }

  auto spelling = fixtures::campaign(2);
  fixtures::complete(spelling, [](const std::string& a, int seg, const std::string& sys) {
    return (a == "ann1" && seg == 7 && sys == "rnn") ? std::vector<Category>{Category::spelling}
                                                       : std::vector<Category>{};
  });
  const auto k = kappa_per_category(spelling, "ann1", "ann2", "rnn", Category::spelling);
  if (k.kappa != 0.0) o.fail("1-vs-0 spelling fixture gives " + std::to_string(k.kappa));
  if (cohen_kappa({0, 4, 0, 16}) != 0.0) o.fail("4-vs-0 fixture is not 0");

  std::mt19937_64 rng(8);
  for (std::size_t t = 0; t < random_sets; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    std::bernoulli_distribution pa(std::uniform_real_distribution<double>(0, 1)(rng));
    std::bernoulli_distribution pb(std::uniform_real_distribution<double>(0, 1)(rng));
    std::vector<bool> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = pa(rng);
      b[i] = pb(rng);
    }
    const double ab = cohen_kappa(contingency(a, b)), ba = cohen_kappa(contingency(b, a));
    if (ab != ba) o.fail("kappa is not symmetric");
    if (ab < -1.0 || ab > 1.0) o.fail("kappa out of [-1, 1]");
    if (cohen_kappa(contingency(a, a)) != 1.0) o.fail("kappa of identical flags is not 1");
  }
  return o;
}

}  // namespace checks

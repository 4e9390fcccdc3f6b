#include "lowmt/subword.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lowmt/error.hpp"
#include "lowmt/unicode.hpp"

namespace lowmt::subword {

namespace {

constexpr double kTieEpsilon = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using WordCounts = std::map<std::u32string, long>;

WordCounts count_words(const std::vector<std::string>& lines) {
  WordCounts counts;
  for (const auto& line : lines)
    for (auto& word : pretokenize(line)) ++counts[std::move(word)];
  return counts;
}

std::set<char32_t> alphabet_of(const WordCounts& words) {
  std::set<char32_t> chars;
  for (const auto& [word, count] : words) chars.insert(word.begin(), word.end());
  return chars;
}

// --- BPE -------------------------------------------------------------------

struct BpeWord {
  std::vector<std::string> symbols;
  long count = 0;
};

// Merges every non-overlapping occurrence of (left, right), scanning left to
// right. Returns true if anything changed.
bool apply_merge(std::vector<std::string>& symbols, const Merge& merge) {
  bool changed = false;
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == merge.left && symbols[i + 1] == merge.right) {
      out.push_back(merge.left + merge.right);
      ++i;
      changed = true;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
  return changed;
}

class PairStatistics {
 public:
  explicit PairStatistics(std::vector<BpeWord>& words) : words_(words) {
    for (std::size_t i = 0; i < words_.size(); ++i) add(i, +1);
  }

  // Highest count first, then the lexicographically smallest pair.
  bool best(Merge& out, long& count) const {
    if (ranking_.empty()) return false;
    count = ranking_.begin()->first;
    out = ranking_.begin()->second;
    return count > 0;
  }

  void merge(const Merge& m) {
    const auto it = where_.find(m);
    if (it == where_.end()) return;
    const std::set<std::size_t> affected = it->second;
    for (std::size_t i : affected) {
      add(i, -1);
      apply_merge(words_[i].symbols, m);
      add(i, +1);
    }
  }

 private:
  struct Order {
    bool operator()(const std::pair<long, Merge>& a, const std::pair<long, Merge>& b) const {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    }
  };

  void bump(const Merge& pair, long delta, std::size_t word, bool adding) {
    long& c = counts_[pair];
    if (c > 0) ranking_.erase({c, pair});
    c += delta;
    if (c > 0) {
      ranking_.insert({c, pair});
    } else {
      counts_.erase(pair);
    }
    if (adding) {
      where_[pair].insert(word);
    } else if (auto w = where_.find(pair); w != where_.end()) {
      w->second.erase(word);
      if (w->second.empty()) where_.erase(w);
    }
  }

  void add(std::size_t i, int sign) {
    const auto& sym = words_[i].symbols;
    for (std::size_t k = 0; k + 1 < sym.size(); ++k) {
      bump({sym[k], sym[k + 1]}, sign * words_[i].count, i, sign > 0);
    }
  }

  std::vector<BpeWord>& words_;
  std::map<Merge, long> counts_;
  std::map<Merge, std::set<std::size_t>> where_;
  std::set<std::pair<long, Merge>, Order> ranking_;
};

SubwordModel train_bpe_words(const WordCounts& counts, int vocab_size) {
  const auto chars = alphabet_of(counts);
  if (vocab_size <= static_cast<int>(chars.size())) {
    throw Error(ErrorKind::configuration,
                "vocab_size " + std::to_string(vocab_size) +
                    " must exceed the number of distinct characters (" +
                    std::to_string(chars.size()) + ")");
  }
  SubwordModel model;
  model.kind = ModelKind::bpe;
  std::set<std::string> vocab;
  for (char32_t c : chars) {
    model.alphabet.push_back(unicode::to_utf8(c));
    vocab.insert(model.alphabet.back());
  }
  std::sort(model.alphabet.begin(), model.alphabet.end());

  std::vector<BpeWord> words;
  words.reserve(counts.size());
  for (const auto& [word, count] : counts) {
    BpeWord w;
    w.count = count;
    for (char32_t c : word) w.symbols.push_back(unicode::to_utf8(c));
    words.push_back(std::move(w));
  }

  PairStatistics stats(words);
  Merge best;
  long best_count = 0;
  while (static_cast<int>(vocab.size()) < vocab_size && stats.best(best, best_count)) {
    model.merges.push_back(best);
    vocab.insert(best.joined());
    stats.merge(best);
  }
  model.vocab_size = static_cast<int>(vocab.size());
  return model;
}

// --- Unigram ---------------------------------------------------------------

struct Edge {
  int start;
  int end;
  int piece;
};

class PieceIndex {
 public:
  PieceIndex(const std::vector<std::u32string>& pieces, const std::vector<double>& log_probs)
      : log_probs_(log_probs) {
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      ids_.emplace(pieces[i], static_cast<int>(i));
      max_len_ = std::max(max_len_, static_cast<int>(pieces[i].size()));
    }
  }

  std::vector<Edge> lattice(std::u32string_view word, int excluded = -1) const {
    std::vector<Edge> edges;
    const int n = static_cast<int>(word.size());
    for (int i = 0; i < n; ++i) {
      for (int len = 1; len <= max_len_ && i + len <= n; ++len) {
        const auto it = ids_.find(std::u32string(word.substr(i, len)));
        if (it != ids_.end() && it->second != excluded) edges.push_back({i, i + len, it->second});
      }
    }
    return edges;
  }

  double log_prob(int id) const { return log_probs_[id]; }

 private:
  std::unordered_map<std::u32string, int> ids_;
  const std::vector<double>& log_probs_;
  int max_len_ = 1;
};

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Best path over a lattice, breaking score ties toward the lexicographically
// smallest piece sequence. Returns piece ids; empty if unreachable (n > 0).
std::vector<int> viterbi(const std::vector<Edge>& edges, int n, const PieceIndex& index,
                         const std::vector<std::u32string>& pieces, bool* reachable) {
  std::vector<std::vector<const Edge*>> outgoing(static_cast<std::size_t>(n));
  for (const auto& e : edges) outgoing[e.start].push_back(&e);
  std::vector<double> best(n + 1, kNegInf);
  std::vector<const Edge*> choice(n + 1, nullptr);
  best[n] = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    for (const Edge* e : outgoing[i]) {
      if (best[e->end] == kNegInf) continue;
      const double score = index.log_prob(e->piece) + best[e->end];
      if (choice[i] == nullptr || score > best[i] + kTieEpsilon) {
        best[i] = score;
        choice[i] = e;
      } else if (std::abs(score - best[i]) <= kTieEpsilon &&
                 pieces[e->piece] < pieces[choice[i]->piece]) {
        best[i] = score;
        choice[i] = e;
      }
    }
  }
  std::vector<int> path;
  *reachable = n == 0 || choice[0] != nullptr;
  if (!*reachable) return path;
  for (int i = 0; i < n; i = choice[i]->end) path.push_back(choice[i]->piece);
  return path;
}

struct EStepResult {
  double log_likelihood = 0.0;
  std::vector<double> expected;
};

EStepResult expectation(const std::vector<std::pair<std::u32string, long>>& words,
                        const std::vector<std::vector<Edge>>& lattices, const PieceIndex& index,
                        std::size_t piece_count) {
  EStepResult r;
  r.expected.assign(piece_count, 0.0);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const int n = static_cast<int>(words[w].first.size());
    const double count = static_cast<double>(words[w].second);
    const auto& edges = lattices[w];
    std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
    alpha[0] = 0.0;
    // edges are sorted by start, so a forward sweep over them is topological
    for (const auto& e : edges) alpha[e.end] = log_add(alpha[e.end], alpha[e.start] + index.log_prob(e.piece));
    beta[n] = 0.0;
    for (auto it = edges.rbegin(); it != edges.rend(); ++it)
      beta[it->start] = log_add(beta[it->start], beta[it->end] + index.log_prob(it->piece));
    const double z = alpha[n];
    r.log_likelihood += count * z;
    for (const auto& e : edges) {
      const double post = std::exp(alpha[e.start] + index.log_prob(e.piece) + beta[e.end] - z);
      r.expected[e.piece] += count * post;
    }
  }
  return r;
}

std::string u8(std::u32string_view s) { return unicode::to_utf8(s); }

class UnigramTrainer {
 public:
  UnigramTrainer(const WordCounts& counts, const UnigramOptions& options)
      : options_(options) {
    for (const auto& kv : counts) words_.push_back(kv);
    const auto chars = alphabet_of(counts);
    if (options.vocab_size <= static_cast<int>(chars.size())) {
      throw Error(ErrorKind::configuration,
                  "vocab_size " + std::to_string(options.vocab_size) +
                      " must exceed the number of distinct characters (" +
                      std::to_string(chars.size()) + ")");
    }
    seed(chars);
  }

  SubwordModel run(UnigramTrace* trace) {
    while (true) {
      rebuild_lattices();
      std::vector<double> round;
      for (int it = 0; it < options_.em_iterations; ++it) {
        const auto e = estep();
        round.push_back(e.log_likelihood);
        maximize(e.expected);
        rebuild_lattices();
      }
      round.push_back(estep().log_likelihood);
      if (trace) trace->rounds.push_back(std::move(round));
      if (static_cast<int>(pieces_.size()) <= options_.vocab_size) break;
      prune();
    }
    return finish();
  }

 private:
  void seed(const std::set<char32_t>& chars) {
    std::map<std::u32string, double> char_freq;
    std::unordered_map<std::u32string, double> substrings;
    for (const auto& [word, count] : words_) {
      for (std::size_t i = 0; i < word.size(); ++i) {
        char_freq[word.substr(i, 1)] += static_cast<double>(count);
        for (std::size_t len = 2;
             len <= static_cast<std::size_t>(options_.max_piece_length) && i + len <= word.size();
             ++len) {
          substrings[word.substr(i, len)] += static_cast<double>(count);
        }
      }
    }
    std::vector<std::pair<std::u32string, double>> ranked(substrings.begin(), substrings.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
      return a.first < b.first;
    });
    const std::size_t room =
        static_cast<std::size_t>(options_.seed_vocab_size) > chars.size()
            ? static_cast<std::size_t>(options_.seed_vocab_size) - chars.size()
            : 0;
    if (ranked.size() > room) ranked.resize(room);

    double total = 0.0;
    for (const auto& [piece, f] : char_freq) {
      pieces_.push_back(piece);
      weights_.push_back(f);
      total += f;
    }
    for (auto& [piece, f] : ranked) {
      pieces_.push_back(std::move(piece));
      weights_.push_back(f);
      total += f;
    }
    log_probs_.resize(pieces_.size());
    for (std::size_t i = 0; i < pieces_.size(); ++i) log_probs_[i] = std::log(weights_[i] / total);
  }

  void rebuild_lattices() {
    index_ = std::make_unique<PieceIndex>(pieces_, log_probs_);
    lattices_.clear();
    lattices_.reserve(words_.size());
    for (const auto& [word, count] : words_) lattices_.push_back(index_->lattice(word));
  }

  EStepResult estep() const { return expectation(words_, lattices_, *index_, pieces_.size()); }

  void maximize(const std::vector<double>& expected) {
    std::vector<std::u32string> pieces;
    std::vector<double> counts;
    double total = 0.0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const bool single = pieces_[i].size() == 1;
      double c = expected[i];
      if (c <= 0.0) {
        if (!single) continue;
        c = std::numeric_limits<double>::min();
      }
      pieces.push_back(pieces_[i]);
      counts.push_back(c);
      total += c;
    }
    pieces_ = std::move(pieces);
    log_probs_.resize(pieces_.size());
    for (std::size_t i = 0; i < pieces_.size(); ++i) log_probs_[i] = std::log(counts[i] / total);
  }

  // Drops the pieces whose removal costs the least corpus likelihood, using
  // the Viterbi-frequency approximation: a removed piece's occurrences are
  // re-segmented by its best alternative segmentation.
  void prune() {
    const std::size_t n = pieces_.size();
    std::vector<double> vfreq(n, 0.0);
    for (std::size_t w = 0; w < words_.size(); ++w) {
      bool ok = false;
      const auto path = viterbi(lattices_[w], static_cast<int>(words_[w].first.size()), *index_,
                                pieces_, &ok);
      for (int id : path) vfreq[id] += static_cast<double>(words_[w].second);
    }
    double total = 0.0;
    for (double f : vfreq) total += f;

    std::vector<double> loss(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
      if (pieces_[i].size() == 1) continue;
      if (vfreq[i] == 0.0) {
        loss[i] = 0.0;
        continue;
      }
      bool ok = false;
      const auto edges = index_->lattice(pieces_[i], static_cast<int>(i));
      const auto alt = viterbi(edges, static_cast<int>(pieces_[i].size()), *index_, pieces_, &ok);
      const double log_total_alt =
          std::log(total + vfreq[i] * (static_cast<double>(alt.size()) - 1.0));
      const double logprob_piece = std::log(vfreq[i]) - std::log(total);
      double logprob_alt = 0.0;
      for (int id : alt) logprob_alt += std::log(vfreq[id] + vfreq[i]);
      logprob_alt -= log_total_alt * static_cast<double>(alt.size());
      loss[i] = vfreq[i] / total * (logprob_piece - logprob_alt);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (loss[a] != loss[b]) return loss[a] > loss[b];
      return pieces_[a] < pieces_[b];
    });
    const auto target = std::max<std::size_t>(
        static_cast<std::size_t>(options_.vocab_size),
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * options_.shrink_factor)));
    std::vector<char> keep(n, 0);
    for (std::size_t k = 0; k < std::min(target, n); ++k) keep[order[k]] = 1;

    std::vector<std::u32string> pieces;
    std::vector<double> log_probs;
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      pieces.push_back(pieces_[i]);
      log_probs.push_back(log_probs_[i]);
      mass += std::exp(log_probs_[i]);
    }
    for (double& lp : log_probs) lp -= std::log(mass);
    pieces_ = std::move(pieces);
    log_probs_ = std::move(log_probs);
  }

  SubwordModel finish() const {
    SubwordModel model;
    model.kind = ModelKind::unigram;
    for (std::size_t i = 0; i < pieces_.size(); ++i) model.pieces.push_back({u8(pieces_[i]), log_probs_[i]});
    std::sort(model.pieces.begin(), model.pieces.end(), [](const auto& a, const auto& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return a.piece < b.piece;
    });
    model.vocab_size = static_cast<int>(model.pieces.size());
    return model;
  }

  UnigramOptions options_;
  std::vector<std::pair<std::u32string, long>> words_;
  std::vector<std::u32string> pieces_;
  std::vector<double> weights_;
  std::vector<double> log_probs_;
  std::unique_ptr<PieceIndex> index_;
  std::vector<std::vector<Edge>> lattices_;
};

// Model pieces decoded once for repeated segmentation.
struct UnigramTables {
  std::vector<std::u32string> pieces;
  std::vector<double> log_probs;
  std::unique_ptr<PieceIndex> index;

  explicit UnigramTables(const SubwordModel& model) {
    if (model.kind != ModelKind::unigram) {
      throw Error(ErrorKind::model_kind, "expected a unigram model");
    }
    for (const auto& p : model.pieces) {
      pieces.push_back(unicode::to_u32(p.piece));
      log_probs.push_back(p.log_prob);
    }
    index = std::make_unique<PieceIndex>(pieces, log_probs);
  }

  std::vector<std::string> segment(std::u32string_view text) const {
    bool ok = false;
    const auto path = viterbi(index->lattice(text), static_cast<int>(text.size()), *index, pieces, &ok);
    if (!ok) {
      for (char32_t c : text) {
        if (index->lattice(std::u32string(1, c)).empty()) {
          throw Error(ErrorKind::coverage, "character '" + unicode::to_utf8(c) + "' is not in the vocabulary");
        }
      }
      throw Error(ErrorKind::coverage, "text cannot be segmented with this vocabulary");
    }
    std::vector<std::string> out;
    out.reserve(path.size());
    for (int id : path) out.push_back(u8(pieces[id]));
    return out;
  }
};

int parse_int(std::string_view s, std::size_t line_no) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected an integer, got '" +
                                      std::string(s) + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::bpe ? "bpe" : "unigram"; }

std::vector<std::u32string> pretokenize(std::string_view text) {
  std::vector<std::u32string> words;
  const std::u32string chars = unicode::to_u32(text);
  if (chars.empty()) return words;
  std::u32string current(1, kBoundary);
  for (char32_t c : chars) {
    if (unicode::is_whitespace(c)) {
      words.push_back(std::move(current));
      current.assign(1, kBoundary);
    } else {
      current.push_back(c);
    }
  }
  words.push_back(std::move(current));
  return words;
}

SubwordModel bpe_train_counts(const std::map<std::string, long>& word_counts, int vocab_size) {
  WordCounts counts;
  for (const auto& [word, count] : word_counts) {
    std::u32string w(1, kBoundary);
    w += unicode::to_u32(word);
    counts[w] += count;
  }
  return train_bpe_words(counts, vocab_size);
}

SubwordModel bpe_train(const std::vector<std::string>& lines, int vocab_size) {
  return train_bpe_words(count_words(lines), vocab_size);
}

std::vector<std::string> bpe_encode(const SubwordModel& model, std::string_view text) {
  if (model.kind != ModelKind::bpe) throw Error(ErrorKind::model_kind, "expected a BPE model");
  std::map<Merge, std::size_t> rank;
  for (std::size_t i = 0; i < model.merges.size(); ++i) rank.emplace(model.merges[i], i);

  std::vector<std::string> out;
  for (const auto& word : pretokenize(text)) {
    std::vector<std::string> symbols;
    for (char32_t c : word) symbols.push_back(unicode::to_utf8(c));
    while (symbols.size() > 1) {
      const Merge* best = nullptr;
      std::size_t best_rank = std::numeric_limits<std::size_t>::max();
      for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
        const auto it = rank.find(Merge{symbols[k], symbols[k + 1]});
        if (it != rank.end() && it->second < best_rank) {
          best_rank = it->second;
          best = &it->first;
        }
      }
      if (best == nullptr) break;
      apply_merge(symbols, *best);
    }
    for (auto& s : symbols) out.push_back(std::move(s));
  }
  return out;
}

SubwordModel unigram_train(const std::vector<std::string>& lines, const UnigramOptions& options,
                           UnigramTrace* trace) {
  if (options.seed_vocab_size <= options.vocab_size) {
    throw Error(ErrorKind::configuration, "seed_vocab_size must exceed vocab_size");
  }
  if (!(options.shrink_factor > 0.0 && options.shrink_factor < 1.0)) {
    throw Error(ErrorKind::configuration, "shrink_factor must lie in (0, 1)");
  }
  if (options.em_iterations < 1) throw Error(ErrorKind::configuration, "em_iterations must be >= 1");
  if (options.max_piece_length < 1) throw Error(ErrorKind::configuration, "max_piece_length must be >= 1");
  const auto counts = count_words(lines);
  if (counts.empty()) throw Error(ErrorKind::empty_input, "no training text");
  UnigramTrainer trainer(counts, options);
  return trainer.run(trace);
}

std::vector<std::string> viterbi_segment(const SubwordModel& model, std::u32string_view text) {
  return UnigramTables(model).segment(text);
}

std::vector<std::string> unigram_encode(const SubwordModel& model, std::string_view text) {
  const UnigramTables tables(model);
  std::vector<std::string> out;
  for (const auto& word : pretokenize(text)) {
    for (auto& piece : tables.segment(word)) out.push_back(std::move(piece));
  }
  return out;
}

std::vector<std::string> encode(const SubwordModel& model, std::string_view text) {
  return model.kind == ModelKind::bpe ? bpe_encode(model, text) : unigram_encode(model, text);
}

std::string decode(const std::vector<std::string>& pieces) {
  std::string joined;
  for (const auto& p : pieces) joined += p;
  std::string out;
  out.reserve(joined.size());
  std::size_t pos = 0;
  while (pos < joined.size()) {
    if (joined.compare(pos, kBoundaryUtf8.size(), kBoundaryUtf8) == 0) {
      out.push_back(' ');
      pos += kBoundaryUtf8.size();
    } else {
      out.push_back(joined[pos++]);
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(0, 1);
  return out;
}

std::string serialize_model(const SubwordModel& model) {
  std::ostringstream out;
  out << to_string(model.kind) << ' ' << model.vocab_size << ' ' << kFormatVersion << '\n';
  if (model.kind == ModelKind::bpe) {
    for (const auto& c : model.alphabet) out << c << '\n';
    for (const auto& m : model.merges) out << m.left << '\t' << m.right << '\n';
  } else {
    char buf[64];
    for (const auto& p : model.pieces) {
      const auto res = std::to_chars(buf, buf + sizeof buf, p.log_prob);
      out << p.piece << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
    }
  }
  return out.str();
}

SubwordModel parse_model(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty()) throw Error(ErrorKind::parse, "line 1: missing header");

  SubwordModel model;
  {
    std::istringstream header{std::string(lines[0])};
    std::string kind, size, version, extra;
    if (!(header >> kind >> size >> version) || (header >> extra)) {
      throw Error(ErrorKind::parse, "line 1: expected 'kind vocab_size version'");
    }
    if (kind == "bpe") {
      model.kind = ModelKind::bpe;
    } else if (kind == "unigram") {
      model.kind = ModelKind::unigram;
    } else {
      throw Error(ErrorKind::parse, "line 1: unknown model kind '" + kind + "'");
    }
    model.vocab_size = parse_int(size, 1);
    if (parse_int(version, 1) != kFormatVersion) {
      throw Error(ErrorKind::parse, "line 1: unsupported format version " + version);
    }
  }

  std::set<std::string> vocab;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = lines[i];
    const auto tab = line.find('\t');
    if (model.kind == ModelKind::bpe) {
      if (tab == std::string_view::npos) {
        if (!model.merges.empty() || !unicode::is_valid_utf8(line) || unicode::length(line) != 1) {
          throw Error(ErrorKind::parse, "line " + std::to_string(line_no) +
                                            ": expected a single character or 'left<TAB>right'");
        }
        model.alphabet.emplace_back(line);
        vocab.emplace(line);
      } else {
        Merge m{std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))};
        if (m.left.empty() || m.right.empty() || m.right.find('\t') != std::string::npos) {
          throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": malformed merge");
        }
        vocab.insert(m.joined());
        model.merges.push_back(std::move(m));
      }
    } else {
      if (tab == std::string_view::npos || tab == 0) {
        throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected 'piece<TAB>logprob'");
      }
      const auto num = line.substr(tab + 1);
      double lp = 0.0;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), lp);
      if (ec != std::errc() || ptr != num.data() + num.size() || lp > 0.0) {
        throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": bad log probability '" +
                                          std::string(num) + "'");
      }
      model.pieces.push_back({std::string(line.substr(0, tab)), lp});
      vocab.emplace(line.substr(0, tab));
    }
  }
  const std::size_t expected = static_cast<std::size_t>(model.vocab_size);
  if (vocab.size() != expected) {
    throw Error(ErrorKind::parse, "line " + std::to_string(lines.size() + 1) + ": truncated model, " +
                                      std::to_string(vocab.size()) + " of " +
                                      std::to_string(expected) + " vocabulary entries");
  }
  return model;
}

void save_model(const SubwordModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << serialize_model(model);
}

SubwordModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace lowmt::subword

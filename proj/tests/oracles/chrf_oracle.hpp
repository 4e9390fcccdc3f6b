#pragma once
// Character n-gram F-score by direct substring enumeration. Inputs are ASCII.

#include <string>
#include <vector>

namespace oracle {

inline std::string no_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != ' ') out += c;
  return out;
}

inline long substring_count(const std::string& text, const std::string& gram) {
  long count = 0;
  if (gram.size() > text.size()) return 0;
  for (std::size_t i = 0; i + gram.size() <= text.size(); ++i)
    if (text.compare(i, gram.size(), gram) == 0) ++count;
  return count;
}

inline double corpus_chrf(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                          int max_n = 6, double beta = 3.0) {
  std::vector<double> match(max_n, 0), hyp_tot(max_n, 0), ref_tot(max_n, 0);
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const std::string h = no_spaces(hyps[s]), r = no_spaces(refs[s]);
    for (int n = 1; n <= max_n; ++n) {
      const std::size_t un = static_cast<std::size_t>(n);
      if (h.size() >= un) hyp_tot[n - 1] += static_cast<double>(h.size() - un + 1);
      if (r.size() >= un) ref_tot[n - 1] += static_cast<double>(r.size() - un + 1);
      std::vector<std::string> seen;
      for (std::size_t i = 0; i + un <= h.size(); ++i) {
        const std::string g = h.substr(i, un);
        bool dup = false;
        for (const auto& x : seen) dup = dup || x == g;
        if (dup) continue;
        seen.push_back(g);
        const long a = substring_count(h, g), b = substring_count(r, g);
        match[n - 1] += static_cast<double>(a < b ? a : b);
      }
    }
  }
  double p = 0, r = 0;
  int pn = 0, rn = 0;
  for (int n = 0; n < max_n; ++n) {
    if (hyp_tot[n] > 0) {
      p += match[n] / hyp_tot[n];
      ++pn;
    }
    if (ref_tot[n] > 0) {
      r += match[n] / ref_tot[n];
      ++rn;
    }
  }
  p = pn ? p / pn : 0;
  r = rn ? r / rn : 0;
  const double b2 = beta * beta;
  return p + r > 0 ? (1 + b2) * p * r / (b2 * p + r) : 0.0;
}

}  // namespace oracle

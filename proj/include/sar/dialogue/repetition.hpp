#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "sar/dialogue/types.hpp"

namespace sar::dialogue {

/// Lowercased runs of letters, digits and apostrophes.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

template <class T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline std::set<std::vector<std::string>> trigrams(const std::vector<std::string>& words) {
  std::set<std::vector<std::string>> out;
  for (std::size_t i = 0; i + 3 <= words.size(); ++i) out.insert({words[i], words[i + 1], words[i + 2]});
  return out;
}

inline double text_similarity(const std::string& a, const std::string& b) {
  const auto wa = tokenize(a);
  const auto wb = tokenize(b);
  if (wa.size() < 3 || wb.size() < 3) {
    if (wa == wb) return 1.0;
    return jaccard(std::set<std::string>(wa.begin(), wa.end()), std::set<std::string>(wb.begin(), wb.end()));
  }
  return jaccard(trigrams(wa), trigrams(wb));
}

/// Highest similarity between the candidate and the last k robot turns.
inline double repetition_score(const std::string& candidate, const DialogueContext& ctx, std::size_t k = 3) {
  double best = 0.0;
  std::size_t seen = 0;
  for (auto it = ctx.history.rbegin(); it != ctx.history.rend() && seen < k; ++it) {
    if (it->role != Role::Robot) continue;
    ++seen;
    best = std::max(best, text_similarity(candidate, it->text));
  }
  return best;
}

}  // namespace sar::dialogue

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace sar::robot {

enum class Intent { Neutral, Affirmative, Negative };

inline constexpr std::array<std::string_view, 10> kAffirmativeWords{"yes",  "yeah", "yep",   "yup",     "ok",
                                                                       "okay", "sure", "please", "alright", "absolutely"};
inline constexpr std::array<std::string_view, 9> kNegativeWords{"no",   "nope", "nah",   "don't", "dont",
                                                                   "not", "stop", "never", "later"};

inline std::vector<std::string> lexicon_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Keyword consent classifier. Any negative word wins over affirmative ones,
/// so "yes, no thanks" declines.
inline Intent classify_intent(std::string_view text) {
  bool yes = false;
  for (const auto& w : lexicon_tokens(text)) {
    if (std::find(kNegativeWords.begin(), kNegativeWords.end(), w) != kNegativeWords.end()) return Intent::Negative;
    yes = yes || std::find(kAffirmativeWords.begin(), kAffirmativeWords.end(), w) != kAffirmativeWords.end();
  }
  return yes ? Intent::Affirmative : Intent::Neutral;
}

inline const char* to_string(Intent i) {
  switch (i) {
    case Intent::Affirmative: return "affirmative";
    case Intent::Negative: return "negative";
    case Intent::Neutral: return "neutral";
  }
  return "neutral";
}

}  // namespace sar::robot

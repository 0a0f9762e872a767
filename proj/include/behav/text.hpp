#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace behav::text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Lowercase, collapse whitespace, trim, strip trailing punctuation and quotes.
inline std::string normalize(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char c : in) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (c == '"' || c == '`') continue;
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() && (std::string_view(".,;:!?'").find(out.back()) != std::string_view::npos ||
                          out.back() == ' '))
    out.pop_back();
  while (!out.empty() && (out.front() == '\'' || out.front() == ' ')) out.erase(out.begin());
  return out;
}

inline bool starts_with_word(std::string_view s, std::string_view prefix) {
  if (!s.starts_with(prefix)) return false;
  return s.size() == prefix.size() || s[prefix.size()] == ' ';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : s) {
    if (is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

inline std::string strip_articles(std::string s) {
  for (std::string_view a : {"the ", "a ", "an "}) {
    if (s.starts_with(a)) return s.substr(a.size());
  }
  return s;
}

// Open-vocabulary label match used by the oracle perception backends:
// either normalized string contains the other, ignoring a leading article.
inline bool labels_match(std::string_view raster_label, std::string_view query) {
  const std::string a = strip_articles(normalize(raster_label));
  const std::string b = strip_articles(normalize(query));
  if (a.empty() || b.empty()) return false;
  return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace behav::text

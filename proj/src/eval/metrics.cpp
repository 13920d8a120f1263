#include "nam/eval/metrics.hpp"

#include <algorithm>
#include <cctype>

namespace nam::eval {

namespace {

std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool last_space = true;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
      last_space = false;
    } else if (!last_space) {
      out.push_back(' ');
      last_space = true;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

std::vector<std::string> normalize_words(const std::string& text) {
  const std::string norm = normalize_text(text);
  std::vector<std::string> words;
  std::string current;
  for (char c : norm) {
    if (c == ' ') {
      words.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(current);
  return words;
}

std::vector<std::string> normalize_chars(const std::string& text) {
  const std::string norm = normalize_text(text);
  std::vector<std::string> chars;
  chars.reserve(norm.size());
  for (char c : norm) chars.emplace_back(1, c);
  return chars;
}

EditCounts edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  // d(i,j): distance between ref[0..i) and hyp[0..j).
  Eigen::MatrixXi d(n + 1, m + 1);
  for (int i = 0; i <= n; ++i) d(i, 0) = i;
  for (int j = 0; j <= m; ++j) d(0, j) = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const int sub = d(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int del = d(i - 1, j) + 1;
      const int ins = d(i, j - 1) + 1;
      d(i, j) = std::min({sub, del, ins});
    }
  }

  EditCounts counts;
  counts.distance = d(n, m);
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d(i, j) == d(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && d(i, j) == d(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

double error_rate(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw ContractError("error_rate: empty reference");
  return 100.0 * edit_distance(ref, hyp).distance / static_cast<double>(ref.size());
}

double wer(const std::string& ref, const std::string& hyp) {
  return error_rate(normalize_words(ref), normalize_words(hyp));
}

double cer(const std::string& ref, const std::string& hyp) {
  return error_rate(normalize_chars(ref), normalize_chars(hyp));
}

}  // namespace nam::eval

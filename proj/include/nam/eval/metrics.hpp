#pragma once

#include "nam/common.hpp"

#include <string>
#include <vector>

namespace nam::eval {

// Case-folds, maps punctuation to spaces, collapses whitespace, splits on
// spaces. Applied to both sides before any comparison.
std::vector<std::string> normalize_words(const std::string& text);

// Character tokens of the normalized text; words are joined with a single
// space and the spaces count as characters.
std::vector<std::string> normalize_chars(const std::string& text);

struct EditCounts {
  int distance = 0;
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
};

// Levenshtein distance with an operation breakdown; counts sum to distance.
EditCounts edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

// 100 * distance / len(ref). The reference-length denominator means rates can
// exceed 100%. Empty references are a contract error.
double error_rate(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

double wer(const std::string& ref, const std::string& hyp);
double cer(const std::string& ref, const std::string& hyp);

}  // namespace nam::eval

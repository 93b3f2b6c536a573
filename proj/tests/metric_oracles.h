// Brute-force reference metrics and an exhaustive enumerator of small
// ranking problems. Shared by the metric tests and the acceptance binary.

#ifndef TGN_TESTS_METRIC_ORACLES_H_
#define TGN_TESTS_METRIC_ORACLES_H_

#include <cstddef>
#include <functional>
#include <vector>

namespace tgn::testing {

// Mean over positives of the precision of the prefix "every item scoring at
// least as high as this positive".
inline double oracle_average_precision(const std::vector<double>& scores,
                                       const std::vector<int>& labels) {
  double sum = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++positives;
    int above = 0;
    int above_pos = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (scores[j] >= scores[i]) {
        ++above;
        above_pos += labels[j];
      }
    }
    sum += static_cast<double>(above_pos) / above;
  }
  return sum / positives;
}

// Fraction of (positive, negative) pairs ordered correctly, ties as 1/2.
inline double oracle_roc_auc(const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  double correct = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) correct += 1.0;
      else if (scores[i] == scores[j]) correct += 0.5;
    }
  }
  return correct / pairs;
}

// Both metrics depend only on the tie groups of the ranking and on how many
// positives each group holds. Visits one representative (scores descending
// by group, positives first inside a group) for every such pattern with n
// items.
inline void for_each_ranking_pattern(
    int n, const std::function<void(const std::vector<double>&,
                                    const std::vector<int>&)>& visit) {
  std::vector<double> scores;
  std::vector<int> labels;
  std::function<void(int, double)> rec = [&](int remaining, double level) {
    if (remaining == 0) {
      visit(scores, labels);
      return;
    }
    for (int size = 1; size <= remaining; ++size) {
      for (int pos = 0; pos <= size; ++pos) {
        for (int k = 0; k < size; ++k) {
          scores.push_back(level);
          labels.push_back(k < pos ? 1 : 0);
        }
        rec(remaining - size, level - 1.0);
        scores.resize(scores.size() - static_cast<std::size_t>(size));
        labels.resize(labels.size() - static_cast<std::size_t>(size));
      }
    }
  };
  rec(n, static_cast<double>(n));
}

}  // namespace tgn::testing

#endif  // TGN_TESTS_METRIC_ORACLES_H_

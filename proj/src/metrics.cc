#include "tgn/metrics.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgn {
namespace {

std::vector<std::size_t> descending_order(std::span<const double> scores,
                                          std::span<const int> labels,
                                          const char* who) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument(std::string(who) + ": " +
                                std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw std::invalid_argument(std::string(who) + ": labels must be 0 or 1");
    }
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

}  // namespace

double average_precision(std::span<const double> scores,
                         std::span<const int> labels) {
  const auto order = descending_order(scores, labels, "average_precision");
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0) {
    throw std::invalid_argument("average_precision: no positive labels");
  }
  double ap = 0.0;
  std::int64_t tp = 0;
  std::int64_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::int64_t group_tp = 0;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_tp += labels[order[j]];
      ++j;
    }
    tp += group_tp;
    seen += static_cast<std::int64_t>(j - i);
    ap += static_cast<double>(group_tp) / static_cast<double>(positives) *
          static_cast<double>(tp) / static_cast<double>(seen);
    i = j;
  }
  return ap;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto order = descending_order(scores, labels, "roc_auc");
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  const auto negatives = static_cast<std::int64_t>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("roc_auc: needs both positive and negative labels");
  }
  // Count (positive, negative) pairs ranked correctly, ties as one half.
  double correct = 0.0;
  std::int64_t negatives_below = negatives;
  std::size_t i = 0;
  while (i < order.size()) {
    std::int64_t group_pos = 0;
    std::int64_t group_neg = 0;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? group_pos : group_neg) += 1;
      ++j;
    }
    negatives_below -= group_neg;
    correct += static_cast<double>(group_pos) *
               (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(group_neg));
    i = j;
  }
  return correct / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace tgn

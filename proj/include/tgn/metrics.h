// Ranking metrics for binary scores.

#ifndef TGN_METRICS_H_
#define TGN_METRICS_H_

#include <span>

namespace tgn {

// Step-wise average precision: sum over score thresholds of
// (recall gain) * precision, with tied scores forming one threshold.
// Throws std::invalid_argument when there are no positives or the inputs
// differ in length.
double average_precision(std::span<const double> scores,
                         std::span<const int> labels);

// Probability that a random positive outranks a random negative, ties
// counting one half. Throws when either class is missing.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace tgn

#endif  // TGN_METRICS_H_

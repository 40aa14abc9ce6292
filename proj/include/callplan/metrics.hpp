#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace callplan {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

/// Binary-classification metrics over the positive (at-risk) class.
/// Undefined quantities (0/0 confusion ratios, single-class AUC) are NaN and
/// serialize as null, never as 0.
struct MetricReport {
    long tp = 0, fp = 0, fn = 0, tn = 0; // at the 0.5 decision threshold
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    std::vector<RocPoint> roc_points;
};

/// Scores a probabilistic predictor against 0/1 labels (1 = positive class).
/// Decisions use p >= 0.5. The ROC sweep uses every distinct probability plus
/// the {0, 1} endpoints; a leading anchor row at sentinel threshold 2 pins the
/// curve at (0, 0). AUC is the trapezoid area under that curve.
MetricReport evaluate(const std::vector<double> &probabilities, const std::vector<int> &labels);

void write_roc_csv(const std::filesystem::path &path, const MetricReport &report,
                   const std::string &provenance);

} // namespace callplan

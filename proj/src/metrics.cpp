#include "callplan/metrics.hpp"

#include "callplan/csv.hpp"
#include "callplan/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace callplan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

MetricReport evaluate(const std::vector<double> &probabilities, const std::vector<int> &labels) {
    if (probabilities.size() != labels.size()) {
        throw Error("evaluate: " + std::to_string(probabilities.size()) + " predictions vs " +
                    std::to_string(labels.size()) + " labels");
    }
    if (probabilities.empty()) {
        throw Error("evaluate: empty input");
    }

    MetricReport report;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const bool predicted = probabilities[i] >= 0.5;
        const bool actual = labels[i] != 0;
        if (predicted && actual) {
            ++report.tp;
        } else if (predicted && !actual) {
            ++report.fp;
        } else if (!predicted && actual) {
            ++report.fn;
        } else {
            ++report.tn;
        }
    }
    const double n = static_cast<double>(probabilities.size());
    report.accuracy = (report.tp + report.tn) / n;
    report.precision = report.tp + report.fp > 0
                           ? static_cast<double>(report.tp) / (report.tp + report.fp)
                           : kNaN;
    report.recall = report.tp + report.fn > 0
                        ? static_cast<double>(report.tp) / (report.tp + report.fn)
                        : kNaN;
    report.f1 = (std::isnan(report.precision) || std::isnan(report.recall) ||
                 report.precision + report.recall == 0.0)
                    ? kNaN
                    : 2.0 * report.precision * report.recall /
                          (report.precision + report.recall);

    // ROC sweep. Thresholds: distinct probabilities plus the {0,1} endpoints,
    // descending; classification is p >= threshold. The anchor row at
    // sentinel threshold 2 is the empty classification, (0, 0).
    const long positives = report.tp + report.fn;
    const long negatives = report.fp + report.tn;
    std::vector<double> thresholds = probabilities;
    thresholds.push_back(0.0);
    thresholds.push_back(1.0);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<std::size_t> order(probabilities.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return probabilities[a] > probabilities[b];
    });

    report.roc_points.push_back(RocPoint{0.0, 0.0, 2.0});
    long cum_tp = 0, cum_fp = 0;
    std::size_t next = 0;
    for (double t : thresholds) {
        while (next < order.size() && probabilities[order[next]] >= t) {
            if (labels[order[next]] != 0) {
                ++cum_tp;
            } else {
                ++cum_fp;
            }
            ++next;
        }
        report.roc_points.push_back(
            RocPoint{negatives > 0 ? static_cast<double>(cum_fp) / negatives : kNaN,
                     positives > 0 ? static_cast<double>(cum_tp) / positives : kNaN, t});
    }

    if (positives == 0 || negatives == 0) {
        report.auc = kNaN;
    } else {
        double auc = 0.0;
        for (std::size_t i = 1; i < report.roc_points.size(); ++i) {
            const RocPoint &a = report.roc_points[i - 1];
            const RocPoint &b = report.roc_points[i];
            auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
        }
        report.auc = auc;
    }
    return report;
}

void write_roc_csv(const std::filesystem::path &path, const MetricReport &report,
                   const std::string &provenance) {
    CsvWriter writer(path, {"fpr", "tpr", "threshold"}, provenance);
    for (const RocPoint &p : report.roc_points) {
        writer.write_row({format_double(p.fpr), format_double(p.tpr), format_double(p.threshold)});
    }
}

} // namespace callplan

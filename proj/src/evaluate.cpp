#include "afc/evaluate.hpp"

#include <algorithm>

#include "afc/error.hpp"

namespace afc {

ContingencyCounts binary_contingency(const std::vector<std::uint8_t>& pred,
                                     const std::vector<std::uint8_t>& truth) {
    if (pred.size() != truth.size()) throw UsageError("binary_contingency: length mismatch");
    ContingencyCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i]) {
            pred[i] ? ++c.tp : ++c.fn;
        } else {
            pred[i] ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

MetricReport metrics(const ContingencyCounts& c) {
    MetricReport r;
    if (c.total() > 0) r.accuracy = static_cast<double>(c.tp + c.tn) / c.total();
    if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
    if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
    if (2 * c.tp + c.fp + c.fn > 0) r.f1 = static_cast<double>(2 * c.tp) / (2 * c.tp + c.fp + c.fn);
    return r;
}

MetricReport multiclass_micro(const std::vector<int>& preds, const std::vector<int>& truth) {
    if (preds.size() != truth.size()) throw UsageError("multiclass_micro: length mismatch");
    // Pooled one-vs-rest: every misclassification is one FP and one FN, so
    // precision = recall = f1 = fraction correct for single-label data.
    long long correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == truth[i]) ++correct;
    }
    MetricReport r;
    if (!preds.empty()) {
        const double frac = static_cast<double>(correct) / preds.size();
        r.accuracy = frac;
        r.precision = frac;
        r.recall = frac;
        r.f1 = frac;
    }
    return r;
}

FpafReport fpaf(const std::vector<std::uint8_t>& regression_pred,
                const std::vector<std::uint8_t>& truth) {
    if (regression_pred.size() != truth.size()) throw UsageError("fpaf: length mismatch");
    FpafReport r;
    for (std::size_t i = 0; i < regression_pred.size(); ++i) {
        if (!regression_pred[i]) continue;
        ++r.predicted_alarms;
        truth[i] ? ++r.regression_tp : ++r.regression_fp;
    }
    if (r.predicted_alarms > 0) {
        r.fpaf_fraction = static_cast<double>(r.regression_fp) / r.predicted_alarms;
    }
    return r;
}

FpafReport final_accuracy(const std::vector<std::uint8_t>& regression_pred,
                          const std::vector<std::uint8_t>& truth_binary,
                          const std::vector<int>& classifier_preds_on_flagged,
                          const std::vector<int>& truth_tags_on_flagged) {
    FpafReport r = fpaf(regression_pred, truth_binary);
    if (static_cast<long long>(classifier_preds_on_flagged.size()) != r.predicted_alarms ||
        classifier_preds_on_flagged.size() != truth_tags_on_flagged.size()) {
        throw UsageError("final_accuracy: classifier predictions must cover exactly the flagged instances");
    }
    std::size_t flagged_idx = 0;
    for (std::size_t i = 0; i < regression_pred.size(); ++i) {
        if (!regression_pred[i]) continue;
        // A false-positive flag has truth tag 0 and can never count correct.
        if (truth_binary[i] && classifier_preds_on_flagged[flagged_idx] ==
                                   truth_tags_on_flagged[flagged_idx] &&
            truth_tags_on_flagged[flagged_idx] > 0) {
            ++r.classifier_correct;
        }
        ++flagged_idx;
    }
    if (r.predicted_alarms > 0) {
        r.final_accuracy = static_cast<double>(r.classifier_correct) / r.predicted_alarms;
    }
    return r;
}

std::vector<PerAlarmRow> per_alarm_breakdown(const std::vector<int>& forecast_tags,
                                             const std::vector<int>& truth_tags) {
    if (forecast_tags.size() != truth_tags.size()) {
        throw UsageError("per_alarm_breakdown: length mismatch");
    }
    std::map<int, PerAlarmRow> rows;
    for (std::size_t i = 0; i < truth_tags.size(); ++i) {
        if (truth_tags[i] <= 0) continue;
        PerAlarmRow& row = rows[truth_tags[i]];
        row.tag = truth_tags[i];
        ++row.occurrences;
        if (forecast_tags[i] == truth_tags[i]) ++row.correct;
    }
    std::vector<PerAlarmRow> out;
    for (auto& [tag, row] : rows) {
        row.accuracy = static_cast<double>(row.correct) / row.occurrences;
        out.push_back(row);
    }
    return out;
}

std::vector<std::vector<long long>> confusion_matrix(const std::vector<int>& preds,
                                                     const std::vector<int>& truth, int num_tags) {
    if (preds.size() != truth.size()) throw UsageError("confusion_matrix: length mismatch");
    std::vector<std::vector<long long>> m(static_cast<std::size_t>(num_tags),
                                          std::vector<long long>(static_cast<std::size_t>(num_tags), 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (truth[i] < 1 || truth[i] > num_tags || preds[i] < 1 || preds[i] > num_tags) {
            throw UsageError("confusion_matrix: tag out of range 1.." + std::to_string(num_tags));
        }
        ++m[static_cast<std::size_t>(truth[i] - 1)][static_cast<std::size_t>(preds[i] - 1)];
    }
    return m;
}

ContingencyFractions contingency_fractions(const std::vector<ContingencyCounts>& per_turbine) {
    if (per_turbine.empty()) throw UsageError("contingency_fractions: empty input");
    ContingencyFractions avg;
    for (const auto& c : per_turbine) {
        const long long basis = c.tp + c.fp + c.fn;
        if (basis == 0) continue;
        avg.fp += static_cast<double>(c.fp) / basis;
        avg.fn += static_cast<double>(c.fn) / basis;
        avg.tp += static_cast<double>(c.tp) / basis;
    }
    const double n = static_cast<double>(per_turbine.size());
    avg.fp /= n;
    avg.fn /= n;
    avg.tp /= n;
    return avg;
}

}  // namespace afc

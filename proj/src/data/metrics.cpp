#include "clb/data.hpp"

#include "clb/errors.hpp"

#include <numeric>

namespace clb {

MetricsReport evaluate_predictions(const LabelMatrix& preds, const LabelMatrix& targets,
                                   const std::vector<std::size_t>& arities) {
    if (preds.size() != targets.size()) {
        throw UsageError("metrics got " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(targets.size()) + " targets");
    }
    const std::size_t n_indicators = std::accumulate(
        arities.begin(), arities.end(), std::size_t{0},
        [](std::size_t acc, std::size_t k) { return acc + (k == 2 ? 1 : k); });

    MetricsReport report;
    report.n_samples = preds.size();
    report.per_label.assign(n_indicators, {});
    std::size_t wrong_slots = 0;
    for (std::size_t n = 0; n < preds.size(); ++n) {
        if (preds[n].size() != arities.size() || targets[n].size() != arities.size()) {
            throw UsageError("sample " + std::to_string(n) + " does not have " +
                             std::to_string(arities.size()) + " outputs");
        }
        std::size_t column = 0;
        for (std::size_t o = 0; o < arities.size(); ++o) {
            const int p = preds[n][o], t = targets[n][o];
            const int k = static_cast<int>(arities[o]);
            if (p < 0 || p >= k || t < 0 || t >= k) {
                throw UsageError("class outside arity at sample " + std::to_string(n) + ", output " +
                                 std::to_string(o));
            }
            wrong_slots += p != t ? 1 : 0;
            const int first_class = k == 2 ? 1 : 0;
            for (int c = first_class; c < k; ++c, ++column) {
                LabelCounts& counts = report.per_label[column];
                const bool pp = p == c, tt = t == c;
                counts.tp += pp && tt;
                counts.fp += pp && !tt;
                counts.fn += !pp && tt;
                counts.tn += !pp && !tt;
            }
        }
    }

    std::size_t tp = 0, fp = 0, fn = 0;
    for (const LabelCounts& c : report.per_label) {
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    report.micro_f1 = denom == 0 ? 1.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
    const std::size_t slots = preds.size() * arities.size();
    report.hamming_loss = slots == 0 ? 0.0 : static_cast<double>(wrong_slots) / static_cast<double>(slots);
    return report;
}

double micro_f1(const LabelMatrix& preds, const LabelMatrix& targets,
                const std::vector<std::size_t>& arities) {
    return evaluate_predictions(preds, targets, arities).micro_f1;
}

double hamming_loss(const LabelMatrix& preds, const LabelMatrix& targets,
                    const std::vector<std::size_t>& arities) {
    return evaluate_predictions(preds, targets, arities).hamming_loss;
}

namespace {

std::vector<std::size_t> binary_arities(const LabelMatrix& preds, const LabelMatrix& targets) {
    const LabelMatrix& ref = preds.empty() ? targets : preds;
    return std::vector<std::size_t>(ref.empty() ? 0 : ref[0].size(), 2);
}

} // namespace

double micro_f1(const LabelMatrix& preds, const LabelMatrix& targets) {
    return micro_f1(preds, targets, binary_arities(preds, targets));
}

double hamming_loss(const LabelMatrix& preds, const LabelMatrix& targets) {
    return hamming_loss(preds, targets, binary_arities(preds, targets));
}

} // namespace clb

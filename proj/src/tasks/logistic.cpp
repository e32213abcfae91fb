#include "clb/tasks.hpp"

#include "clb/errors.hpp"

namespace clb {

double LogisticModel::probability(const Sample& s) const {
    const FeatureVector& x = s.parts.at(part);
    if (x.dim != weights.size()) throw DimensionError("logistic model dimension mismatch");
    double z = bias;
    if (x.sparse) {
        for (std::size_t k = 0; k < x.indices.size(); ++k) z += weights[x.indices[k]] * x.values[k];
    } else {
        for (std::size_t i = 0; i < x.dim; ++i) z += weights[i] * x.values[i];
    }
    return sigmoid_scalar(z);
}

double LogisticModel::accuracy(const Dataset& data, Split split) const {
    const auto idx = data.indices(split);
    if (idx.empty()) return 0.0;
    std::size_t correct = 0;
    for (auto i : idx) {
        const Sample& s = data.samples[i];
        const int predicted = probability(s) > 0.5 ? 1 : 0;
        if (predicted == s.targets.at(output)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

LogisticModel fit_logistic(const Dataset& data, std::size_t part, std::size_t output,
                           std::size_t epochs, double lr) {
    if (part >= data.n_parts()) throw UsageError("no part " + std::to_string(part));
    if (output >= data.n_outputs() || data.arities[output] != 2) {
        throw UsageError("logistic regression needs a binary output");
    }
    const auto idx = data.indices(Split::train);
    if (idx.empty()) throw UsageError("no training samples");

    LogisticModel model;
    model.part = part;
    model.output = output;
    model.weights.assign(data.part_dims[part], 0.0);
    const double inv_n = 1.0 / static_cast<double>(idx.size());
    std::vector<double> grad(model.weights.size());
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (auto i : idx) {
            const Sample& s = data.samples[i];
            const double err = model.probability(s) - s.targets[output];
            const FeatureVector& x = s.parts[part];
            for (std::size_t j = 0; j < x.dim; ++j) grad[j] += err * x.at(j);
            grad_b += err;
        }
        for (std::size_t j = 0; j < grad.size(); ++j) model.weights[j] -= lr * grad[j] * inv_n;
        model.bias -= lr * grad_b * inv_n;
    }
    return model;
}

} // namespace clb

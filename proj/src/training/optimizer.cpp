#include "clb/training.hpp"

#include "clb/errors.hpp"

#include <cmath>

namespace clb {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "rmsprop"; }
std::string to_string(Monitor m) { return m == Monitor::loss ? "loss" : "micro_f1"; }

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "rmsprop") return OptimizerKind::rmsprop;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam or rmsprop)");
}

Monitor parse_monitor(const std::string& s) {
    if (s == "loss") return Monitor::loss;
    if (s == "micro_f1") return Monitor::micro_f1;
    throw ConfigError("unknown monitor '" + s + "' (expected loss or micro_f1)");
}

void TrainConfig::validate() const {
    if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience_epochs < 1) throw ConfigError("patience_epochs must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
    if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
    if (!(improvement_tolerance >= 0.0)) throw ConfigError("improvement_tolerance must be >= 0");
}

double OptimizerState::lr() const { return std::ldexp(lr0, -static_cast<int>(halvings)); }

OptimizerState OptimizerState::init(const ParamStore& store, OptimizerKind kind, double lr0) {
    OptimizerState s;
    s.kind = kind;
    s.lr0 = lr0;
    for (const Parameter& p : store.all()) {
        if (kind == OptimizerKind::adam) s.m.emplace_back(p.value.rows(), p.value.cols());
        s.v.emplace_back(p.value.rows(), p.value.cols());
    }
    return s;
}

namespace {

void check_grads(const OptimizerState& state, const ParamStore& store) {
    if (state.v.size() != store.size()) throw UsageError("optimizer state does not match the store");
    for (std::size_t k = 0; k < store.size(); ++k) {
        const Parameter& p = store.all()[k];
        if (!p.grad.same_shape(p.value) || !state.v[k].same_shape(p.value)) {
            throw DimensionError("gradient or accumulator shape differs for " + p.name);
        }
        if (!p.grad.all_finite()) throw NumericError("non-finite gradient in " + p.name);
    }
}

} // namespace

void adam_step(OptimizerState& state, ParamStore& store) {
    if (state.kind != OptimizerKind::adam) throw UsageError("state was built for rmsprop");
    check_grads(state, store);
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);
    const double lr = state.lr();
    for (std::size_t k = 0; k < store.size(); ++k) {
        Parameter& p = store.all()[k];
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g;
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g * g;
            p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kOptimizerEps);
        }
    }
}

void rmsprop_step(OptimizerState& state, ParamStore& store) {
    if (state.kind != OptimizerKind::rmsprop) throw UsageError("state was built for adam");
    check_grads(state, store);
    ++state.step;
    const double lr = state.lr();
    for (std::size_t k = 0; k < store.size(); ++k) {
        Parameter& p = store.all()[k];
        Tensor& v = state.v[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            v[i] = kRmsDecay * v[i] + (1.0 - kRmsDecay) * g * g;
            p.value[i] -= lr * g / (std::sqrt(v[i]) + kOptimizerEps);
        }
    }
}

void optimizer_step(OptimizerState& state, ParamStore& store) {
    if (state.kind == OptimizerKind::adam) {
        adam_step(state, store);
    } else {
        rmsprop_step(state, store);
    }
}

double class_weight(double frequency) {
    if (!(frequency > 0.0 && frequency <= 1.0)) {
        throw UsageError("class frequency must lie in (0, 1], got " + std::to_string(frequency));
    }
    return std::log(1.0 / frequency);
}

ClassWeights compute_class_weights(const Dataset& data, Split split) {
    const auto idx = data.indices(split);
    if (idx.empty()) throw UsageError("class weights need a non-empty " + to_string(split) + " split");
    const double n = static_cast<double>(idx.size());
    const double floor = 1.0 / (2.0 * n);
    ClassWeights w;
    for (std::size_t o = 0; o < data.n_outputs(); ++o) {
        std::vector<double> counts(data.arities[o], 0.0);
        for (auto i : idx) counts[static_cast<std::size_t>(data.samples[i].targets[o])] += 1.0;
        std::vector<double> row;
        row.reserve(counts.size());
        for (double c : counts) {
            const double f = std::clamp(c / n, floor, 1.0 - floor);
            row.push_back(class_weight(f));
        }
        w.weights.push_back(std::move(row));
    }
    return w;
}

} // namespace clb

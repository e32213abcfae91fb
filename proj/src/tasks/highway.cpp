#include "clb/tasks.hpp"

#include "clb/errors.hpp"

#include <cmath>
#include <random>

namespace clb {

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

} // namespace

HighwayNet init_highway(std::size_t input_dim, std::size_t hidden, std::size_t n_layers,
                        std::size_t arity, std::size_t label_index, Activation act,
                        std::uint64_t seed) {
    if (input_dim == 0 || hidden == 0) throw ConfigError("highway widths must be >= 1");
    if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
    if (arity < 2) throw ConfigError("output arity must be >= 2");

    Rng rng(seed);
    HighwayNet net;
    net.input_dim = input_dim;
    net.hidden = hidden;
    net.n_layers = n_layers;
    net.arity = arity;
    net.label_index = label_index;
    net.activation = act;
    net.w1 = net.store.add("hwn.W1", glorot(hidden, input_dim, rng));
    net.b1 = net.store.add("hwn.b1", Tensor(hidden, 1));
    if (n_layers > 1) {
        net.w = net.store.add("hwn.W", glorot(hidden, hidden, rng));
        net.b = net.store.add("hwn.b", Tensor(hidden, 1));
        net.w_gate = net.store.add("hwn.W_gate", glorot(hidden, hidden, rng));
        net.b_gate = net.store.add("hwn.b_gate", Tensor(hidden, 1, -1.0));
    }
    const std::size_t n_logits = arity == 2 ? 1 : arity;
    net.head_w = net.store.add("hwn.head.W", glorot(n_logits, hidden, rng));
    net.head_b = net.store.add("hwn.head.b", Tensor(n_logits, 1));
    return net;
}

Var hwn_logits(Tape& tape, HighwayNet& net, Var x, const DropoutContext& dropout,
               std::vector<Var>* states) {
    if (x.rows() != net.input_dim) {
        throw DimensionError("highway net reads " + std::to_string(net.input_dim) +
                             " features, got " + std::to_string(x.rows()));
    }
    ParamStore& s = net.store;
    Var h = activate(add_bias(matmul(tape.param(s[net.w1]), x), tape.param(s[net.b1])),
                     net.activation);
    if (states) states->push_back(h);
    h = apply_dropout(h, dropout);
    for (std::size_t t = 2; t <= net.n_layers; ++t) {
        Var candidate = activate(add_bias(matmul(tape.param(s[net.w]), h), tape.param(s[net.b])),
                                 net.activation);
        Var gate = sigmoid(add_bias(matmul(tape.param(s[net.w_gate]), h), tape.param(s[net.b_gate])));
        h = highway(candidate, gate, h);
        if (states) states->push_back(h);
    }
    if (net.n_layers > 1) h = apply_dropout(h, dropout);
    return add_bias(matmul(tape.param(s[net.head_w]), h), tape.param(s[net.head_b]));
}

double hwn_baseline(const FeatureVector& x, std::size_t label_index, HighwayNet& net) {
    if (label_index != net.label_index) {
        throw UsageError("net predicts label " + std::to_string(net.label_index) + ", asked for " +
                         std::to_string(label_index));
    }
    if (net.arity != 2) throw ConfigError("hwn_baseline needs a binary output");
    if (x.dim != net.input_dim) {
        throw DimensionError("highway net reads " + std::to_string(net.input_dim) +
                             " features, got " + std::to_string(x.dim));
    }
    Tape tape;
    Tensor col(x.dim, 1);
    x.scatter_into(col, 0);
    Var logits = hwn_logits(tape, net, tape.constant(std::move(col)));
    return sigmoid(logits).value()(0, 0);
}

Prediction HighwayNetwork::forward(Tape& tape, std::span<const Sample* const> batch,
                                   const DropoutContext& dropout) {
    if (batch.empty()) throw UsageError("forward needs a non-empty batch");
    Var x = tape.constant(batch_concat(batch, net_.input_dim));
    OutputPrediction out;
    out.logits = hwn_logits(tape, net_, x, dropout);
    out.probs = net_.arity == 2 ? sigmoid(out.logits) : softmax(out.logits);
    out.arity = net_.arity;
    out.output = net_.label_index;
    Prediction pred;
    pred.outputs.push_back(std::move(out));
    return pred;
}

} // namespace clb

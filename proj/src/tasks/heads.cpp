#include "clb/tasks.hpp"

#include "clb/errors.hpp"

#include <algorithm>
#include <string>

namespace clb {

Prediction predict(Tape& tape, BundleParams& params, const ForwardTrace& trace,
                   const DropoutContext& dropout) {
    const TaskSpec& task = params.task;
    if (trace.central.empty()) throw UsageError("predict needs a forward trace");
    const bool on_central = params.heads_on_central();
    if (!on_central && trace.n_minicolumns() != task.n_outputs()) {
        throw DimensionError("trace has " + std::to_string(trace.n_minicolumns()) +
                             " mini-columns for " + std::to_string(task.n_outputs()) + " outputs");
    }
    if (params.head_of_output.size() != task.n_outputs()) {
        throw ConfigError("head table does not cover every output");
    }

    Var central_top;
    if (on_central) central_top = apply_dropout(trace.central.back(), dropout);

    Prediction pred;
    pred.outputs.reserve(task.n_outputs());
    for (std::size_t o = 0; o < task.n_outputs(); ++o) {
        const Head& head = params.heads.at(params.head_of_output[o]);
        if (head.arity != task.output_arities[o]) {
            throw ConfigError("head arity " + std::to_string(head.arity) + " does not match output " +
                              std::to_string(o) + " arity " +
                              std::to_string(task.output_arities[o]));
        }
        Var h = on_central ? central_top : apply_dropout(trace.mini[o].back(), dropout);
        OutputPrediction out;
        out.logits = add_bias(matmul(tape.param(params.store[head.w]), h),
                              tape.param(params.store[head.b]));
        out.probs = head.arity == 2 ? sigmoid(out.logits) : softmax(out.logits);
        out.arity = head.arity;
        out.output = o;
        pred.outputs.push_back(std::move(out));
    }
    return pred;
}

std::vector<std::vector<int>> Prediction::decide() const {
    const std::size_t batch = batch_size();
    std::vector<std::vector<int>> out(batch, std::vector<int>(outputs.size(), 0));
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        const Tensor& p = outputs[k].probs.value();
        for (std::size_t b = 0; b < batch; ++b) {
            if (outputs[k].arity == 2) {
                out[b][k] = p(0, b) > threshold ? 1 : 0;
                continue;
            }
            std::size_t best = 0;
            for (std::size_t c = 1; c < p.rows(); ++c) {
                if (p(c, b) > p(best, b)) best = c;
            }
            out[b][k] = static_cast<int>(best);
        }
    }
    return out;
}

ClassWeights ClassWeights::unit(const std::vector<std::size_t>& arities) {
    ClassWeights w;
    for (auto k : arities) w.weights.emplace_back(k, 1.0);
    return w;
}

std::vector<std::vector<int>> targets_of(std::span<const Sample* const> batch) {
    std::vector<std::vector<int>> out;
    out.reserve(batch.size());
    for (const Sample* s : batch) out.push_back(s->targets);
    return out;
}

Var multilabel_loss(const Prediction& pred, const std::vector<std::vector<int>>& targets,
                    const ClassWeights& weights) {
    if (pred.outputs.empty()) throw UsageError("loss over an empty prediction");
    Tape* tape = pred.outputs[0].logits.tape();
    const std::size_t batch = pred.batch_size();
    if (targets.size() != batch) {
        throw DimensionError("loss got " + std::to_string(targets.size()) + " targets for batch " +
                             std::to_string(batch));
    }

    Var total;
    for (const OutputPrediction& op : pred.outputs) {
        const std::size_t k = op.arity;
        Tensor w(1, batch);
        Tensor mask = k == 2 ? Tensor(1, batch) : Tensor(k, batch);
        for (std::size_t b = 0; b < batch; ++b) {
            if (op.output >= targets[b].size()) {
                throw DimensionError("sample " + std::to_string(b) + " has no target for output " +
                                     std::to_string(op.output));
            }
            const int y = targets[b][op.output];
            if (y < 0 || static_cast<std::size_t>(y) >= k) {
                throw SchemaError("target " + std::to_string(y) + " outside arity " +
                                  std::to_string(k));
            }
            const double wy = weights.at(op.output, static_cast<std::size_t>(y));
            if (!(wy > 0.0)) throw UsageError("class weights must be positive");
            w(0, b) = wy;
            if (k == 2) {
                mask(0, b) = y == 1 ? 1.0 : -1.0;
            } else {
                mask(static_cast<std::size_t>(y), b) = 1.0;
            }
        }
        Var p_true;
        if (k == 2) {
            // P(y=0) = sigmoid(-z) keeps precision for confident negatives.
            p_true = sigmoid(hadamard(op.logits, tape->constant(std::move(mask))));
        } else {
            p_true = matmul(tape->constant(Tensor(1, k, 1.0)),
                            hadamard(op.probs, tape->constant(std::move(mask))));
        }
        Var term = sum(hadamard(log_clamped(p_true, kProbabilityFloor), tape->constant(std::move(w))));
        total = total.valid() ? add(total, term) : term;
    }
    return scale(total, -1.0);
}

} // namespace clb

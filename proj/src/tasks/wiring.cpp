#include "clb/tasks.hpp"

#include "clb/errors.hpp"

#include <algorithm>

namespace clb {

FirstLayerStates init_multi_output(Tape& tape, BundleParams& params, Var x) {
    if (!params.output_first) throw ConfigError("model has no output-side first layer");
    const OutputFirstLayer& first = *params.output_first;
    ParamStore& s = params.store;
    const Activation act = params.config.activation;
    const std::size_t n_labels = params.task.n_outputs();
    const bool embedded = first.embedding.valid();
    if (params.task.use_label_embedding && !embedded) {
        throw ConfigError("label embedding requested but the model has no embedding matrix");
    }

    std::vector<Var> label_inputs;
    Var central_pre = add_bias(matmul(tape.param(s[first.w_x]), x), tape.param(s[first.b_c]));
    if (embedded) {
        label_inputs = embed_labels(tape.param(s[first.embedding]), n_labels);
        Var u_e = tape.param(s[first.u_e]);
        std::vector<Var> into;
        into.reserve(n_labels);
        for (const Var& e : label_inputs) into.push_back(matmul(u_e, e));
        central_pre = add_bias(central_pre, mean_of(into));
    }

    FirstLayerStates out;
    out.central = activate(central_pre, act);
    out.minis.reserve(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) {
        const auto& m = first.mini(i);
        Var pre = add_bias(matmul(tape.param(s[m.v_x]), x), tape.param(s[m.b]));
        if (embedded) pre = add_bias(pre, matmul(tape.param(s[m.w_e]), label_inputs[i]));
        out.minis.push_back(activate(pre, act));
    }
    return out;
}

FirstLayerStates init_multi_input(Tape& tape, BundleParams& params, std::span<const Var> parts) {
    if (!params.input_first) throw ConfigError("model has no input-side first layer");
    if (parts.empty()) throw UsageError("init_multi_input needs at least one part");
    const InputFirstLayer& first = *params.input_first;
    if (first.projections.size() > 1 && parts.size() != first.projections.size()) {
        throw DimensionError("model reads " + std::to_string(first.projections.size()) +
                             " parts, got " + std::to_string(parts.size()));
    }
    ParamStore& s = params.store;
    const Activation act = params.config.activation;

    FirstLayerStates out;
    std::vector<Var> into;
    into.reserve(parts.size());
    out.minis.reserve(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        Var projection = tape.param(s[first.projection(i)]);
        if (parts[i].rows() != projection.cols()) {
            throw DimensionError("part " + std::to_string(i) + " has dimension " +
                                 std::to_string(parts[i].rows()) + ", expected " +
                                 std::to_string(projection.cols()));
        }
        Var p = matmul(projection, parts[i]);
        const auto& m = first.mini(i);
        out.minis.push_back(
            activate(add_bias(matmul(tape.param(s[m.w]), p), tape.param(s[m.b])), act));
        into.push_back(matmul(tape.param(s[m.u]), p));
    }
    out.central = activate(add_bias(mean_of(into), tape.param(s[first.b_c])), act);
    return out;
}

FirstLayerStates compose_mimo(Tape& tape, BundleParams& params, const ForwardTrace& input_stage) {
    if (params.task.kind != TaskKind::multi_in_out) {
        throw ConfigError("compose_mimo needs a multi_in_out model");
    }
    if (input_stage.central.empty()) throw UsageError("input stage has not run");
    Var top = input_stage.central.back();
    if (top.rows() != params.config.d_central) {
        throw DimensionError("input stage top state has " + std::to_string(top.rows()) +
                             " rows, output stage reads " + std::to_string(params.config.d_central));
    }
    return init_multi_output(tape, params, top);
}

namespace {

void drop_states(FirstLayerStates& states, const DropoutContext& dropout) {
    states.central = apply_dropout(states.central, dropout);
    for (auto& m : states.minis) m = apply_dropout(m, dropout);
}

std::vector<Var> input_parts(Tape& tape, const BundleParams& params,
                             std::span<const Sample* const> batch) {
    const TaskSpec& task = params.task;
    std::size_t n_parts = task.n_inputs();
    if (task.variable_parts) {
        n_parts = batch[0]->parts.size();
        for (const Sample* s : batch) {
            if (s->parts.size() != n_parts) {
                throw UsageError("bag batch mixes instance counts " + std::to_string(n_parts) +
                                 " and " + std::to_string(s->parts.size()));
            }
        }
        if (n_parts == 0) throw SchemaError("empty bag");
    }
    std::vector<Var> parts;
    parts.reserve(n_parts);
    for (std::size_t i = 0; i < n_parts; ++i) {
        const std::size_t dim = task.variable_parts ? task.input_dims[0] : task.input_dims[i];
        parts.push_back(tape.constant(batch_part(batch, i, dim)));
    }
    return parts;
}

} // namespace

BundleForward forward(Tape& tape, BundleParams& params, std::span<const Sample* const> batch,
                      const DropoutContext& dropout) {
    if (batch.empty()) throw UsageError("forward needs a non-empty batch");
    const TaskSpec& task = params.task;
    const Activation act = params.config.activation;
    BundleForward out;

    if (task.kind == TaskKind::multi_output) {
        Var x = tape.constant(batch_part(batch, 0, task.input_dims[0]));
        FirstLayerStates first = init_multi_output(tape, params, x);
        drop_states(first, dropout);
        out.output_trace = bundle_forward(tape, params.store, *params.output_stage, act,
                                          first.central, std::move(first.minis));
        out.prediction = predict(tape, params, *out.output_trace, dropout);
        return out;
    }

    std::vector<Var> parts = input_parts(tape, params, batch);
    FirstLayerStates first = init_multi_input(tape, params, parts);
    drop_states(first, dropout);
    out.input_trace = bundle_forward(tape, params.store, *params.input_stage, act, first.central,
                                     std::move(first.minis));
    if (task.kind == TaskKind::multi_input) {
        out.prediction = predict(tape, params, *out.input_trace, dropout);
        return out;
    }
    FirstLayerStates second = compose_mimo(tape, params, *out.input_trace);
    drop_states(second, dropout);
    out.output_trace = bundle_forward(tape, params.store, *params.output_stage, act,
                                      second.central, std::move(second.minis));
    out.prediction = predict(tape, params, *out.output_trace, dropout);
    return out;
}

Prediction BundleNetwork::forward(Tape& tape, std::span<const Sample* const> batch,
                                  const DropoutContext& dropout) {
    return clb::forward(tape, params_, batch, dropout).prediction;
}

TaskSpec task_from_dataset(const Dataset& data, std::size_t projection_dim,
                           bool use_label_embedding) {
    TaskSpec task;
    task.output_arities = data.arities;
    task.use_label_embedding = use_label_embedding;
    switch (data.kind) {
    case DatasetKind::multilabel:
        task.kind = TaskKind::multi_output;
        task.input_dims = data.part_dims;
        break;
    case DatasetKind::multiview:
    case DatasetKind::bags:
        task.kind = data.n_outputs() == 1 ? TaskKind::multi_input : TaskKind::multi_in_out;
        task.input_dims = data.part_dims;
        task.projection_dim = projection_dim;
        task.variable_parts = data.kind == DatasetKind::bags;
        break;
    }
    return task;
}

} // namespace clb

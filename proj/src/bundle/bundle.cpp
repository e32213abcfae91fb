#include "clb/bundle.hpp"

#include "clb/errors.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <random>

namespace clb {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

std::string to_string(TaskKind k) {
    switch (k) {
    case TaskKind::multi_output: return "multi_output";
    case TaskKind::multi_input: return "multi_input";
    case TaskKind::multi_in_out: return "multi_in_out";
    }
    return "?";
}

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + s + "' (expected relu or tanh)");
}

TaskKind parse_task_kind(const std::string& s) {
    if (s == "multi_output") return TaskKind::multi_output;
    if (s == "multi_input") return TaskKind::multi_input;
    if (s == "multi_in_out") return TaskKind::multi_in_out;
    throw ConfigError("unknown task kind '" + s + "'");
}

Var activate(Var a, Activation act) { return act == Activation::relu ? relu(a) : tanh(a); }

void TaskSpec::validate() const {
    if (input_dims.empty()) throw ConfigError("task has no input parts");
    if (output_arities.empty()) throw ConfigError("task has no outputs");
    for (auto d : input_dims) {
        if (d == 0) throw ConfigError("input part dimension must be >= 1");
    }
    for (auto k : output_arities) {
        if (k < 2) throw ConfigError("output arity must be >= 2");
    }
    switch (kind) {
    case TaskKind::multi_output:
        if (input_dims.size() != 1 || variable_parts) {
            throw ConfigError("multi_output task reads exactly one input part");
        }
        break;
    case TaskKind::multi_input:
        if (output_arities.size() != 1) throw ConfigError("multi_input task predicts exactly one output");
        if (use_label_embedding) throw ConfigError("label embedding needs output mini-columns");
        break;
    case TaskKind::multi_in_out:
        break;
    }
    if (kind != TaskKind::multi_output && projection_dim == 0) {
        throw ConfigError("multi-input wirings need projection_dim >= 1");
    }
    if (variable_parts && input_dims.size() != 1) {
        throw ConfigError("variable part counts need a single instance dimension");
    }
}

void BundleConfig::validate() const {
    if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
    if (d_central < 1 || d_mini < 1) throw ConfigError("column widths must be >= 1");
}

void validate(const BundleConfig& config, const TaskSpec& task) {
    config.validate();
    task.validate();
    if (task.use_label_embedding != (config.embed_dim > 0)) {
        throw ConfigError("embed_dim must be > 0 exactly when label embedding is in use");
    }
    if (task.use_label_embedding && !config.share_minicolumns) {
        throw ConfigError("label embedding requires share_minicolumns");
    }
    const bool input_shared = task.kind == TaskKind::multi_in_out ? config.share_input_minicolumns
                                                                    : config.share_minicolumns;
    if (task.kind != TaskKind::multi_output) {
        if (task.variable_parts && !input_shared) {
            throw ConfigError("variable part counts require shared input mini-columns");
        }
    }
    if (config.n_minicolumns != 0) {
        if (task.kind == TaskKind::multi_input) {
            if (task.variable_parts || config.n_minicolumns != task.n_inputs()) {
                throw ConfigError("n_minicolumns does not match the number of input parts");
            }
        } else if (config.n_minicolumns != task.n_outputs()) {
            throw ConfigError("n_minicolumns does not match the number of outputs");
        }
    }
}

const LayerBlock& Stage::block(std::size_t layer) const {
    if (layer < 2 || layer > n_layers) {
        throw UsageError("layer " + std::to_string(layer) + " has no block (T=" +
                         std::to_string(n_layers) + ")");
    }
    return blocks.size() == 1 ? blocks[0] : blocks.at(layer - 2);
}

StepResult central_step(Tape& tape, ParamStore& store, const LayerBlock& block, Var h_c_prev,
                        std::span<const Var> h_mini_prev, Activation act) {
    if (h_mini_prev.empty()) throw UsageError("central_step needs at least one mini-column");
    if (block.minis.size() > 1 && block.minis.size() != h_mini_prev.size()) {
        throw DimensionError("central_step got " + std::to_string(h_mini_prev.size()) +
                             " mini-columns, block has " + std::to_string(block.minis.size()));
    }
    std::vector<Var> into, into_gate;
    into.reserve(h_mini_prev.size());
    into_gate.reserve(h_mini_prev.size());
    for (std::size_t i = 0; i < h_mini_prev.size(); ++i) {
        const MiniBlock& m = block.mini(i);
        into.push_back(matmul(tape.param(store[m.u]), h_mini_prev[i]));
        into_gate.push_back(matmul(tape.param(store[m.u_gate]), h_mini_prev[i]));
    }
    const CentralBlock& c = block.central;
    Var pre = add(matmul(tape.param(store[c.w]), h_c_prev), mean_of(into));
    Var candidate = activate(add_bias(pre, tape.param(store[c.b])), act);
    Var pre_gate = add(matmul(tape.param(store[c.w_gate]), h_c_prev), mean_of(into_gate));
    Var gate = sigmoid(add_bias(pre_gate, tape.param(store[c.b_gate])));
    return {highway(candidate, gate, h_c_prev), candidate, gate};
}

StepResult mini_step(Tape& tape, ParamStore& store, const MiniBlock& block, Var h_i_prev,
                     Var h_c_prev, Activation act) {
    Var pre = add(matmul(tape.param(store[block.w]), h_i_prev),
                  matmul(tape.param(store[block.v]), h_c_prev));
    Var candidate = activate(add_bias(pre, tape.param(store[block.b])), act);
    Var pre_gate = add(matmul(tape.param(store[block.w_gate]), h_i_prev),
                       matmul(tape.param(store[block.v_gate]), h_c_prev));
    Var gate = sigmoid(add_bias(pre_gate, tape.param(store[block.b_gate])));
    return {highway(candidate, gate, h_i_prev), candidate, gate};
}

ForwardTrace bundle_forward(Tape& tape, ParamStore& store, const Stage& stage, Activation act,
                            Var h_c_1, std::vector<Var> h_mini_1) {
    const std::size_t m = h_mini_1.size();
    if (m == 0) throw UsageError("bundle_forward needs at least one mini-column");
    if (stage.n_minicolumns != 0 && stage.n_minicolumns != m) {
        throw DimensionError("bundle expects " + std::to_string(stage.n_minicolumns) +
                             " mini-columns, got " + std::to_string(m));
    }
    if (stage.n_minicolumns == 0 && !stage.shared_minicolumns) {
        throw DimensionError("variable mini-column count needs shared mini-columns");
    }
    if (h_c_1.rows() != stage.d_central) {
        throw DimensionError("central state has " + std::to_string(h_c_1.rows()) +
                             " rows, bundle width is " + std::to_string(stage.d_central));
    }
    for (const Var& h : h_mini_1) {
        if (h.rows() != stage.d_mini || h.cols() != h_c_1.cols()) {
            throw DimensionError("mini-column state " + h.value().shape_string() +
                                 " does not match width " + std::to_string(stage.d_mini) +
                                 " and batch " + std::to_string(h_c_1.cols()));
        }
    }

    ForwardTrace trace;
    trace.central.push_back(h_c_1);
    trace.mini.resize(m);
    trace.mini_gate.resize(m);
    trace.mini_candidate.resize(m);
    for (std::size_t i = 0; i < m; ++i) trace.mini[i].push_back(h_mini_1[i]);

    std::vector<Var> prev_minis = std::move(h_mini_1);
    for (std::size_t t = 2; t <= stage.n_layers; ++t) {
        const LayerBlock& block = stage.block(t);
        Var prev_central = trace.central.back();
        StepResult c = central_step(tape, store, block, prev_central, prev_minis, act);
        std::vector<Var> next_minis(m);
        for (std::size_t i = 0; i < m; ++i) {
            StepResult s = mini_step(tape, store, block.mini(i), prev_minis[i], prev_central, act);
            next_minis[i] = s.state;
            trace.mini[i].push_back(s.state);
            trace.mini_gate[i].push_back(s.gate);
            trace.mini_candidate[i].push_back(s.candidate);
        }
        trace.central.push_back(c.state);
        trace.central_gate.push_back(c.gate);
        trace.central_candidate.push_back(c.candidate);
        prev_minis = std::move(next_minis);
    }
    return trace;
}

std::vector<Var> embed_labels(Var embedding, std::size_t n_labels) {
    if (embedding.cols() != n_labels) {
        throw DimensionError("embedding has " + std::to_string(embedding.cols()) +
                             " columns, expected " + std::to_string(n_labels) + " labels");
    }
    std::vector<Var> out;
    out.reserve(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) out.push_back(column_of(embedding, i));
    return out;
}

// Initialisation -----------------------------------------------------------

namespace {

constexpr double kGateBias = -1.0;

class Initializer {
public:
    Initializer(ParamStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

    ParamId weight(const std::string& name, std::size_t rows, std::size_t cols) {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        std::uniform_real_distribution<double> dist(-a, a);
        Tensor t(rows, cols);
        for (auto& v : t.data()) v = dist(rng_);
        return store_.add(name, std::move(t));
    }

    ParamId bias(const std::string& name, std::size_t rows, double fill = 0.0) {
        return store_.add(name, Tensor(rows, 1, fill));
    }

private:
    ParamStore& store_;
    std::mt19937_64 rng_;
};

Stage make_stage(Initializer& init, const std::string& prefix, std::size_t n_layers,
                 std::size_t n_minicolumns, bool shared, bool share_layers, std::size_t d_c,
                 std::size_t d_m) {
    Stage stage;
    stage.n_layers = n_layers;
    stage.n_minicolumns = n_minicolumns;
    stage.shared_minicolumns = shared;
    stage.d_central = d_c;
    stage.d_mini = d_m;
    const std::size_t n_blocks = n_layers <= 1 ? 0 : (share_layers ? 1 : n_layers - 1);
    const std::size_t n_minis = shared ? 1 : n_minicolumns;
    for (std::size_t k = 0; k < n_blocks; ++k) {
        const std::string p = prefix + ".block" + std::to_string(k);
        LayerBlock block;
        block.central.w = init.weight(p + ".central.W", d_c, d_c);
        block.central.b = init.bias(p + ".central.b", d_c);
        block.central.w_gate = init.weight(p + ".central.W_gate", d_c, d_c);
        block.central.b_gate = init.bias(p + ".central.b_gate", d_c, kGateBias);
        for (std::size_t i = 0; i < n_minis; ++i) {
            const std::string q = p + ".mini" + std::to_string(i);
            MiniBlock m;
            m.u = init.weight(q + ".U", d_c, d_m);
            m.u_gate = init.weight(q + ".U_gate", d_c, d_m);
            m.w = init.weight(q + ".W", d_m, d_m);
            m.v = init.weight(q + ".V", d_m, d_c);
            m.b = init.bias(q + ".b", d_m);
            m.w_gate = init.weight(q + ".W_gate", d_m, d_m);
            m.v_gate = init.weight(q + ".V_gate", d_m, d_c);
            m.b_gate = init.bias(q + ".b_gate", d_m, kGateBias);
            block.minis.push_back(m);
        }
        stage.blocks.push_back(std::move(block));
    }
    return stage;
}

OutputFirstLayer make_output_first(Initializer& init, const std::string& prefix,
                                   std::size_t d_x, std::size_t n_labels, bool shared,
                                   std::size_t d_e, std::size_t d_c, std::size_t d_m) {
    OutputFirstLayer first;
    first.w_x = init.weight(prefix + ".central.W_x", d_c, d_x);
    first.b_c = init.bias(prefix + ".central.b", d_c);
    if (d_e > 0) {
        first.embedding = init.weight(prefix + ".E", d_e, n_labels);
        first.u_e = init.weight(prefix + ".central.U_e", d_c, d_e);
    }
    const std::size_t n_minis = shared ? 1 : n_labels;
    for (std::size_t i = 0; i < n_minis; ++i) {
        const std::string q = prefix + ".mini" + std::to_string(i);
        OutputFirstLayer::Mini m;
        m.v_x = init.weight(q + ".V_x", d_m, d_x);
        if (d_e > 0) m.w_e = init.weight(q + ".W_e", d_m, d_e);
        m.b = init.bias(q + ".b", d_m);
        first.minis.push_back(m);
    }
    return first;
}

InputFirstLayer make_input_first(Initializer& init, const std::string& prefix,
                                 const std::vector<std::size_t>& dims, bool shared,
                                 std::size_t d_p, std::size_t d_c, std::size_t d_m) {
    InputFirstLayer first;
    const bool equal_dims = std::adjacent_find(dims.begin(), dims.end(), std::not_equal_to<>()) == dims.end();
    const std::size_t n_proj = shared && equal_dims ? 1 : dims.size();
    for (std::size_t i = 0; i < n_proj; ++i) {
        first.projections.push_back(
            init.weight(prefix + ".P" + std::to_string(i), d_p, dims[i]));
    }
    first.b_c = init.bias(prefix + ".central.b", d_c);
    const std::size_t n = shared ? 1 : dims.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::string q = prefix + ".mini" + std::to_string(i);
        InputFirstLayer::Mini m;
        m.w = init.weight(q + ".W", d_m, d_p);
        m.u = init.weight(q + ".U", d_c, d_p);
        m.b = init.bias(q + ".b", d_m);
        first.minis.push_back(m);
    }
    return first;
}

std::size_t head_rows(std::size_t arity) { return arity == 2 ? 1 : arity; }

void make_heads(Initializer& init, BundleParams& params, std::size_t d_in, bool shared) {
    const auto& arities = params.task.output_arities;
    params.head_of_output.assign(arities.size(), 0);
    if (shared) {
        // One head per distinct arity; label identity comes from the embedding.
        std::vector<std::size_t> seen;
        for (std::size_t o = 0; o < arities.size(); ++o) {
            auto it = std::find(seen.begin(), seen.end(), arities[o]);
            if (it == seen.end()) {
                const std::string p = "head.k" + std::to_string(arities[o]);
                params.heads.push_back({init.weight(p + ".W", head_rows(arities[o]), d_in),
                                        init.bias(p + ".b", head_rows(arities[o])),
                                        arities[o]});
                seen.push_back(arities[o]);
                it = seen.end() - 1;
            }
            params.head_of_output[o] = static_cast<std::size_t>(it - seen.begin());
        }
        return;
    }
    for (std::size_t o = 0; o < arities.size(); ++o) {
        const std::string p = "head" + std::to_string(o);
        params.heads.push_back({init.weight(p + ".W", head_rows(arities[o]), d_in),
                                init.bias(p + ".b", head_rows(arities[o])), arities[o]});
        params.head_of_output[o] = o;
    }
}

} // namespace

BundleParams init_params(const BundleConfig& config, const TaskSpec& task, std::uint64_t seed) {
    validate(config, task);
    BundleParams params;
    params.config = config;
    params.task = task;
    Initializer init(params.store, seed);

    const std::size_t d_c = config.d_central;
    const std::size_t d_m = config.d_mini;
    const std::size_t n_labels = task.n_outputs();
    const std::size_t n_parts = task.variable_parts ? 0 : task.n_inputs();

    if (task.kind != TaskKind::multi_output) {
        const bool shared = task.kind == TaskKind::multi_in_out ? config.share_input_minicolumns
                                                                 : config.share_minicolumns;
        params.input_first =
            make_input_first(init, "in.first", task.input_dims, shared, task.projection_dim, d_c, d_m);
        params.input_stage = make_stage(init, "in", config.n_layers, n_parts, shared,
                                        config.share_layers, d_c, d_m);
    }
    if (task.kind != TaskKind::multi_input) {
        const std::size_t d_x = task.kind == TaskKind::multi_output ? task.input_dims[0] : d_c;
        const std::size_t depth = task.kind == TaskKind::multi_in_out && config.n_output_layers > 0
                                      ? config.n_output_layers
                                      : config.n_layers;
        params.output_first = make_output_first(init, "out.first", d_x, n_labels,
                                                config.share_minicolumns, config.embed_dim, d_c, d_m);
        params.output_stage = make_stage(init, "out", depth, n_labels, config.share_minicolumns,
                                         config.share_layers, d_c, d_m);
    }
    if (params.heads_on_central()) {
        make_heads(init, params, d_c, false);
    } else {
        make_heads(init, params, d_m, config.share_minicolumns);
    }
    return params;
}

std::size_t param_count(const BundleParams& params) { return params.store.scalar_count(); }

std::size_t body_param_count(const BundleParams& params) {
    std::size_t n = 0;
    auto count = [&](ParamId id) { n += params.store[id].value.size(); };
    for (const auto* stage : {&params.input_stage, &params.output_stage}) {
        if (!stage->has_value()) continue;
        for (const auto& block : (*stage)->blocks) {
            count(block.central.w);
            count(block.central.b);
            count(block.central.w_gate);
            count(block.central.b_gate);
            for (const auto& m : block.minis) {
                for (ParamId id : {m.u, m.u_gate, m.w, m.v, m.b, m.w_gate, m.v_gate, m.b_gate}) count(id);
            }
        }
    }
    return n;
}

} // namespace clb

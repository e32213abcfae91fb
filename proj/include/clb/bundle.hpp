#pragma once

// Column bundle: a central column coupled to M mini-columns through
// highway-gated layers. Layer 1 is produced by a task-specific wiring (see
// tasks.hpp); layers 2..T are computed here.

#include "clb/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clb {

enum class Activation { relu, tanh };
enum class TaskKind { multi_output, multi_input, multi_in_out };

std::string to_string(Activation a);
std::string to_string(TaskKind k);
Activation parse_activation(const std::string& s);
TaskKind parse_task_kind(const std::string& s);

Var activate(Var a, Activation act);

/// What the network reads and predicts.
struct TaskSpec {
    TaskKind kind = TaskKind::multi_output;
    /// Dimension of each input part. Bags hold a single entry, the instance
    /// dimension, with `variable_parts` set.
    std::vector<std::size_t> input_dims;
    /// 2 for a binary output, k for a k-class output.
    std::vector<std::size_t> output_arities;
    /// Common space the input parts are projected into (multi-input wirings).
    std::size_t projection_dim = 0;
    bool use_label_embedding = false;
    /// Part count varies per sample (multi-instance bags).
    bool variable_parts = false;

    std::size_t n_inputs() const noexcept { return input_dims.size(); }
    std::size_t n_outputs() const noexcept { return output_arities.size(); }
    void validate() const;
};

struct BundleConfig {
    std::size_t n_layers = 10;
    /// Depth of the output stage of a multi-in/out bundle; 0 means n_layers.
    std::size_t n_output_layers = 0;
    std::size_t d_central = 32;
    std::size_t d_mini = 16;
    /// Mini-column count; 0 lets it follow the task (and marks it variable
    /// for bags).
    std::size_t n_minicolumns = 0;
    bool share_layers = true;
    /// Governs the output stage of a multi-in/out bundle and the only stage
    /// of the other wirings.
    bool share_minicolumns = false;
    /// Input stage of a multi-in/out bundle.
    bool share_input_minicolumns = false;
    std::size_t embed_dim = 0;
    Activation activation = Activation::relu;

    void validate() const;
};

/// Checks the cross-field invariants between a config and a task.
void validate(const BundleConfig& config, const TaskSpec& task);

struct CentralBlock {
    ParamId w, b, w_gate, b_gate;
};

/// Weights owned by one mini-column at one layer. U maps the mini-column
/// state into the central column; V maps the central state back.
struct MiniBlock {
    ParamId u, u_gate;
    ParamId w, v, b;
    ParamId w_gate, v_gate, b_gate;
};

struct LayerBlock {
    CentralBlock central;
    /// One entry when mini-columns share weights, else one per mini-column.
    std::vector<MiniBlock> minis;

    const MiniBlock& mini(std::size_t i) const { return minis.size() == 1 ? minis[0] : minis.at(i); }
};

/// Layers 2..T of one bundle.
struct Stage {
    std::size_t n_layers = 1;
    /// Zero when the mini-column count varies per sample.
    std::size_t n_minicolumns = 0;
    bool shared_minicolumns = false;
    std::size_t d_central = 0;
    std::size_t d_mini = 0;
    /// One block when layers share weights, else n_layers - 1 blocks.
    std::vector<LayerBlock> blocks;

    /// Weights used to compute `layer` (2 <= layer <= n_layers).
    const LayerBlock& block(std::size_t layer) const;
};

/// First layer of the output side: every column reads x; with label
/// embedding, mini-column i also reads column i of E.
struct OutputFirstLayer {
    ParamId w_x, b_c;
    ParamId embedding, u_e;
    struct Mini {
        ParamId v_x, w_e, b;
    };
    std::vector<Mini> minis;

    const Mini& mini(std::size_t i) const { return minis.size() == 1 ? minis[0] : minis.at(i); }
};

/// First layer of the input side: parts are projected into a common space,
/// each mini-column reads its part and the central column reads their mean.
struct InputFirstLayer {
    std::vector<ParamId> projections;
    ParamId b_c;
    struct Mini {
        ParamId w, u, b;
    };
    std::vector<Mini> minis;

    ParamId projection(std::size_t i) const { return projections.size() == 1 ? projections[0] : projections.at(i); }
    const Mini& mini(std::size_t i) const { return minis.size() == 1 ? minis[0] : minis.at(i); }
};

/// Binary heads emit one logit (P(y=1) = sigmoid); k-class heads emit k.
struct Head {
    ParamId w, b;
    std::size_t arity = 2;
};

struct BundleParams {
    BundleConfig config;
    TaskSpec task;
    ParamStore store;

    std::optional<InputFirstLayer> input_first;
    std::optional<Stage> input_stage;
    std::optional<OutputFirstLayer> output_first;
    std::optional<Stage> output_stage;

    std::vector<Head> heads;
    /// heads[head_of_output[o]] predicts output o.
    std::vector<std::size_t> head_of_output;

    /// Heads read the central column (multi-input) or the mini-columns.
    bool heads_on_central() const noexcept { return task.kind == TaskKind::multi_input; }
};

/// Hidden states of one bundle for a batch (columns are samples).
struct ForwardTrace {
    std::vector<Var> central;                          // [t] for t = 1..T
    std::vector<std::vector<Var>> mini;                // [i][t]
    std::vector<Var> central_gate, central_candidate;  // [t - 2] for t = 2..T
    std::vector<std::vector<Var>> mini_gate, mini_candidate;

    std::size_t n_layers() const noexcept { return central.size(); }
    std::size_t n_minicolumns() const noexcept { return mini.size(); }
};

struct StepResult {
    Var state;
    Var candidate;
    Var gate;
};

/// Central update: candidate g(W h_c + mean_i U_i h_i + b), gate
/// sigmoid(W_a h_c + mean_i U_ai h_i + b_a), blended with the previous state.
StepResult central_step(Tape& tape, ParamStore& store, const LayerBlock& block, Var h_c_prev,
                        std::span<const Var> h_mini_prev, Activation act);

/// Mini-column update: candidate g(W_i h_i + V_i h_c + b_i) and gate
/// sigmoid(W_ai h_i + V_ai h_c + b_ai), blended with the previous state.
StepResult mini_step(Tape& tape, ParamStore& store, const MiniBlock& block, Var h_i_prev,
                     Var h_c_prev, Activation act);

/// Runs layers 2..T from first-layer states. Every layer reads only the
/// states of the layer below.
ForwardTrace bundle_forward(Tape& tape, ParamStore& store, const Stage& stage, Activation act,
                            Var h_c_1, std::vector<Var> h_mini_1);

/// Glorot-uniform weights, zero biases, gate biases -1. Deterministic in seed.
BundleParams init_params(const BundleConfig& config, const TaskSpec& task, std::uint64_t seed);

/// Number of scalar parameters in the whole model.
std::size_t param_count(const BundleParams& params);
/// Scalars in the layer blocks of layers 2..T (all stages).
std::size_t body_param_count(const BundleParams& params);

/// Columns of E as mini-column inputs, one per label.
std::vector<Var> embed_labels(Var embedding, std::size_t n_labels);

// Checkpoints --------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const BundleParams& params);
BundleParams load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const BundleParams& params);
BundleParams load_checkpoint(const std::string& path);

} // namespace clb

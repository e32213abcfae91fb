#pragma once

// Task wirings around a column bundle: first-layer input handling, the
// prediction heads, the loss, and the per-label highway baseline.

#include "clb/bundle.hpp"
#include "clb/dataset.hpp"
#include "clb/dropout.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace clb {

inline constexpr double kProbabilityFloor = 1e-12;

struct FirstLayerStates {
    Var central;
    std::vector<Var> minis;
};

/// Output side: the central column and every mini-column read x (d_x x B).
/// With label embedding, mini-column i also reads E_i and the central column
/// reads the mean of U E_i.
FirstLayerStates init_multi_output(Tape& tape, BundleParams& params, Var x);

/// Input side: part i is projected into the common space, mini-column i
/// reads its projection, the central column reads the mean over parts.
FirstLayerStates init_multi_input(Tape& tape, BundleParams& params, std::span<const Var> parts);

/// Output-stage first layer of a multi-in/out bundle, fed by the top central
/// state of the input stage.
FirstLayerStates compose_mimo(Tape& tape, BundleParams& params, const ForwardTrace& input_stage);

struct OutputPrediction {
    /// 1 x B for binary outputs, k x B otherwise.
    Var logits;
    /// P(y=1) for binary outputs, the class distribution otherwise.
    Var probs;
    std::size_t arity = 2;
    /// Index of the dataset output this predicts.
    std::size_t output = 0;
};

struct Prediction {
    std::vector<OutputPrediction> outputs;
    double threshold = 0.5;

    std::size_t batch_size() const { return outputs.empty() ? 0 : outputs[0].probs.cols(); }
    /// Hard class per [sample][prediction output]: P > threshold for binary,
    /// argmax otherwise.
    std::vector<std::vector<int>> decide() const;
};

/// Applies the heads to the top layer of `trace`: per mini-column for output
/// wirings, on the central column for multi-input. Dropout (if any) hits the
/// top states before the heads.
Prediction predict(Tape& tape, BundleParams& params, const ForwardTrace& trace,
                   const DropoutContext& dropout = {});

/// Per output, per class: loss weight.
struct ClassWeights {
    std::vector<std::vector<double>> weights;

    static ClassWeights unit(const std::vector<std::size_t>& arities);
    double at(std::size_t output, std::size_t cls) const { return weights.at(output).at(cls); }
};

/// Weighted negative log-likelihood summed over the batch and the predicted
/// outputs: -sum w(y) log P(y), with P clamped at kProbabilityFloor.
/// `targets[b][o]` is the class of dataset output o for sample b. Clamped
/// entries are counted in Tape::clamp_events().
Var multilabel_loss(const Prediction& pred, const std::vector<std::vector<int>>& targets,
                    const ClassWeights& weights);

std::vector<std::vector<int>> targets_of(std::span<const Sample* const> batch);

struct BundleForward {
    std::optional<ForwardTrace> input_trace;
    std::optional<ForwardTrace> output_trace;
    Prediction prediction;
};

/// Full forward for a batch. For multi-input wirings every sample in the
/// batch must have the same number of parts.
BundleForward forward(Tape& tape, BundleParams& params, std::span<const Sample* const> batch,
                      const DropoutContext& dropout = {});

/// Task spec implied by a dataset's metadata.
TaskSpec task_from_dataset(const Dataset& data, std::size_t projection_dim,
                           bool use_label_embedding);

// Highway baseline ---------------------------------------------------------

/// One highway column predicting a single output: h1 = g(W1 x + b1), then
/// layers 2..T share one gated block, head on h^T.
struct HighwayNet {
    ParamStore store;
    ParamId w1, b1, w, b, w_gate, b_gate, head_w, head_b;
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    std::size_t n_layers = 1;
    std::size_t arity = 2;
    std::size_t label_index = 0;
    Activation activation = Activation::relu;
};

HighwayNet init_highway(std::size_t input_dim, std::size_t hidden, std::size_t n_layers,
                        std::size_t arity, std::size_t label_index, Activation act,
                        std::uint64_t seed);

/// Logits for x (input_dim x B). `states`, when given, receives h^1..h^T.
Var hwn_logits(Tape& tape, HighwayNet& net, Var x, const DropoutContext& dropout = {},
               std::vector<Var>* states = nullptr);

/// P(y=1) of a binary single-label net for one input vector.
double hwn_baseline(const FeatureVector& x, std::size_t label_index, HighwayNet& net);

// Trainable network interface ----------------------------------------------

class Network {
public:
    virtual ~Network() = default;
    virtual ParamStore& store() = 0;
    virtual Prediction forward(Tape& tape, std::span<const Sample* const> batch,
                               const DropoutContext& dropout) = 0;
    /// Batches must hold samples with equal part counts.
    virtual bool needs_equal_part_counts() const { return false; }
};

class BundleNetwork final : public Network {
public:
    explicit BundleNetwork(BundleParams params) : params_(std::move(params)) {}

    ParamStore& store() override { return params_.store; }
    Prediction forward(Tape& tape, std::span<const Sample* const> batch,
                       const DropoutContext& dropout) override;
    bool needs_equal_part_counts() const override { return params_.task.variable_parts; }

    BundleParams& params() { return params_; }
    const BundleParams& params() const { return params_; }

private:
    BundleParams params_;
};

/// Reads the concatenation of all parts and predicts net.label_index.
class HighwayNetwork final : public Network {
public:
    explicit HighwayNetwork(HighwayNet net) : net_(std::move(net)) {}

    ParamStore& store() override { return net_.store; }
    Prediction forward(Tape& tape, std::span<const Sample* const> batch,
                       const DropoutContext& dropout) override;

    HighwayNet& net() { return net_; }

private:
    HighwayNet net_;
};

// Single-view logistic regression ------------------------------------------

/// Logistic regression on one part of a dataset with a binary output,
/// trained by full-batch gradient descent on the train split.
struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::size_t part = 0;
    std::size_t output = 0;

    double probability(const Sample& s) const;
    double accuracy(const Dataset& data, Split split) const;
};

LogisticModel fit_logistic(const Dataset& data, std::size_t part, std::size_t output,
                           std::size_t epochs = 500, double lr = 0.5);

} // namespace clb

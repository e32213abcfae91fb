#pragma once

// Training protocol: class weighting, optimizers, the validation-driven
// learning-rate schedule, the epoch loop and multi-run aggregation.

#include "clb/data.hpp"
#include "clb/tasks.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace clb {

enum class OptimizerKind { adam, rmsprop };
/// Quantity the schedule watches on the validation split.
enum class Monitor { loss, micro_f1 };

std::string to_string(OptimizerKind k);
std::string to_string(Monitor m);
OptimizerKind parse_optimizer(const std::string& s);
Monitor parse_monitor(const std::string& s);

struct TrainConfig {
    double lr0 = 0.001;
    std::size_t patience_epochs = 10;
    /// Epochs before the patience counter starts.
    std::size_t warmup_epochs = 10;
    std::size_t max_halvings = 4;
    std::size_t max_epochs = 500;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::size_t batch_size = 32;
    double dropout_rate = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_runs = 5;
    Monitor monitor = Monitor::loss;
    bool class_weighting = true;
    /// Smallest decrease of the monitored value that counts as improvement.
    double improvement_tolerance = 1e-6;

    void validate() const;
};

// Optimizers ---------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kRmsDecay = 0.9;
inline constexpr double kOptimizerEps = 1e-8;

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    /// First moments (Adam only), one per parameter.
    std::vector<Tensor> m;
    /// Second moments, one per parameter.
    std::vector<Tensor> v;
    std::size_t step = 0;
    double lr0 = 0.001;
    std::size_t halvings = 0;

    /// lr0 / 2^halvings.
    double lr() const;
    static OptimizerState init(const ParamStore& store, OptimizerKind kind, double lr0);
};

/// Update from the gradients held in the store. Throws NumericError, leaving
/// every parameter untouched, when any gradient entry is non-finite.
void adam_step(OptimizerState& state, ParamStore& store);
void rmsprop_step(OptimizerState& state, ParamStore& store);
void optimizer_step(OptimizerState& state, ParamStore& store);

/// ln(1 / f); f must lie in (0, 1].
double class_weight(double frequency);

/// w = ln(1 / f) per output and class over the split, with the class
/// frequency f kept inside [1/(2n), 1 - 1/(2n)].
ClassWeights compute_class_weights(const Dataset& data, Split split = Split::train);

// Schedule -----------------------------------------------------------------

enum class ScheduleAction { proceed, halve, stop };

std::string to_string(ScheduleAction a);

struct ScheduleState {
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_improvement = 0;
    std::size_t halvings = 0;
    std::size_t epoch = 0;
};

/// Consumes the last entry of `history` (lower is better) as the value of
/// epoch history.size(). Epochs are 1-based; the patience counter only runs
/// after the warmup. Reaching the patience emits halve, or stop once the
/// halving budget is spent; the epoch limit also stops.
ScheduleAction lr_schedule_step(const std::vector<double>& history, ScheduleState& state,
                                const TrainConfig& config);

/// Actions for every prefix of `history`, stopping at the first stop.
std::vector<ScheduleAction> replay_schedule(const std::vector<double>& history,
                                            const TrainConfig& config);

// Training -----------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_micro_f1 = 0.0;
    /// Rate used for this epoch's updates.
    double lr = 0.0;
    /// Halvings after this epoch's schedule decision.
    std::size_t halvings = 0;
};

/// One line per epoch: "epoch train_loss val_loss val_micro_f1 lr halvings".
void write_epoch_log(std::ostream& out, const std::vector<EpochRecord>& log);
std::vector<EpochRecord> read_epoch_log(std::istream& in);
/// Monitored values (lower is better) of a log, as fed to the schedule.
std::vector<double> monitored_history(const std::vector<EpochRecord>& log, Monitor monitor);

struct TrainResult {
    std::vector<EpochRecord> log;
    std::size_t best_epoch = 0;
    double best_monitored = std::numeric_limits<double>::infinity();
    bool diverged = false;
    std::string stop_reason;
};

struct EvalResult {
    /// Mean weighted loss per sample.
    double loss = 0.0;
    MetricsReport metrics;
    /// [sample][predicted output], samples in split order.
    LabelMatrix predictions;
    /// Dataset outputs the network predicts.
    std::vector<std::size_t> outputs;
};

EvalResult evaluate(Network& net, const Dataset& data, Split split,
                    const ClassWeights* weights = nullptr, std::size_t batch_size = 256);

/// Mini-batch loop with the validation-driven schedule. On return the network
/// holds the best-validation parameters. A non-finite loss or gradient stops
/// training early with `diverged` set.
TrainResult train(Network& net, const Dataset& data, const TrainConfig& config);

struct BundleRun {
    BundleParams params;
    TrainResult result;
    EvalResult test;
};

BundleRun train_bundle(const BundleConfig& bundle, const TaskSpec& task, const TrainConfig& config,
                       const Dataset& data);

struct HighwayConfig {
    std::size_t hidden = 32;
    std::size_t n_layers = 10;
    Activation activation = Activation::relu;
};

/// One highway net per output, each trained on its own output.
struct HighwayRun {
    std::vector<HighwayNet> nets;
    std::vector<TrainResult> results;
    MetricsReport test;
};

HighwayRun train_highway_ensemble(const HighwayConfig& hwn, const TrainConfig& config,
                                  const Dataset& data);

// Multi-run ----------------------------------------------------------------

struct MetricSummary {
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single run.
    double std = 0.0;
};

MetricSummary summarize(const std::vector<double>& values);

struct MultiRunSummary {
    std::vector<MetricsReport> runs;
    MetricSummary micro_f1;
    MetricSummary hamming_loss;
};

/// Runs `run_one(seed + r, r)` for r = 0..n_runs-1.
MultiRunSummary multi_run(const std::function<MetricsReport(std::uint64_t, std::size_t)>& run_one,
                          std::uint64_t seed, std::size_t n_runs);

} // namespace clb

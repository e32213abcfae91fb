#include "clb/training.hpp"

#include "clb/errors.hpp"
#include "clb/textio.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

namespace clb {

namespace {

using Batch = std::vector<std::size_t>;

/// Chunks `idx` into batches. Grouped batches only mix samples with equal
/// part counts. With an rng, sample order and batch order are shuffled.
std::vector<Batch> make_batches(const Dataset& data, std::vector<std::size_t> idx,
                                std::size_t batch_size, bool grouped, Rng* rng) {
    if (rng) std::shuffle(idx.begin(), idx.end(), *rng);
    std::vector<Batch> batches;
    auto chunk = [&](const std::vector<std::size_t>& items) {
        for (std::size_t start = 0; start < items.size(); start += batch_size) {
            const std::size_t end = std::min(items.size(), start + batch_size);
            batches.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(start),
                                 items.begin() + static_cast<std::ptrdiff_t>(end));
        }
    };
    if (!grouped) {
        chunk(idx);
        return batches;
    }
    std::map<std::size_t, std::vector<std::size_t>> by_count;
    for (auto i : idx) by_count[data.samples[i].parts.size()].push_back(i);
    for (const auto& [count, items] : by_count) chunk(items);
    if (rng) std::shuffle(batches.begin(), batches.end(), *rng);
    return batches;
}

std::vector<const Sample*> pointers(const Dataset& data, const Batch& batch) {
    std::vector<const Sample*> out;
    out.reserve(batch.size());
    for (auto i : batch) out.push_back(&data.samples[i]);
    return out;
}

} // namespace

EvalResult evaluate(Network& net, const Dataset& data, Split split, const ClassWeights* weights,
                    std::size_t batch_size) {
    const auto idx = data.indices(split);
    const ClassWeights unit = ClassWeights::unit(data.arities);
    const ClassWeights& w = weights ? *weights : unit;

    std::vector<std::size_t> position(data.samples.size());
    for (std::size_t k = 0; k < idx.size(); ++k) position[idx[k]] = k;

    EvalResult out;
    out.predictions.resize(idx.size());
    double total = 0.0;
    for (const Batch& batch : make_batches(data, idx, batch_size, net.needs_equal_part_counts(), nullptr)) {
        const auto samples = pointers(data, batch);
        Tape tape;
        Prediction pred = net.forward(tape, samples, {});
        if (out.outputs.empty()) {
            for (const auto& op : pred.outputs) out.outputs.push_back(op.output);
        }
        total += multilabel_loss(pred, targets_of(samples), w).value()(0, 0);
        auto decided = pred.decide();
        for (std::size_t b = 0; b < batch.size(); ++b) out.predictions[position[batch[b]]] = std::move(decided[b]);
    }
    if (out.outputs.empty()) {
        out.outputs.resize(data.n_outputs());
        std::iota(out.outputs.begin(), out.outputs.end(), std::size_t{0});
    }
    out.loss = idx.empty() ? 0.0 : total / static_cast<double>(idx.size());

    LabelMatrix targets;
    targets.reserve(idx.size());
    for (auto i : idx) {
        std::vector<int> row;
        for (auto o : out.outputs) row.push_back(data.samples[i].targets[o]);
        targets.push_back(std::move(row));
    }
    std::vector<std::size_t> arities;
    for (auto o : out.outputs) arities.push_back(data.arities[o]);
    out.metrics = evaluate_predictions(out.predictions, targets, arities);
    return out;
}

TrainResult train(Network& net, const Dataset& data, const TrainConfig& config) {
    config.validate();
    const auto train_idx = data.indices(Split::train);
    if (train_idx.empty()) throw UsageError("training split is empty");
    if (data.count(Split::validation) == 0) throw UsageError("validation split is empty");

    const ClassWeights weights =
        config.class_weighting ? compute_class_weights(data) : ClassWeights::unit(data.arities);
    Rng rng(config.seed);
    OptimizerState opt = OptimizerState::init(net.store(), config.optimizer, config.lr0);
    ParamStore best = net.store();
    ScheduleState schedule;
    std::vector<double> history;
    TrainResult result;
    const DropoutContext dropout{config.dropout_rate, Mode::train, &rng};

    for (std::size_t epoch = 1;; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = opt.lr();
        double total = 0.0;
        bool bad = false;
        for (const Batch& batch :
             make_batches(data, train_idx, config.batch_size, net.needs_equal_part_counts(), &rng)) {
            const auto samples = pointers(data, batch);
            Tape tape;
            net.store().zero_grad();
            Prediction pred = net.forward(tape, samples, dropout);
            Var loss = multilabel_loss(pred, targets_of(samples), weights);
            const double value = loss.value()(0, 0);
            if (!std::isfinite(value)) {
                bad = true;
                break;
            }
            total += value;
            tape.backward(scale(loss, 1.0 / static_cast<double>(batch.size())));
            try {
                optimizer_step(opt, net.store());
            } catch (const NumericError&) {
                bad = true;
                break;
            }
        }
        if (bad) {
            result.diverged = true;
            result.stop_reason = "diverged at epoch " + std::to_string(epoch);
            break;
        }
        rec.train_loss = total / static_cast<double>(train_idx.size());

        const EvalResult val = evaluate(net, data, Split::validation, &weights);
        rec.val_loss = val.loss;
        rec.val_micro_f1 = val.metrics.micro_f1;
        if (!std::isfinite(val.loss)) {
            result.diverged = true;
            result.stop_reason = "validation loss non-finite at epoch " + std::to_string(epoch);
            break;
        }
        const double monitored = config.monitor == Monitor::loss ? val.loss : -val.metrics.micro_f1;
        if (monitored < result.best_monitored) {
            result.best_monitored = monitored;
            result.best_epoch = epoch;
            best.assign_values(net.store());
        }
        history.push_back(monitored);
        const ScheduleAction action = lr_schedule_step(history, schedule, config);
        opt.halvings = schedule.halvings;
        rec.halvings = schedule.halvings;
        result.log.push_back(rec);
        if (action == ScheduleAction::stop) {
            result.stop_reason = epoch >= config.max_epochs ? "max_epochs" : "max_halvings";
            break;
        }
    }
    net.store().assign_values(best);
    return result;
}

void write_epoch_log(std::ostream& out, const std::vector<EpochRecord>& log) {
    out << "# epoch train_loss val_loss val_micro_f1 lr halvings\n";
    for (const EpochRecord& r : log) {
        out << r.epoch << ' ' << textio::format_double(r.train_loss) << ' '
            << textio::format_double(r.val_loss) << ' ' << textio::format_double(r.val_micro_f1) << ' '
            << textio::format_double(r.lr) << ' ' << r.halvings << '\n';
    }
}

std::vector<EpochRecord> read_epoch_log(std::istream& in) {
    std::vector<EpochRecord> log;
    std::string text;
    std::size_t lineno = 0;
    while (std::getline(in, text)) {
        ++lineno;
        auto line = textio::trim(text);
        if (line.empty() || line.front() == '#') continue;
        auto tok = textio::split_ws(line);
        if (tok.size() != 6) throw ParseError("expected 6 fields", lineno);
        auto epoch = textio::parse_size(tok[0]);
        auto train_loss = textio::parse_double(tok[1]);
        auto val_loss = textio::parse_double(tok[2]);
        auto f1 = textio::parse_double(tok[3]);
        auto lr = textio::parse_double(tok[4]);
        auto halvings = textio::parse_size(tok[5]);
        if (!epoch || !train_loss || !val_loss || !f1 || !lr || !halvings) {
            throw ParseError("malformed epoch record", lineno);
        }
        log.push_back({*epoch, *train_loss, *val_loss, *f1, *lr, *halvings});
    }
    return log;
}

std::vector<double> monitored_history(const std::vector<EpochRecord>& log, Monitor monitor) {
    std::vector<double> out;
    out.reserve(log.size());
    for (const EpochRecord& r : log) out.push_back(monitor == Monitor::loss ? r.val_loss : -r.val_micro_f1);
    return out;
}

BundleRun train_bundle(const BundleConfig& bundle, const TaskSpec& task, const TrainConfig& config,
                       const Dataset& data) {
    validate(bundle, task);
    BundleNetwork net(init_params(bundle, task, config.seed));
    TrainResult result = train(net, data, config);
    EvalResult test = evaluate(net, data, Split::test);
    return {std::move(net.params()), std::move(result), std::move(test)};
}

HighwayRun train_highway_ensemble(const HighwayConfig& hwn, const TrainConfig& config,
                                  const Dataset& data) {
    if (data.kind == DatasetKind::bags) throw ConfigError("the highway baseline needs fixed parts");
    const std::size_t input_dim = std::accumulate(data.part_dims.begin(), data.part_dims.end(), std::size_t{0});
    const auto test_idx = data.indices(Split::test);

    HighwayRun run;
    LabelMatrix preds(test_idx.size(), std::vector<int>(data.n_outputs(), 0));
    for (std::size_t o = 0; o < data.n_outputs(); ++o) {
        HighwayNetwork net(init_highway(input_dim, hwn.hidden, hwn.n_layers, data.arities[o], o,
                                        hwn.activation, config.seed + o));
        TrainConfig per_label = config;
        per_label.seed = config.seed + o;
        run.results.push_back(train(net, data, per_label));
        EvalResult test = evaluate(net, data, Split::test);
        for (std::size_t n = 0; n < test_idx.size(); ++n) preds[n][o] = test.predictions[n][0];
        run.nets.push_back(std::move(net.net()));
    }
    LabelMatrix targets;
    for (auto i : test_idx) targets.push_back(data.samples[i].targets);
    run.test = evaluate_predictions(preds, targets, data.arities);
    return run;
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

MultiRunSummary multi_run(const std::function<MetricsReport(std::uint64_t, std::size_t)>& run_one,
                          std::uint64_t seed, std::size_t n_runs) {
    if (n_runs < 1) throw UsageError("n_runs must be >= 1");
    MultiRunSummary out;
    std::vector<double> f1, hl;
    for (std::size_t r = 0; r < n_runs; ++r) {
        out.runs.push_back(run_one(seed + r, r));
        f1.push_back(out.runs.back().micro_f1);
        hl.push_back(out.runs.back().hamming_loss);
    }
    out.micro_f1 = summarize(f1);
    out.hamming_loss = summarize(hl);
    return out;
}

} // namespace clb

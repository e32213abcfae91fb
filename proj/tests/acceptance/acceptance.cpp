#include "clb/data.hpp"
#include "clb/errors.hpp"
#include "clb/training.hpp"
#include "oracle.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace clb;
using clb::testing::all_params;
using clb::testing::fd_max_rel_error;
using clb::testing::random_tensor;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

BundleConfig bundle_of(std::size_t layers, std::size_t d, bool shared, Activation act) {
    BundleConfig c;
    c.n_layers = layers;
    c.d_central = d;
    c.d_mini = d;
    c.share_minicolumns = shared;
    c.share_input_minicolumns = shared;
    c.activation = act;
    return c;
}

TaskSpec output_task(std::size_t n_labels, std::size_t d_x) {
    TaskSpec t;
    t.kind = TaskKind::multi_output;
    t.input_dims = {d_x};
    t.output_arities.assign(n_labels, 2);
    return t;
}

std::vector<double> normal_values(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

void set_gate_biases(ParamStore& store, double v) {
    for (auto& p : store.all()) {
        if (p.name.size() >= 6 && p.name.compare(p.name.size() - 6, 6, "b_gate") == 0) p.value.fill(v);
    }
}

std::size_t scalars_with_prefix(const ParamStore& store, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& p : store.all()) {
        if (p.name.rfind(prefix, 0) == 0) n += p.value.rows() * p.value.cols();
    }
    return n;
}

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    struct Wiring {
        std::string name;
        TaskSpec task;
    };
    std::vector<Wiring> wirings;
    wirings.push_back({"multi_output", output_task(2, 5)});
    TaskSpec in;
    in.kind = TaskKind::multi_input;
    in.input_dims = {3, 5};
    in.output_arities = {3};
    in.projection_dim = 4;
    wirings.push_back({"multi_input", in});
    TaskSpec mimo;
    mimo.kind = TaskKind::multi_in_out;
    mimo.input_dims = {3, 5};
    mimo.output_arities = {2, 3};
    mimo.projection_dim = 4;
    wirings.push_back({"multi_in_out", mimo});

    double worst = 0.0;
    std::size_t cases = 0;
    for (const auto& w : wirings) {
        for (bool shared : {false, true}) {
            for (Activation act : {Activation::relu, Activation::tanh}) {
                BundleParams p = init_params(bundle_of(3, 4, shared, act), w.task, 7 + cases);
                std::vector<Sample> samples(2);
                for (auto& s : samples) {
                    for (auto d : w.task.input_dims) s.parts.push_back(FeatureVector::dense(normal_values(d, rng)));
                    for (auto k : w.task.output_arities) s.targets.push_back(static_cast<int>(rng() % k));
                }
                std::vector<const Sample*> batch{&samples[0], &samples[1]};
                const auto targets = targets_of(batch);
                const auto weights = ClassWeights::unit(w.task.output_arities);
                auto build = [&](Tape& t) { return multilabel_loss(forward(t, p, batch).prediction, targets, weights); };
                worst = std::max(worst, fd_max_rel_error(build, all_params(p.store)));
                ++cases;
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-4 && secs < 10.0,
            std::to_string(cases) + " cases, max rel err " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

Outcome highway_identity() {
    std::mt19937_64 rng(2);
    bool exact = true;
    double lo = 1.0, hi = 1.0;
    for (Activation act : {Activation::relu, Activation::tanh}) {
        for (bool shared : {false, true}) {
            BundleParams p = init_params(bundle_of(50, 6, shared, act), output_task(3, 4), 3);
            set_gate_biases(p.store, -50.0);
            Tape tape;
            const Tensor c1 = random_tensor(6, 4, rng);
            std::vector<Tensor> m1;
            std::vector<Var> minis;
            for (int i = 0; i < 3; ++i) {
                m1.push_back(random_tensor(6, 4, rng));
                minis.push_back(tape.constant(m1.back()));
            }
            ForwardTrace trace = bundle_forward(tape, p.store, *p.output_stage, act, tape.constant(c1), minis);
            const Tensor top = trace.central.back().value();
            exact = exact && trace.n_layers() == 50 && top == c1;
            for (int i = 0; i < 3; ++i) exact = exact && trace.mini[i].back().value() == m1[i];
            const double ratio = top.norm() / c1.norm();
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
    }
    return {exact && lo >= 1.0 - 1e-9 && hi <= 1.0 + 1e-9,
            std::string("exact=") + (exact ? "yes" : "no") + ", norm ratio in [" + fmt(lo, 17) + ", " + fmt(hi, 17) + "]"};
}

Outcome exchangeability() {
    std::mt19937_64 rng(4);
    TaskSpec task;
    task.kind = TaskKind::multi_input;
    task.input_dims = {6};
    task.output_arities = {2};
    task.projection_dim = 5;
    task.variable_parts = true;
    BundleParams p = init_params(bundle_of(4, 8, true, Activation::relu), task, 5);
    double worst = 0.0;
    std::size_t orders = 0;
    for (int b = 0; b < 100; ++b) {
        Sample bag;
        const std::size_t size = 1 + rng() % 5;
        for (std::size_t i = 0; i < size; ++i) bag.parts.push_back(FeatureVector::dense(normal_values(6, rng)));
        bag.targets = {0};
        std::vector<std::size_t> order(size);
        for (std::size_t i = 0; i < size; ++i) order[i] = i;
        double reference = 0.0;
        bool first = true;
        do {
            Sample permuted = bag;
            for (std::size_t i = 0; i < size; ++i) permuted.parts[i] = bag.parts[order[i]];
            std::array<const Sample*, 1> batch{&permuted};
            Tape tape;
            const double prob = forward(tape, p, batch).prediction.outputs[0].probs.value()(0, 0);
            if (first) reference = prob;
            first = false;
            worst = std::max(worst, std::abs(prob - reference));
            ++orders;
        } while (std::next_permutation(order.begin(), order.end()));
    }
    return {worst <= 1e-9, std::to_string(orders) + " orderings, max deviation " + fmt(worst)};
}

Outcome scaling() {
    std::vector<std::size_t> shared_counts, unshared_counts;
    std::size_t per_column = 0;
    for (std::size_t m : {2u, 10u, 100u}) {
        shared_counts.push_back(body_param_count(init_params(bundle_of(5, 8, true, Activation::relu), output_task(m, 6), 0)));
        BundleParams u = init_params(bundle_of(5, 8, false, Activation::relu), output_task(m, 6), 0);
        unshared_counts.push_back(body_param_count(u));
        per_column = scalars_with_prefix(u.store, "out.block0.mini0.");
    }
    const bool flat = shared_counts[0] == shared_counts[1] && shared_counts[1] == shared_counts[2];
    const std::size_t d1 = unshared_counts[1] - unshared_counts[0];
    const std::size_t d2 = unshared_counts[2] - unshared_counts[1];
    const bool affine = d1 == 8 * per_column && d2 == 90 * per_column;
    return {flat && affine, "shared " + std::to_string(shared_counts[0]) + "/" + std::to_string(shared_counts[1]) + "/" +
                                std::to_string(shared_counts[2]) + ", unshared slope " + std::to_string(d1 / 8) + " and " +
                                std::to_string(d2 / 90) + " vs block " + std::to_string(per_column)};
}

Outcome loss_recovery() {
    std::mt19937_64 rng(6);
    TaskSpec task = output_task(3, 5);
    task.output_arities = {2, 4, 2};
    BundleParams p = init_params(bundle_of(3, 6, false, Activation::tanh), task, 8);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Sample> samples(4);
        for (auto& s : samples) {
            s.parts.push_back(FeatureVector::dense(normal_values(5, rng)));
            for (auto k : task.output_arities) s.targets.push_back(static_cast<int>(rng() % k));
        }
        std::vector<const Sample*> batch;
        for (auto& s : samples) batch.push_back(&s);
        Tape tape;
        Prediction pred = forward(tape, p, batch).prediction;
        const double loss = multilabel_loss(pred, targets_of(batch), ClassWeights::unit(task.output_arities)).value()(0, 0);
        double nll = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            for (const auto& out : pred.outputs) {
                const int y = batch[b]->targets[out.output];
                const Tensor& probs = out.probs.value();
                const double py = out.arity == 2 ? (y == 1 ? probs(0, b) : 1.0 - probs(0, b)) : probs(y, b);
                nll -= std::log(py);
            }
        }
        worst = std::max(worst, std::abs(loss - nll) / std::max(1.0, std::abs(nll)));
    }
    const double w_half = class_weight(0.5);
    const double w_inv_e = class_weight(std::exp(-1.0));
    const bool weights_ok = std::abs(w_half - std::log(2.0)) <= 1e-12 && std::abs(w_inv_e - 1.0) <= 1e-12;
    return {worst <= 1e-12 && weights_ok,
            "max rel deviation " + fmt(worst) + ", w(0.5)=" + fmt(w_half, 15) + ", w(1/e)=" + fmt(w_inv_e, 15)};
}

Outcome metrics_oracle() {
    std::mt19937_64 rng(9);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        LabelMatrix p(20, std::vector<int>(7)), t(20, std::vector<int>(7));
        for (auto& row : p) for (auto& v : row) v = static_cast<int>(rng() % 2);
        for (auto& row : t) for (auto& v : row) v = static_cast<int>(rng() % 2);
        double tp = 0, fp = 0, fn = 0, wrong = 0;
        for (std::size_t i = 0; i < 20; ++i) {
            for (std::size_t j = 0; j < 7; ++j) {
                tp += p[i][j] == 1 && t[i][j] == 1;
                fp += p[i][j] == 1 && t[i][j] == 0;
                fn += p[i][j] == 0 && t[i][j] == 1;
                wrong += p[i][j] != t[i][j];
            }
        }
        const double denom = 2 * tp + fp + fn;
        const double f1 = denom == 0 ? 1.0 : 2 * tp / denom;
        if (micro_f1(p, t) != f1 || hamming_loss(p, t) != wrong / 140.0) ++mismatches;
    }
    const LabelMatrix perfect{{1, 0, 1}, {0, 1, 1}};
    const bool anchors = micro_f1(perfect, perfect) == 1.0 && hamming_loss(perfect, perfect) == 0.0 &&
                         hamming_loss({{1, 1, 1}}, {{1, 0, 1}}) == 1.0 / 3.0;
    return {mismatches == 0 && anchors,
            std::to_string(mismatches) + " mismatches in 1000, anchors " + (anchors ? "hold" : "fail")};
}

std::vector<std::size_t> halving_epochs(const std::vector<double>& history, const TrainConfig& c, std::size_t& stop) {
    ScheduleState state;
    std::vector<double> prefix;
    std::vector<std::size_t> halvings;
    stop = 0;
    for (double v : history) {
        prefix.push_back(v);
        const std::size_t before = state.halvings;
        const ScheduleAction a = lr_schedule_step(prefix, state, c);
        if (state.halvings > before) halvings.push_back(prefix.size());
        if (a == ScheduleAction::stop) {
            stop = prefix.size();
            break;
        }
    }
    return halvings;
}

Outcome schedule_replay() {
    TrainConfig c;
    std::size_t flat_stop = 0, decreasing_stop = 0;
    const auto flat_halvings = halving_epochs(std::vector<double>(600, 1.0), c, flat_stop);
    std::vector<double> decreasing;
    for (std::size_t e = 0; e < 600; ++e) decreasing.push_back(5.0 - 1e-3 * static_cast<double>(e));
    const auto decreasing_halvings = halving_epochs(decreasing, c, decreasing_stop);
    const bool flat_ok = flat_halvings == std::vector<std::size_t>{20, 30, 40, 50} && flat_stop == 50;
    const bool decreasing_ok = decreasing_halvings.empty() && decreasing_stop == c.max_epochs;

    SyntheticSpec spec;
    spec.n_samples = 200;
    Dataset d = gen_synthetic(Generator::correlated, spec, 10);
    TrainConfig live;
    live.lr0 = 0.01;
    live.warmup_epochs = 3;
    live.patience_epochs = 3;
    live.max_epochs = 200;
    BundleConfig b = bundle_of(3, 8, false, Activation::relu);
    BundleRun run = train_bundle(b, task_from_dataset(d, 0, false), live, d);
    std::stringstream log;
    write_epoch_log(log, run.result.log);
    const auto replayed_log = read_epoch_log(log);
    const auto actions = replay_schedule(monitored_history(replayed_log, live.monitor), live);
    bool live_ok = actions.size() == run.result.log.size() && !actions.empty() && actions.back() == ScheduleAction::stop;
    std::size_t halvings = 0;
    for (std::size_t k = 0; live_ok && k < actions.size(); ++k) {
        if (actions[k] != ScheduleAction::proceed && halvings < live.max_halvings) ++halvings;
        live_ok = replayed_log[k].halvings == halvings;
    }
    return {flat_ok && decreasing_ok && live_ok,
            "flat stop " + std::to_string(flat_stop) + ", improving stop " + std::to_string(decreasing_stop) +
                ", live run " + std::to_string(run.result.log.size()) + " epochs replayed " +
                (live_ok ? "identically" : "with differences")};
}

Outcome overfit() {
    const auto t0 = Clock::now();
    SyntheticSpec spec;
    spec.n_samples = 200;
    Dataset d = gen_synthetic(Generator::correlated, spec, 11);
    const std::size_t n = d.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        d.samples[i].split = Split::train;
        Sample copy = d.samples[i];
        copy.split = Split::validation;
        d.samples.push_back(copy);
    }
    TrainConfig t;
    t.class_weighting = false;
    BundleRun run = train_bundle(BundleConfig{}, task_from_dataset(d, 0, false), t, d);
    BundleNetwork net(run.params);
    const double f1 = evaluate(net, d, Split::train).metrics.micro_f1;
    const double secs = seconds_since(t0);
    return {f1 >= 0.99 && run.result.log.size() <= 500 && secs < 120.0,
            "train micro-F1 " + fmt(f1) + " after " + std::to_string(run.result.log.size()) + " epochs, " +
                fmt(secs, 3) + " s"};
}

Outcome embedding_capture() {
    SyntheticSpec spec;
    spec.n_samples = 1000;
    int wins = 0;
    std::string entries;
    for (std::uint64_t seed = 300; seed < 305; ++seed) {
        Dataset d = gen_synthetic(Generator::correlated, spec, seed);
        BundleConfig b;
        b.share_minicolumns = true;
        b.embed_dim = 8;
        TrainConfig t;
        t.seed = seed - 300;
        BundleRun run = train_bundle(b, task_from_dataset(d, 0, true), t, d);
        const Tensor s = embedding_similarity_matrix(run.params.store[run.params.output_first->embedding].value);
        wins += s(0, 1) > s(0, 2);
        entries += " " + fmt(s(0, 1), 3) + ">" + fmt(s(0, 2), 3) + (s(0, 1) > s(0, 2) ? "" : "(no)");
    }
    return {wins >= 4, std::to_string(wins) + "/5 seeds:" + entries};
}

Outcome multiview_synergy() {
    SyntheticSpec spec;
    spec.n_samples = 1000;
    std::vector<double> clb, logistic;
    for (std::uint64_t r = 0; r < 5; ++r) {
        Dataset d = gen_synthetic(Generator::xor_views, spec, 100 + r);
        BundleConfig b;
        b.n_layers = 4;
        b.d_central = 16;
        b.d_mini = 8;
        TrainConfig t;
        t.lr0 = 0.005;
        t.seed = r;
        BundleRun run = train_bundle(b, task_from_dataset(d, 8, false), t, d);
        clb.push_back(1.0 - run.test.metrics.hamming_loss);
        double best_view = 0.0;
        for (std::size_t v = 0; v < d.n_parts(); ++v) {
            best_view = std::max(best_view, fit_logistic(d, v, 0).accuracy(d, Split::test));
        }
        logistic.push_back(best_view);
    }
    const MetricSummary c = summarize(clb);
    const MetricSummary l = summarize(logistic);
    return {c.mean >= 0.95 && l.mean <= 0.6,
            "CLB accuracy " + fmt(c.mean) + "+-" + fmt(c.std, 2) + ", best single-view logistic " + fmt(l.mean) + "+-" +
                fmt(l.std, 2)};
}

double pooled_validation_f1(HighwayRun& run, const Dataset& d) {
    const auto idx = d.indices(Split::validation);
    LabelMatrix preds(idx.size(), std::vector<int>(d.n_outputs(), 0));
    LabelMatrix targets;
    for (auto i : idx) targets.push_back(d.samples[i].targets);
    for (std::size_t o = 0; o < run.nets.size(); ++o) {
        HighwayNetwork net(run.nets[o]);
        EvalResult v = evaluate(net, d, Split::validation);
        for (std::size_t k = 0; k < idx.size(); ++k) preds[k][o] = v.predictions[k][0];
    }
    return evaluate_predictions(preds, targets, d.arities).micro_f1;
}

void write_log(const fs::path& path, const std::vector<EpochRecord>& log) {
    std::ofstream out(path);
    write_epoch_log(out, log);
}

Outcome clb_vs_highway(const fs::path& archive) {
    fs::create_directories(archive);
    std::ofstream summary(archive / "summary.txt");
    SyntheticSpec spec;
    spec.n_samples = 1000;
    std::vector<double> clb, hwn;
    for (std::uint64_t r = 0; r < 5; ++r) {
        Dataset d = gen_synthetic(Generator::correlated, spec, 200 + r);
        TrainConfig t;
        t.seed = r;

        double best_val = -1.0, best_test = 0.0;
        std::string best_name;
        for (std::size_t embed : {0u, 8u}) {
            for (double rate : {0.0, 0.2}) {
                BundleConfig b;
                b.share_minicolumns = embed > 0;
                b.embed_dim = embed;
                t.dropout_rate = rate;
                BundleRun run = train_bundle(b, task_from_dataset(d, 0, embed > 0), t, d);
                BundleNetwork net(run.params);
                const double val = evaluate(net, d, Split::validation).metrics.micro_f1;
                const std::string name = "clb_embed" + std::to_string(embed) + "_dropout" + fmt(rate, 2);
                write_log(archive / (name + "_run" + std::to_string(r) + ".log"), run.result.log);
                summary << "run " << r << " " << name << " val_micro_f1 " << val << " test_micro_f1 "
                        << run.test.metrics.micro_f1 << "\n";
                if (val > best_val) {
                    best_val = val;
                    best_test = run.test.metrics.micro_f1;
                    best_name = name;
                }
            }
        }
        clb.push_back(best_test);
        summary << "run " << r << " selected " << best_name << "\n";

        best_val = -1.0;
        for (std::size_t hidden : {16u, 32u}) {
            for (double rate : {0.0, 0.2}) {
                HighwayConfig h;
                h.hidden = hidden;
                t.dropout_rate = rate;
                HighwayRun run = train_highway_ensemble(h, t, d);
                const double val = pooled_validation_f1(run, d);
                const std::string name = "hwn_hidden" + std::to_string(hidden) + "_dropout" + fmt(rate, 2);
                for (std::size_t o = 0; o < run.results.size(); ++o) {
                    write_log(archive / (name + "_run" + std::to_string(r) + "_label" + std::to_string(o) + ".log"),
                              run.results[o].log);
                }
                summary << "run " << r << " " << name << " val_micro_f1 " << val << " test_micro_f1 "
                        << run.test.micro_f1 << "\n";
                if (val > best_val) {
                    best_val = val;
                    best_test = run.test.micro_f1;
                    best_name = name;
                }
            }
        }
        hwn.push_back(best_test);
        summary << "run " << r << " selected " << best_name << "\n";
    }
    const MetricSummary c = summarize(clb);
    const MetricSummary h = summarize(hwn);
    summary << "clb micro_f1 " << c.mean << "+-" << c.std << "\nhwn micro_f1 " << h.mean << "+-" << h.std << "\n";
    return {c.mean >= h.mean, "CLB micro-F1 " + fmt(c.mean) + "+-" + fmt(c.std, 2) + ", HWN " + fmt(h.mean) + "+-" +
                                  fmt(h.std, 2) + ", logs in " + archive.string()};
}

} // namespace

int main(int argc, char** argv) {
    const fs::path archive = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_logs");
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"gradient correctness", gradient_correctness},
        {"highway identity", highway_identity},
        {"bag exchangeability", exchangeability},
        {"parameter scaling", scaling},
        {"loss recovery", loss_recovery},
        {"metrics oracle", metrics_oracle},
        {"schedule replay", schedule_replay},
        {"overfit", overfit},
        {"label correlation capture", embedding_capture},
        {"multi-view synergy", multiview_synergy},
        {"bundle vs highway baseline", [&] { return clb_vs_highway(archive / "clb_vs_hwn"); }},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k + 1 << "] " << criteria[k].name << ": " << o.detail
                  << " (" << fmt(seconds_since(t0), 3) << " s)" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}

#include "clb/bundle.hpp"
#include "clb/errors.hpp"
#include "clb/tasks.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

using namespace clb;
using clb::testing::all_params;
using clb::testing::fd_max_rel_error;
using clb::testing::random_tensor;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

TaskSpec output_task(std::size_t n_labels, std::size_t d_x = 5, bool embedding = false) {
    TaskSpec t;
    t.kind = TaskKind::multi_output;
    t.input_dims = {d_x};
    t.output_arities.assign(n_labels, 2);
    t.use_label_embedding = embedding;
    return t;
}

BundleConfig small_config(std::size_t layers, std::size_t d, bool shared, Activation act) {
    BundleConfig c;
    c.n_layers = layers;
    c.d_central = d;
    c.d_mini = d;
    c.share_minicolumns = shared;
    c.activation = act;
    return c;
}

void set_all(ParamStore& store, double v) {
    for (auto& p : store.all()) p.value.fill(v);
}

void set_gate_biases(ParamStore& store, double v) {
    for (auto& p : store.all()) {
        if (ends_with(p.name, "b_gate")) p.value.fill(v);
    }
}

std::vector<Var> constants(Tape& tape, const std::vector<Tensor>& ts) {
    std::vector<Var> out;
    for (const auto& t : ts) out.push_back(tape.constant(t));
    return out;
}

/// Scalars stored in one layer block, recounted from the parameter names.
std::size_t enumerate_block(const ParamStore& store, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& p : store.all()) {
        if (p.name.rfind(prefix, 0) == 0) n += p.value.rows() * p.value.cols();
    }
    return n;
}

std::size_t enumerate_body(const ParamStore& store) {
    std::size_t n = 0;
    for (const auto& p : store.all()) {
        if (p.name.find(".block") != std::string::npos) n += p.value.rows() * p.value.cols();
    }
    return n;
}

} // namespace

TEST(CentralStep, ZeroWeightsHalveThePreviousState) {
    BundleParams params = init_params(small_config(2, 3, false, Activation::relu), output_task(2), 1);
    set_all(params.store, 0.0);
    Tape tape;
    const Tensor hc = Tensor::column({1.0, -2.0, 0.5});
    auto minis = constants(tape, {Tensor::column({1, 2, 3}), Tensor::column({-1, 0, 4})});
    StepResult r = central_step(tape, params.store, params.output_stage->block(2), tape.constant(hc),
                                minis, Activation::relu);
    EXPECT_EQ(r.candidate.value(), Tensor(3, 1));
    EXPECT_EQ(r.gate.value(), Tensor(3, 1, 0.5));
    EXPECT_EQ(r.state.value(), Tensor::column({0.5, -1.0, 0.25}));
}

TEST(CentralStep, SaturatedGateCarries) {
    BundleParams params = init_params(small_config(2, 3, false, Activation::relu), output_task(2), 1);
    set_all(params.store, 0.0);
    set_gate_biases(params.store, -50.0);
    Tape tape;
    const Tensor hc = Tensor::column({1.0, -2.0, 0.5});
    auto minis = constants(tape, {Tensor::column({1, 2, 3}), Tensor::column({-1, 0, 4})});
    StepResult r = central_step(tape, params.store, params.output_stage->block(2), tape.constant(hc),
                                minis, Activation::relu);
    EXPECT_LE(max_abs_diff(r.state.value(), hc), 1e-12);
}

TEST(CentralStep, SharedMiniColumnsArePermutationInvariant) {
    std::mt19937_64 rng(2);
    BundleParams params = init_params(small_config(2, 4, true, Activation::tanh), output_task(3), 3);
    Tape tape;
    Var hc = tape.constant(random_tensor(4, 2, rng));
    std::vector<Tensor> ms{random_tensor(4, 2, rng), random_tensor(4, 2, rng), random_tensor(4, 2, rng)};
    const LayerBlock& block = params.output_stage->block(2);
    const Tensor reference =
        central_step(tape, params.store, block, hc, constants(tape, ms), Activation::tanh).state.value();
    std::array<int, 3> order{0, 1, 2};
    do {
        std::vector<Tensor> permuted;
        for (int i : order) permuted.push_back(ms[i]);
        Tensor out = central_step(tape, params.store, block, hc, constants(tape, permuted), Activation::tanh)
                         .state.value();
        EXPECT_LE(max_abs_diff(out, reference), 1e-12);
    } while (std::next_permutation(order.begin(), order.end()));
}

TEST(CentralStep, ShapeMismatchThrows) {
    BundleParams params = init_params(small_config(2, 3, false, Activation::relu), output_task(2), 1);
    Tape tape;
    auto minis = constants(tape, {Tensor(3, 1), Tensor(3, 1)});
    EXPECT_THROW(central_step(tape, params.store, params.output_stage->block(2), tape.constant(Tensor(4, 1)),
                              minis, Activation::relu),
                 DimensionError);
    auto three = constants(tape, {Tensor(3, 1), Tensor(3, 1), Tensor(3, 1)});
    EXPECT_THROW(central_step(tape, params.store, params.output_stage->block(2), tape.constant(Tensor(3, 1)),
                              three, Activation::relu),
                 DimensionError);
}

TEST(MiniStep, ZeroWeightsHalveThePreviousState) {
    BundleParams params = init_params(small_config(2, 3, false, Activation::relu), output_task(2), 1);
    set_all(params.store, 0.0);
    Tape tape;
    const Tensor hi = Tensor::column({2.0, -4.0, 1.0});
    StepResult r = mini_step(tape, params.store, params.output_stage->block(2).mini(0), tape.constant(hi),
                             tape.constant(Tensor::column({1, 1, 1})), Activation::relu);
    EXPECT_EQ(r.state.value(), Tensor::column({1.0, -2.0, 0.5}));
}

TEST(MiniStep, SaturatedGateCarries) {
    BundleParams params = init_params(small_config(2, 3, false, Activation::relu), output_task(2), 1);
    set_all(params.store, 0.0);
    set_gate_biases(params.store, -50.0);
    Tape tape;
    const Tensor hi = Tensor::column({2.0, -4.0, 1.0});
    StepResult r = mini_step(tape, params.store, params.output_stage->block(2).mini(1), tape.constant(hi),
                             tape.constant(Tensor::column({1, 1, 1})), Activation::relu);
    EXPECT_LE(max_abs_diff(r.state.value(), hi), 1e-12);
}

TEST(MiniStep, GradientWrtVMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    BundleParams params = init_params(small_config(2, 4, false, Activation::tanh), output_task(2), 5);
    const MiniBlock& block = params.output_stage->block(2).mini(0);
    Tensor hi = random_tensor(4, 3, rng);
    Tensor hc = random_tensor(4, 3, rng);
    Tensor probe = random_tensor(4, 3, rng);
    auto build = [&](Tape& t) {
        Var s = mini_step(t, params.store, block, t.constant(hi), t.constant(hc), Activation::tanh).state;
        return sum(hadamard(s, t.constant(probe)));
    };
    EXPECT_LE(fd_max_rel_error(build, {&params.store[block.v], &params.store[block.v_gate]}), 1e-4);
}

TEST(BundleForward, SingleLayerIsTheInitialState) {
    std::mt19937_64 rng(5);
    BundleParams params = init_params(small_config(1, 3, false, Activation::relu), output_task(2), 1);
    Tape tape;
    Var hc = tape.constant(random_tensor(3, 2, rng));
    auto minis = constants(tape, {random_tensor(3, 2, rng), random_tensor(3, 2, rng)});
    ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::relu, hc, minis);
    ASSERT_EQ(trace.n_layers(), 1u);
    EXPECT_EQ(trace.central[0].value(), hc.value());
    EXPECT_EQ(trace.mini[1][0].value(), minis[1].value());
    EXPECT_TRUE(trace.central_gate.empty());
}

TEST(BundleForward, ClosedGatesTelescopeToIdentity) {
    std::mt19937_64 rng(6);
    for (bool share_layers : {true, false}) {
        BundleConfig config = small_config(10, 4, false, Activation::tanh);
        config.share_layers = share_layers;
        BundleParams params = init_params(config, output_task(3), 7);
        set_gate_biases(params.store, -50.0);
        Tape tape;
        Var hc = tape.constant(random_tensor(4, 3, rng));
        auto minis = constants(tape, {random_tensor(4, 3, rng), random_tensor(4, 3, rng), random_tensor(4, 3, rng)});
        ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::tanh, hc, minis);
        EXPECT_EQ(trace.central.back().value(), hc.value());
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(trace.mini[i].back().value(), minis[i].value());
    }
}

TEST(BundleForward, SharedMiniColumnsPermuteWithTheirInputs) {
    std::mt19937_64 rng(8);
    BundleParams params = init_params(small_config(5, 4, true, Activation::relu), output_task(3), 9);
    std::vector<Tensor> ms{random_tensor(4, 2, rng), random_tensor(4, 2, rng), random_tensor(4, 2, rng)};
    Tensor hc = random_tensor(4, 2, rng);
    Tape tape;
    ForwardTrace reference =
        bundle_forward(tape, params.store, *params.output_stage, Activation::relu, tape.constant(hc), constants(tape, ms));
    std::array<int, 3> order{0, 1, 2};
    do {
        std::vector<Tensor> permuted;
        for (int i : order) permuted.push_back(ms[i]);
        ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::relu,
                                            tape.constant(hc), constants(tape, permuted));
        for (std::size_t t = 0; t < 5; ++t) {
            EXPECT_LE(max_abs_diff(trace.central[t].value(), reference.central[t].value()), 1e-12);
            for (std::size_t k = 0; k < 3; ++k) {
                EXPECT_LE(max_abs_diff(trace.mini[k][t].value(), reference.mini[order[k]][t].value()), 1e-12);
            }
        }
    } while (std::next_permutation(order.begin(), order.end()));
}

TEST(BundleForward, MismatchedMiniCountThrows) {
    BundleParams params = init_params(small_config(3, 3, false, Activation::relu), output_task(2), 1);
    Tape tape;
    auto minis = constants(tape, {Tensor(3, 1), Tensor(3, 1), Tensor(3, 1)});
    EXPECT_THROW(bundle_forward(tape, params.store, *params.output_stage, Activation::relu,
                                tape.constant(Tensor(3, 1)), minis),
                 DimensionError);
}

TEST(BundleForward, GateCouplingReconstructsEveryLayer) {
    std::mt19937_64 rng(10);
    BundleParams params = init_params(small_config(6, 5, false, Activation::relu), output_task(2), 11);
    Tape tape;
    Var hc = tape.constant(random_tensor(5, 3, rng));
    auto minis = constants(tape, {random_tensor(5, 3, rng), random_tensor(5, 3, rng)});
    ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::relu, hc, minis);
    auto check = [](const Tensor& state, const Tensor& cand, const Tensor& gate, const Tensor& prev) {
        for (std::size_t k = 0; k < state.size(); ++k) {
            EXPECT_GT(gate[k], 0.0);
            EXPECT_LT(gate[k], 1.0);
            EXPECT_NEAR(state[k], gate[k] * cand[k] + (1.0 - gate[k]) * prev[k], 1e-12);
        }
    };
    for (std::size_t t = 1; t < 6; ++t) {
        check(trace.central[t].value(), trace.central_candidate[t - 1].value(),
              trace.central_gate[t - 1].value(), trace.central[t - 1].value());
        for (std::size_t i = 0; i < 2; ++i) {
            check(trace.mini[i][t].value(), trace.mini_candidate[i][t - 1].value(),
                  trace.mini_gate[i][t - 1].value(), trace.mini[i][t - 1].value());
        }
    }
}

TEST(BundleForward, UpdatesReadOnlyTheLayerBelow) {
    std::mt19937_64 rng(12);
    BundleParams params = init_params(small_config(3, 3, false, Activation::tanh), output_task(2), 13);
    Tape tape;
    Var hc = tape.constant(random_tensor(3, 1, rng));
    auto minis = constants(tape, {random_tensor(3, 1, rng), random_tensor(3, 1, rng)});
    ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::tanh, hc, minis);
    const LayerBlock& block = params.output_stage->block(2);
    Tape check;
    Tensor expected = mini_step(check, params.store, block.mini(1), check.constant(minis[1].value()),
                                check.constant(hc.value()), Activation::tanh)
                          .state.value();
    EXPECT_EQ(trace.mini[1][1].value(), expected);
}

TEST(BundleForward, IdentityPropagationHoldsToFiftyLayers) {
    std::mt19937_64 rng(14);
    for (std::size_t layers : {2u, 10u, 25u, 50u}) {
        BundleParams params = init_params(small_config(layers, 4, false, Activation::tanh), output_task(2), 15);
        set_gate_biases(params.store, -50.0);
        Tape tape;
        Var hc = tape.constant(random_tensor(4, 1, rng));
        auto minis = constants(tape, {random_tensor(4, 1, rng), random_tensor(4, 1, rng)});
        ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::tanh, hc, minis);
        EXPECT_EQ(trace.central.back().value(), hc.value());
        const double ratio = trace.central.back().value().norm() / hc.value().norm();
        EXPECT_GE(ratio, 1.0 - 1e-9);
        EXPECT_LE(ratio, 1.0 + 1e-9);
    }
}

TEST(BundleForward, IdenticalSharedInputsGiveIdenticalTraces) {
    std::mt19937_64 rng(16);
    BundleParams params = init_params(small_config(6, 4, true, Activation::relu), output_task(4), 17);
    Tape tape;
    Tensor m = random_tensor(4, 2, rng);
    ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::relu,
                                        tape.constant(random_tensor(4, 2, rng)), constants(tape, {m, m, m, m}));
    for (std::size_t i = 1; i < 4; ++i) {
        for (std::size_t t = 0; t < 6; ++t) {
            EXPECT_LE(max_abs_diff(trace.mini[i][t].value(), trace.mini[0][t].value()), 1e-12);
        }
    }
}

TEST(BundleForward, RepeatedForwardIsBitIdentical) {
    std::mt19937_64 rng(18);
    BundleParams params = init_params(small_config(5, 4, false, Activation::relu), output_task(2), 19);
    Tensor hc = random_tensor(4, 2, rng);
    std::vector<Tensor> ms{random_tensor(4, 2, rng), random_tensor(4, 2, rng)};
    auto run = [&] {
        Tape tape;
        ForwardTrace t = bundle_forward(tape, params.store, *params.output_stage, Activation::relu,
                                        tape.constant(hc), constants(tape, ms));
        return std::make_pair(t.central.back().value(), t.mini[1].back().value());
    };
    EXPECT_EQ(run(), run());
}

TEST(BundleForward, FullNetworkGradientCheck) {
    std::mt19937_64 rng(20);
    for (bool shared : {false, true}) {
        BundleConfig config = small_config(3, 4, shared, Activation::tanh);
        BundleParams params = init_params(config, output_task(2, 3), 21);
        Tensor x = random_tensor(3, 2, rng);
        Tensor probe_c = random_tensor(4, 2, rng);
        Tensor probe_m = random_tensor(4, 2, rng);
        auto build = [&](Tape& t) {
            FirstLayerStates first = init_multi_output(t, params, t.constant(x));
            ForwardTrace trace = bundle_forward(t, params.store, *params.output_stage, Activation::tanh,
                                                first.central, first.minis);
            return add(sum(hadamard(trace.central.back(), t.constant(probe_c))),
                       sum(hadamard(trace.mini[1].back(), t.constant(probe_m))));
        };
        EXPECT_LE(fd_max_rel_error(build, all_params(params.store)), 1e-4) << "shared=" << shared;
    }
}

TEST(InitParams, DeterministicInSeed) {
    BundleConfig config = small_config(4, 5, false, Activation::relu);
    BundleParams a = init_params(config, output_task(3), 42);
    BundleParams b = init_params(config, output_task(3), 42);
    BundleParams c = init_params(config, output_task(3), 43);
    ASSERT_EQ(a.store.size(), b.store.size());
    bool any_differs = false;
    for (std::size_t k = 0; k < a.store.size(); ++k) {
        EXPECT_EQ(a.store.all()[k].value, b.store.all()[k].value);
        any_differs = any_differs || !(a.store.all()[k].value == c.store.all()[k].value);
    }
    EXPECT_TRUE(any_differs);
}

TEST(InitParams, GlorotRangeAndBiases) {
    BundleParams p = init_params(small_config(3, 6, false, Activation::relu), output_task(3, 10), 1);
    for (const auto& param : p.store.all()) {
        const Tensor& v = param.value;
        if (v.cols() == 1 && param.name.find(".b") != std::string::npos) {
            const double expected = ends_with(param.name, "b_gate") ? -1.0 : 0.0;
            for (double x : v.data()) EXPECT_EQ(x, expected) << param.name;
            continue;
        }
        const double a = std::sqrt(6.0 / static_cast<double>(v.rows() + v.cols()));
        for (double x : v.data()) EXPECT_LE(std::abs(x), a) << param.name;
    }
}

TEST(ParamCount, OneByOneBlockByEnumeration) {
    BundleConfig config = small_config(2, 1, false, Activation::relu);
    config.share_layers = false;
    BundleParams p = init_params(config, output_task(1, 1), 0);
    // central W, b, W_gate, b_gate; mini U, U_gate, W, V, b, W_gate, V_gate, b_gate
    EXPECT_EQ(body_param_count(p), 12u);
    EXPECT_EQ(enumerate_body(p.store), 12u);
    std::size_t stored = 0;
    for (const auto& param : p.store.all()) stored += param.value.rows() * param.value.cols();
    EXPECT_EQ(param_count(p), stored);
}

TEST(ParamCount, SharedMiniColumnsIndependentOfM) {
    BundleConfig config = small_config(4, 3, true, Activation::relu);
    const std::size_t at10 = body_param_count(init_params(config, output_task(10), 0));
    const std::size_t at100 = body_param_count(init_params(config, output_task(100), 0));
    EXPECT_EQ(at10, at100);
    BundleParams p20 = init_params(config, output_task(20), 0);
    EXPECT_EQ(body_param_count(p20), at10);
    EXPECT_EQ(enumerate_body(p20.store), at10);
}

TEST(ParamCount, UnsharedMiniColumnsAddWholeBlocks) {
    BundleConfig config = small_config(2, 3, false, Activation::relu);
    const std::size_t m = 5;
    BundleParams p = init_params(config, output_task(m), 0);
    BundleParams p2 = init_params(config, output_task(2 * m), 0);
    const std::size_t per_mini = enumerate_block(p.store, "out.block0.mini0.");
    EXPECT_EQ(per_mini, 3u * 3 * 6 + 3 * 2);
    EXPECT_EQ(body_param_count(p2) - body_param_count(p), m * per_mini);
}

TEST(ParamCount, UnsharedLayersScaleWithGatedLayerCount) {
    BundleConfig config = small_config(10, 3, false, Activation::relu);
    config.share_layers = false;
    BundleParams p = init_params(config, output_task(2), 0);
    const std::size_t per_layer = enumerate_block(p.store, "out.block0.");
    EXPECT_EQ(body_param_count(p), 9 * per_layer);
    config.share_layers = true;
    EXPECT_EQ(body_param_count(init_params(config, output_task(2), 0)), per_layer);
}

TEST(EmbedLabels, IdentityEmbedding) {
    Tape tape;
    auto cols = embed_labels(tape.constant(Tensor::identity(3)), 3);
    ASSERT_EQ(cols.size(), 3u);
    EXPECT_EQ(cols[2].value(), Tensor::column({0, 0, 1}));
    EXPECT_THROW(embed_labels(tape.constant(Tensor::identity(3)), 4), DimensionError);
}

TEST(EmbedLabels, IdenticalColumnsGiveIdenticalTraces) {
    BundleConfig config = small_config(4, 4, true, Activation::relu);
    config.embed_dim = 3;
    BundleParams params = init_params(config, output_task(3, 5, true), 2);
    Tensor& e = params.store[params.output_first->embedding].value;
    for (std::size_t r = 0; r < e.rows(); ++r) e(r, 1) = e(r, 2) = e(r, 0);
    std::mt19937_64 rng(3);
    Tape tape;
    FirstLayerStates first = init_multi_output(tape, params, tape.constant(random_tensor(5, 2, rng)));
    ForwardTrace trace = bundle_forward(tape, params.store, *params.output_stage, Activation::relu,
                                        first.central, first.minis);
    for (std::size_t t = 0; t < 4; ++t) {
        EXPECT_EQ(trace.mini[1][t].value(), trace.mini[0][t].value());
        EXPECT_EQ(trace.mini[2][t].value(), trace.mini[0][t].value());
    }
}

TEST(EmbedLabels, EmbeddingReceivesLossGradient) {
    BundleConfig config = small_config(3, 4, true, Activation::tanh);
    config.embed_dim = 3;
    BundleParams params = init_params(config, output_task(3, 5, true), 4);
    Sample s;
    s.parts = {FeatureVector::dense({0.3, -1.0, 0.2, 0.8, -0.5})};
    s.targets = {1, 0, 1};
    std::array<const Sample*, 1> batch{&s};
    auto build = [&](Tape& t) {
        BundleForward f = forward(t, params, batch);
        return multilabel_loss(f.prediction, targets_of(batch), ClassWeights::unit({2, 2, 2}));
    };
    Parameter& e = params.store[params.output_first->embedding];
    EXPECT_LE(fd_max_rel_error(build, {&e}), 1e-4);
    EXPECT_GT(e.grad.norm(), 0.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    for (TaskKind kind : {TaskKind::multi_output, TaskKind::multi_input, TaskKind::multi_in_out}) {
        TaskSpec task;
        task.kind = kind;
        task.input_dims = kind == TaskKind::multi_output ? std::vector<std::size_t>{7}
                                                         : std::vector<std::size_t>{3, 5};
        task.output_arities = kind == TaskKind::multi_input ? std::vector<std::size_t>{4}
                                                             : std::vector<std::size_t>{2, 3};
        task.projection_dim = kind == TaskKind::multi_output ? 0 : 4;
        BundleConfig config = small_config(3, 4, false, Activation::tanh);
        BundleParams p = init_params(config, task, 99);
        p.store.all()[0].value(0, 0) = 0.1 + 0.2;
        p.store.all()[1].value[0] = -1.0 / 3.0;
        std::stringstream buf;
        save_checkpoint(buf, p);
        BundleParams q = load_checkpoint(buf);
        ASSERT_EQ(q.store.size(), p.store.size());
        for (std::size_t k = 0; k < p.store.size(); ++k) {
            EXPECT_EQ(q.store.all()[k].name, p.store.all()[k].name);
            EXPECT_EQ(q.store.all()[k].value, p.store.all()[k].value);
        }
        EXPECT_EQ(q.task.kind, kind);
        EXPECT_EQ(q.task.output_arities, task.output_arities);
        EXPECT_EQ(q.config.n_layers, 3u);
        EXPECT_EQ(q.config.activation, Activation::tanh);
    }
}

TEST(Checkpoint, RejectsForeignText) {
    std::stringstream buf("hello\n");
    EXPECT_ANY_THROW(load_checkpoint(buf));
}

TEST(Config, InvariantsEnforced) {
    BundleConfig c = small_config(0, 4, false, Activation::relu);
    EXPECT_ANY_THROW(c.validate());
    BundleConfig e = small_config(3, 4, false, Activation::relu);
    e.embed_dim = 3;
    EXPECT_ANY_THROW(init_params(e, output_task(3, 5, true), 0));
    TaskSpec bags;
    bags.kind = TaskKind::multi_input;
    bags.input_dims = {6};
    bags.output_arities = {2};
    bags.projection_dim = 4;
    bags.variable_parts = true;
    EXPECT_ANY_THROW(init_params(small_config(3, 4, false, Activation::relu), bags, 0));
    EXPECT_NO_THROW(init_params(small_config(3, 4, true, Activation::relu), bags, 0));
}

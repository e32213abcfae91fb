#include "clb/cli.hpp"

#include "clb/data.hpp"
#include "clb/errors.hpp"
#include "clb/textio.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

namespace clb::cli {

namespace fs = std::filesystem;

namespace {

std::size_t to_size(const std::string& key, const std::string& value) {
    auto v = textio::parse_size(textio::trim(value));
    if (!v) throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    return *v;
}

double to_double(const std::string& key, const std::string& value) {
    auto v = textio::parse_double(textio::trim(value));
    if (!v) throw ConfigError(key + ": expected a number, got '" + value + "'");
    return *v;
}

bool to_bool(const std::string& key, const std::string& value) {
    const std::string v(textio::trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string model_name(ModelKind m) { return m == ModelKind::clb ? "clb" : "hwn"; }

ModelKind parse_model(const std::string& s) {
    if (s == "clb") return ModelKind::clb;
    if (s == "hwn") return ModelKind::hwn;
    throw ConfigError("unknown model '" + s + "' (expected clb or hwn)");
}

struct Setting {
    std::string key;
    std::function<void(RunSpec&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunSpec&)> get;
};

#define CLB_SIZE(KEY, FIELD)                                                                    \
    Setting{KEY, [](RunSpec& s, const std::string& k, const std::string& v) { s.FIELD = to_size(k, v); }, \
            [](const RunSpec& s) { return std::to_string(s.FIELD); }}
#define CLB_DOUBLE(KEY, FIELD)                                                                  \
    Setting{KEY, [](RunSpec& s, const std::string& k, const std::string& v) { s.FIELD = to_double(k, v); }, \
            [](const RunSpec& s) { return textio::format_double(s.FIELD); }}
#define CLB_BOOL(KEY, FIELD)                                                                    \
    Setting{KEY, [](RunSpec& s, const std::string& k, const std::string& v) { s.FIELD = to_bool(k, v); }, \
            [](const RunSpec& s) { return from_bool(s.FIELD); }}

const std::vector<Setting>& settings() {
    static const std::vector<Setting> table = {
        Setting{"data.path", [](RunSpec& s, const std::string&, const std::string& v) { s.data_path = v; },
                [](const RunSpec& s) { return s.data_path; }},
        CLB_SIZE("data.split_seed", split_seed),
        CLB_SIZE("task.projection_dim", projection_dim),
        CLB_BOOL("task.label_embedding", label_embedding),
        CLB_SIZE("bundle.n_layers", bundle.n_layers),
        CLB_SIZE("bundle.n_output_layers", bundle.n_output_layers),
        CLB_SIZE("bundle.d_central", bundle.d_central),
        CLB_SIZE("bundle.d_mini", bundle.d_mini),
        CLB_SIZE("bundle.n_minicolumns", bundle.n_minicolumns),
        CLB_BOOL("bundle.share_layers", bundle.share_layers),
        CLB_BOOL("bundle.share_minicolumns", bundle.share_minicolumns),
        CLB_BOOL("bundle.share_input_minicolumns", bundle.share_input_minicolumns),
        CLB_SIZE("bundle.embed_dim", bundle.embed_dim),
        Setting{"bundle.activation",
                [](RunSpec& s, const std::string&, const std::string& v) { s.bundle.activation = parse_activation(v); },
                [](const RunSpec& s) { return to_string(s.bundle.activation); }},
        Setting{"train.model", [](RunSpec& s, const std::string&, const std::string& v) { s.model = parse_model(v); },
                [](const RunSpec& s) { return model_name(s.model); }},
        CLB_DOUBLE("train.lr0", train.lr0),
        CLB_SIZE("train.patience_epochs", train.patience_epochs),
        CLB_SIZE("train.warmup_epochs", train.warmup_epochs),
        CLB_SIZE("train.max_halvings", train.max_halvings),
        CLB_SIZE("train.max_epochs", train.max_epochs),
        Setting{"train.optimizer",
                [](RunSpec& s, const std::string&, const std::string& v) { s.train.optimizer = parse_optimizer(v); },
                [](const RunSpec& s) { return to_string(s.train.optimizer); }},
        CLB_SIZE("train.batch_size", train.batch_size),
        CLB_DOUBLE("train.dropout_rate", train.dropout_rate),
        CLB_SIZE("train.seed", train.seed),
        CLB_SIZE("train.n_runs", train.n_runs),
        Setting{"train.monitor",
                [](RunSpec& s, const std::string&, const std::string& v) { s.train.monitor = parse_monitor(v); },
                [](const RunSpec& s) { return to_string(s.train.monitor); }},
        CLB_BOOL("train.class_weighting", train.class_weighting),
        CLB_DOUBLE("train.improvement_tolerance", train.improvement_tolerance),
        CLB_SIZE("hwn.hidden", hwn.hidden),
        CLB_SIZE("hwn.n_layers", hwn.n_layers),
        Setting{"hwn.activation",
                [](RunSpec& s, const std::string&, const std::string& v) { s.hwn.activation = parse_activation(v); },
                [](const RunSpec& s) { return to_string(s.hwn.activation); }},
        Setting{"output.dir", [](RunSpec& s, const std::string&, const std::string& v) { s.output_dir = v; },
                [](const RunSpec& s) { return s.output_dir; }},
    };
    return table;
}

#undef CLB_SIZE
#undef CLB_DOUBLE
#undef CLB_BOOL

} // namespace

void RunSpec::validate() const {
    if (data_path.empty()) throw ConfigError("data.path is required");
    if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
    bundle.validate();
    train.validate();
    if (hwn.hidden < 1 || hwn.n_layers < 1) throw ConfigError("hwn.hidden and hwn.n_layers must be >= 1");
}

void apply_setting(RunSpec& spec, const std::string& key, const std::string& value) {
    for (const Setting& s : settings()) {
        if (s.key == key) {
            s.set(spec, key, value);
            return;
        }
    }
    throw ConfigError("unknown setting '" + key + "'");
}

RunSpec load_run_spec(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    RunSpec spec;
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    for (const CLI::ConfigItem& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (item.parents.size() != 1) {
            throw ConfigError(path + ": setting '" + item.name + "' must sit in one [section]");
        }
        std::string value;
        for (const auto& piece : item.inputs) value += (value.empty() ? "" : " ") + piece;
        apply_setting(spec, item.parents[0] + "." + item.name, value);
    }
    if (!spec.data_path.empty() && fs::path(spec.data_path).is_relative()) {
        spec.data_path = (fs::path(path).parent_path() / spec.data_path).lexically_normal().string();
    }
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not section.key=value");
        apply_setting(spec, std::string(textio::trim(o.substr(0, eq))), std::string(textio::trim(o.substr(eq + 1))));
    }
    spec.validate();
    return spec;
}

std::vector<std::pair<std::string, std::string>> settings_of(const RunSpec& spec) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Setting& s : settings()) out.emplace_back(s.key, s.get(spec));
    return out;
}

void write_run_spec(std::ostream& out, const RunSpec& spec) {
    std::string section;
    for (const auto& [key, value] : settings_of(spec)) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        out << key.substr(dot + 1) << " = " << value << '\n';
    }
}

void check_compatible(const TaskSpec& task, const Dataset& data) {
    const bool bags = data.kind == DatasetKind::bags;
    const bool multilabel = data.kind == DatasetKind::multilabel;
    if ((task.kind == TaskKind::multi_output) != multilabel || task.variable_parts != bags) {
        throw SchemaError("checkpoint wiring " + to_string(task.kind) + " cannot read a " +
                          to_string(data.kind) + " dataset");
    }
    if (task.input_dims != data.part_dims) {
        throw SchemaError("checkpoint reads parts of dims " + textio::join_sizes(task.input_dims) +
                          ", dataset has " + textio::join_sizes(data.part_dims));
    }
    if (task.output_arities != data.arities) {
        throw SchemaError("checkpoint predicts outputs of arities " + textio::join_sizes(task.output_arities) +
                          ", dataset has " + textio::join_sizes(data.arities));
    }
}

void write_report(std::ostream& out, const Report& report) {
    for (const auto& [k, v] : report) out << k << '=' << v << '\n';
}

Report read_report(std::istream& in) {
    Report report;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (textio::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
        report.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return report;
}

namespace {

std::string fmt(double v) { return textio::format_double(v); }

void metrics_entries(Report& r, Split split, const MetricsReport& m) {
    r.emplace_back("split", to_string(split));
    r.emplace_back("n_samples", std::to_string(m.n_samples));
    r.emplace_back("micro_f1", fmt(m.micro_f1));
    r.emplace_back("hamming_loss", fmt(m.hamming_loss));
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    body(out);
    if (!out) throw UsageError("write to '" + path.string() + "' failed");
}

void write_report_file(const fs::path& path, const Report& r) {
    write_file(path, [&](std::ostream& o) { write_report(o, r); });
}

void write_log_file(const fs::path& path, const std::vector<EpochRecord>& log) {
    write_file(path, [&](std::ostream& o) { write_epoch_log(o, log); });
}

Report summary_report(const std::string& model, const MultiRunSummary& s) {
    Report r;
    r.emplace_back("model", model);
    r.emplace_back("split", "test");
    r.emplace_back("n_runs", std::to_string(s.runs.size()));
    r.emplace_back("micro_f1_mean", fmt(s.micro_f1.mean));
    r.emplace_back("micro_f1_std", fmt(s.micro_f1.std));
    r.emplace_back("hamming_loss_mean", fmt(s.hamming_loss.mean));
    r.emplace_back("hamming_loss_std", fmt(s.hamming_loss.std));
    for (std::size_t k = 0; k < s.runs.size(); ++k) {
        r.emplace_back("run" + std::to_string(k) + "_micro_f1", fmt(s.runs[k].micro_f1));
        r.emplace_back("run" + std::to_string(k) + "_hamming_loss", fmt(s.runs[k].hamming_loss));
    }
    return r;
}

} // namespace

int cmd_train(const RunSpec& spec, std::ostream& out, std::ostream& err) {
    spec.validate();
    const Dataset data = load_dataset(spec.data_path, spec.split_seed);
    const fs::path root = spec.output_dir;

    const std::size_t n_runs = spec.train.n_runs;
    bool diverged = false;
    auto run_dir = [&](std::size_t r) {
        fs::path dir = n_runs == 1 ? root : root / ("run_" + std::to_string(r));
        fs::create_directories(dir);
        return dir;
    };

    const TaskSpec task = task_from_dataset(data, spec.projection_dim, spec.label_embedding);
    if (spec.model == ModelKind::clb) validate(spec.bundle, task);
    fs::create_directories(root);
    write_file(root / "run.ini", [&](std::ostream& o) { write_run_spec(o, spec); });
    std::function<MetricsReport(std::uint64_t, std::size_t)> run_one;
    if (spec.model == ModelKind::clb) {
        run_one = [&](std::uint64_t seed, std::size_t r) {
            const fs::path dir = run_dir(r);
            TrainConfig config = spec.train;
            config.seed = seed;
            BundleRun run = train_bundle(spec.bundle, task, config, data);
            save_checkpoint((dir / "model.ckpt").string(), run.params);
            write_log_file(dir / "train.log", run.result.log);
            Report report{{"model", "clb"}};
            metrics_entries(report, Split::test, run.test.metrics);
            report.emplace_back("loss", fmt(run.test.loss));
            report.emplace_back("epochs", std::to_string(run.result.log.size()));
            report.emplace_back("best_epoch", std::to_string(run.result.best_epoch));
            report.emplace_back("stop_reason", run.result.stop_reason);
            report.emplace_back("seed", std::to_string(seed));
            write_report_file(dir / "metrics.txt", report);
            if (n_runs == 1) write_report(out, report);
            if (run.result.diverged) {
                diverged = true;
                err << "run " << r << ": " << run.result.stop_reason << '\n';
            }
            return run.test.metrics;
        };
    } else {
        run_one = [&](std::uint64_t seed, std::size_t r) {
            const fs::path dir = run_dir(r);
            TrainConfig config = spec.train;
            config.seed = seed;
            HighwayRun run = train_highway_ensemble(spec.hwn, config, data);
            Report report{{"model", "hwn"}};
            metrics_entries(report, Split::test, run.test);
            for (std::size_t o = 0; o < run.results.size(); ++o) {
                write_log_file(dir / ("label" + std::to_string(o) + ".log"), run.results[o].log);
                report.emplace_back("label" + std::to_string(o) + "_epochs",
                                    std::to_string(run.results[o].log.size()));
                if (run.results[o].diverged) {
                    diverged = true;
                    err << "run " << r << ", label " << o << ": " << run.results[o].stop_reason << '\n';
                }
            }
            report.emplace_back("seed", std::to_string(seed));
            write_report_file(dir / "metrics.txt", report);
            if (n_runs == 1) write_report(out, report);
            return run.test;
        };
    }

    const MultiRunSummary summary = multi_run(run_one, spec.train.seed, n_runs);
    if (n_runs > 1) {
        const Report report = summary_report(model_name(spec.model), summary);
        write_report_file(root / "metrics.txt", report);
        write_report(out, report);
    }
    return diverged ? kExitNumeric : kExitOk;
}

namespace {

std::vector<std::string> checkpoints_in(const fs::path& runs_dir) {
    if (!fs::is_directory(runs_dir)) throw UsageError("'" + runs_dir.string() + "' is not a directory");
    std::vector<std::pair<std::size_t, std::string>> found;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        const std::string name = entry.path().filename().string();
        if (!entry.is_directory() || !name.starts_with("run_")) continue;
        auto index = textio::parse_size(std::string_view(name).substr(4));
        const fs::path ckpt = entry.path() / "model.ckpt";
        if (index && fs::exists(ckpt)) found.emplace_back(*index, ckpt.string());
    }
    if (found.empty()) throw UsageError("no run_*/model.ckpt under '" + runs_dir.string() + "'");
    std::sort(found.begin(), found.end());
    std::vector<std::string> out;
    for (auto& f : found) out.push_back(std::move(f.second));
    return out;
}

int cmd_eval(const std::vector<std::string>& checkpoints, const std::string& data_path,
             std::uint64_t split_seed, Split split, std::ostream& out) {
    if (checkpoints.empty()) throw UsageError("eval needs --checkpoint or --runs-dir");
    const Dataset data = load_dataset(data_path, split_seed);
    std::vector<EvalResult> results;
    for (const std::string& path : checkpoints) {
        BundleParams params = load_checkpoint(path);
        check_compatible(params.task, data);
        BundleNetwork net(std::move(params));
        results.push_back(evaluate(net, data, split));
    }
    Report report;
    if (results.size() == 1) {
        metrics_entries(report, split, results[0].metrics);
        report.emplace_back("loss", fmt(results[0].loss));
    } else {
        std::vector<double> f1, hl;
        for (const auto& r : results) {
            f1.push_back(r.metrics.micro_f1);
            hl.push_back(r.metrics.hamming_loss);
        }
        const MetricSummary sf = summarize(f1), sh = summarize(hl);
        report.emplace_back("split", to_string(split));
        report.emplace_back("n_runs", std::to_string(results.size()));
        report.emplace_back("micro_f1_mean", fmt(sf.mean));
        report.emplace_back("micro_f1_std", fmt(sf.std));
        report.emplace_back("hamming_loss_mean", fmt(sh.mean));
        report.emplace_back("hamming_loss_std", fmt(sh.std));
        report.emplace_back("micro_f1", fmt(sf.mean) + "+-" + fmt(sf.std));
        report.emplace_back("hamming_loss", fmt(sh.mean) + "+-" + fmt(sh.std));
    }
    write_report(out, report);
    return kExitOk;
}

int cmd_inspect(const std::string& checkpoint, const std::string& data_path, std::uint64_t split_seed,
                const std::string& what, std::size_t sample, const std::string& out_dir,
                std::ostream& out) {
    BundleParams params = load_checkpoint(checkpoint);
    const Dataset data = load_dataset(data_path, split_seed);
    check_compatible(params.task, data);
    fs::create_directories(out_dir);
    Report report{{"what", what}};
    if (what == "embeddings") {
        if (!params.output_first || !params.output_first->embedding.valid()) {
            throw UsageError("checkpoint has no label embedding");
        }
        std::vector<std::size_t> zero;
        const Tensor sim =
            embedding_similarity_matrix(params.store[params.output_first->embedding].value, &zero);
        const Tensor co = label_cooccurrence_matrix(data);
        const fs::path sim_path = fs::path(out_dir) / "embedding_similarity.txt";
        const fs::path co_path = fs::path(out_dir) / "label_cooccurrence.txt";
        write_grid(sim_path.string(), sim);
        write_grid(co_path.string(), co);
        report.emplace_back("embedding_similarity", sim_path.string());
        report.emplace_back("label_cooccurrence", co_path.string());
        report.emplace_back("zero_columns", textio::join_sizes(zero));
    } else if (what == "hidden") {
        if (sample >= data.samples.size()) {
            throw UsageError("sample " + std::to_string(sample) + " outside dataset of " +
                             std::to_string(data.samples.size()));
        }
        Tape tape;
        const Sample* one[] = {&data.samples[sample]};
        BundleForward f = forward(tape, params, one);
        std::vector<std::string> files;
        if (f.input_trace) {
            auto w = dump_hidden_dynamics(*f.input_trace, 0, out_dir, "input_");
            files.insert(files.end(), w.begin(), w.end());
        }
        if (f.output_trace) {
            auto w = dump_hidden_dynamics(*f.output_trace, 0, out_dir, "output_");
            files.insert(files.end(), w.begin(), w.end());
        }
        report.emplace_back("sample", std::to_string(sample));
        report.emplace_back("n_files", std::to_string(files.size()));
        for (std::size_t k = 0; k < files.size(); ++k) report.emplace_back("file" + std::to_string(k), files[k]);
    } else {
        throw UsageError("unknown inspect mode '" + what + "' (expected embeddings or hidden)");
    }
    write_report(out, report);
    return kExitOk;
}

int cmd_gen(Generator kind, const SyntheticSpec& spec, std::uint64_t seed, const std::string& path,
            std::ostream& out) {
    const Dataset data = gen_synthetic(kind, spec, seed);
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    save_dataset(path, data);
    Report report{{"kind", to_string(kind)},
                  {"format", to_string(data.kind)},
                  {"path", path},
                  {"n_samples", std::to_string(data.samples.size())},
                  {"n_train", std::to_string(data.count(Split::train))},
                  {"n_validation", std::to_string(data.count(Split::validation))},
                  {"n_test", std::to_string(data.count(Split::test))},
                  {"density", fmt(data.density())}};
    write_report(out, report);
    return kExitOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Column bundle networks for multi-label, multi-view and multi-instance data", "clb"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "train from an INI run config");
    std::string config_path, train_out;
    std::vector<std::string> overrides;
    train_cmd->add_option("config", config_path, "run config (INI)")->required();
    train_cmd->add_option("--set", overrides, "override, section.key=value")->take_all();
    train_cmd->add_option("--out", train_out, "output directory (overrides config and env)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on a dataset split");
    std::vector<std::string> checkpoints;
    std::string runs_dir, data_path, split_name = "test";
    std::uint64_t split_seed = 0;
    eval_cmd->add_option("--checkpoint", checkpoints, "checkpoint file (repeatable)");
    eval_cmd->add_option("--runs-dir", runs_dir, "directory holding run_*/model.ckpt");
    eval_cmd->add_option("--data", data_path, "dataset file")->required();
    eval_cmd->add_option("--split", split_name, "train, validation or test");
    eval_cmd->add_option("--split-seed", split_seed, "seed for untagged datasets");

    auto* inspect_cmd = app.add_subcommand("inspect", "dump embedding similarities or hidden dynamics");
    std::string inspect_ckpt, inspect_data, what, inspect_out = "inspect-out";
    std::size_t sample = 0;
    std::uint64_t inspect_seed = 0;
    inspect_cmd->add_option("--checkpoint", inspect_ckpt, "checkpoint file")->required();
    inspect_cmd->add_option("--data", inspect_data, "dataset file")->required();
    inspect_cmd->add_option("--what", what, "embeddings or hidden")->required();
    inspect_cmd->add_option("--sample", sample, "sample index for hidden");
    inspect_cmd->add_option("--out", inspect_out, "output directory");
    inspect_cmd->add_option("--split-seed", inspect_seed, "seed for untagged datasets");

    auto* gen_cmd = app.add_subcommand("gen", "write a synthetic dataset");
    std::string gen_kind, gen_out;
    std::uint64_t gen_seed = 0;
    SyntheticSpec gen_spec;
    gen_cmd->add_option("--kind", gen_kind, "correlated, xor_views or bags")->required();
    gen_cmd->add_option("--out", gen_out, "output file")->required();
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--n-samples", gen_spec.n_samples, "sample count");
    gen_cmd->add_option("--n-features", gen_spec.n_features, "correlated: feature count");
    gen_cmd->add_option("--n-views", gen_spec.n_views, "xor_views: view count");
    gen_cmd->add_option("--view-dim", gen_spec.view_dim, "xor_views: view dimension");
    gen_cmd->add_option("--instance-dim", gen_spec.instance_dim, "bags: instance dimension");
    gen_cmd->add_option("--max-bag-size", gen_spec.max_bag_size, "bags: largest bag");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) {
            RunSpec spec = load_run_spec(config_path, overrides);
            if (!train_out.empty()) spec.output_dir = train_out;
            else if (const char* env = std::getenv(kOutputDirEnv); env && *env) spec.output_dir = env;
            return cmd_train(spec, out, err);
        }
        if (*eval_cmd) {
            std::vector<std::string> all = checkpoints;
            if (!runs_dir.empty()) {
                auto found = checkpoints_in(runs_dir);
                all.insert(all.end(), found.begin(), found.end());
            }
            return cmd_eval(all, data_path, split_seed, parse_split(split_name), out);
        }
        if (*inspect_cmd) {
            if (const char* env = std::getenv(kOutputDirEnv); env && *env && inspect_cmd->count("--out") == 0) {
                inspect_out = env;
            }
            return cmd_inspect(inspect_ckpt, inspect_data, inspect_seed, what, sample, inspect_out, out);
        }
        if (*gen_cmd) return cmd_gen(parse_generator(gen_kind), gen_spec, gen_seed, gen_out, out);
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace clb::cli

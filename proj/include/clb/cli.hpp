#pragma once

// Command-line frontend: train, eval, inspect, gen.
//
// Run configs are INI files with sections [data], [task], [bundle], [train],
// [hwn] and [output]; `--set section.key=value` overrides a file value and
// CLB_OUTPUT_DIR overrides [output] dir. Exit codes: 0 success, 2 usage,
// config, schema or parse error, 3 numeric failure.

#include "clb/bundle.hpp"
#include "clb/dataset.hpp"
#include "clb/training.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace clb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

inline constexpr const char* kOutputDirEnv = "CLB_OUTPUT_DIR";

enum class ModelKind { clb, hwn };

struct RunSpec {
    std::string data_path;
    std::uint64_t split_seed = 0;
    std::size_t projection_dim = 8;
    bool label_embedding = false;
    ModelKind model = ModelKind::clb;
    BundleConfig bundle;
    TrainConfig train;
    HighwayConfig hwn;
    std::string output_dir = "clb-out";

    /// Re-checks every field-level invariant.
    void validate() const;
};

/// Applies one "section.key" = value setting; unknown keys are config errors.
void apply_setting(RunSpec& spec, const std::string& key, const std::string& value);
/// Reads an INI file and then the overrides ("section.key=value").
RunSpec load_run_spec(const std::string& path, const std::vector<std::string>& overrides = {});
/// Every setting as "section.key" -> value, in a form apply_setting accepts.
std::vector<std::pair<std::string, std::string>> settings_of(const RunSpec& spec);
void write_run_spec(std::ostream& out, const RunSpec& spec);

/// Throws SchemaError when a checkpoint's task cannot read the dataset.
void check_compatible(const TaskSpec& task, const Dataset& data);

/// key=value lines.
using Report = std::vector<std::pair<std::string, std::string>>;
void write_report(std::ostream& out, const Report& report);
Report read_report(std::istream& in);

int cmd_train(const RunSpec& spec, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace clb::cli

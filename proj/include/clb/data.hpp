#pragma once

// Dataset formats, synthetic generators, metrics and analysis dumps.
//
// Multi-label text format, one sample per line:
//
//   # clb-multilabel n_features=120 n_labels=101      (optional header)
//   0,2 1:0.5 7:1.25 # train
//
// The first token lists the positive labels (0-based, comma-separated); "-"
// or a first token holding ':' means no positive labels. Feature indices are
// 1-based and strictly increasing. A trailing "# train|validation|test" tag
// fixes the split; either every sample carries one or none does. Other lines
// starting with '#' are comments.
//
// Multi-view and bag formats are JSON lines. The first record is metadata:
//
//   {"format":"clb-multiview","parts":[{"name":"a","dim":4},...],"arities":[2]}
//   {"format":"clb-bags","dim":6,"arities":[2]}
//
// followed by one record per sample:
//
//   {"parts":{"a":[0.1,...],"b":{"indices":[0,3],"values":[1,2]}},"targets":[1],"split":"train"}
//   {"instances":[[...],[...]],"targets":[0],"split":"test"}
//
// Sparse indices in JSON records are 0-based. "split" is optional under the
// same all-or-none rule.

#include "clb/bundle.hpp"
#include "clb/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace clb {

inline constexpr double kTrainFraction = 0.6;
inline constexpr double kValidationFraction = 0.2;

/// Seeded shuffle into train / validation / test.
void assign_splits(Dataset& data, std::uint64_t seed, double train_fraction = kTrainFraction,
                   double validation_fraction = kValidationFraction);

Dataset load_multilabel(std::istream& in, std::uint64_t split_seed = 0);
Dataset load_multiview(std::istream& in, std::uint64_t split_seed = 0);
Dataset load_bags(std::istream& in, std::uint64_t split_seed = 0);
void save_multilabel(std::ostream& out, const Dataset& data);
void save_multiview(std::ostream& out, const Dataset& data);
void save_bags(std::ostream& out, const Dataset& data);

Dataset load_multilabel(const std::string& path, std::uint64_t split_seed = 0);
Dataset load_multiview(const std::string& path, std::uint64_t split_seed = 0);
Dataset load_bags(const std::string& path, std::uint64_t split_seed = 0);

/// Picks the loader from the first line of the file.
Dataset load_dataset(const std::string& path, std::uint64_t split_seed = 0);
void save_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

// Synthetic data -----------------------------------------------------------

enum class Generator { correlated, xor_views, bags };

std::string to_string(Generator g);
Generator parse_generator(const std::string& s);

struct SyntheticSpec {
    std::size_t n_samples = 1000;
    /// correlated: feature count. The last feature drives the label-2 flip.
    std::size_t n_features = 12;
    /// correlated: label 2 disagrees with label 1 when the flip feature
    /// exceeds this (standard-normal 90% quantile by default).
    double flip_threshold = 1.2815515655446004;
    /// xor_views: views and their dimension.
    std::size_t n_views = 2;
    std::size_t view_dim = 4;
    /// bags: instance dimension, largest bag, trigger threshold on feature 0.
    std::size_t instance_dim = 6;
    std::size_t max_bag_size = 5;
    double trigger_threshold = 0.8416212335729143;
    double train_fraction = kTrainFraction;
    double validation_fraction = kValidationFraction;
};

/// correlated: three binary labels. l1 is a linear rule on one feature group,
/// l2 equals l1 except when the flip feature is high, l3 is a linear rule on a
/// disjoint group. xor_views: one binary target, the XOR of the sign of
/// feature 0 of each view. bags: 1..max_bag_size instances, positive iff some
/// instance has feature 0 above the trigger threshold.
Dataset gen_synthetic(Generator kind, const SyntheticSpec& spec, std::uint64_t seed);

// Metrics ------------------------------------------------------------------

/// [sample][output] class indices.
using LabelMatrix = std::vector<std::vector<int>>;

struct LabelCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

/// Multi-class outputs are expanded one-hot: a k-class output contributes k
/// indicator labels to the pooled counts and one slot to the Hamming loss.
/// Binary outputs contribute their positive class only.
struct MetricsReport {
    double micro_f1 = 1.0;
    double hamming_loss = 0.0;
    std::size_t n_samples = 0;
    /// Per indicator label, in output order.
    std::vector<LabelCounts> per_label;
};

MetricsReport evaluate_predictions(const LabelMatrix& preds, const LabelMatrix& targets,
                                   const std::vector<std::size_t>& arities);
double micro_f1(const LabelMatrix& preds, const LabelMatrix& targets,
                const std::vector<std::size_t>& arities);
double hamming_loss(const LabelMatrix& preds, const LabelMatrix& targets,
                    const std::vector<std::size_t>& arities);
/// All outputs binary.
double micro_f1(const LabelMatrix& preds, const LabelMatrix& targets);
double hamming_loss(const LabelMatrix& preds, const LabelMatrix& targets);

// Analysis -----------------------------------------------------------------

/// Affine map sending the minimum entry to 0 and 1 to 1. Inputs are
/// similarity matrices with unit diagonal; a constant matrix maps to ones.
Tensor rescale_unit(const Tensor& m);

/// Cosine similarity between columns of E, rescaled. Zero-norm columns get
/// similarity 0 to every other label and are listed in `zero_columns`.
Tensor embedding_similarity_matrix(const Tensor& embedding,
                                   std::vector<std::size_t>* zero_columns = nullptr);

/// Pearson correlation between the positive-indicator vectors of each pair of
/// outputs over all samples, rescaled. Constant indicators correlate 0.
Tensor label_cooccurrence_matrix(const Dataset& data);

/// T x d grid of one sample's states through the layers.
Tensor hidden_grid(const std::vector<Var>& states, std::size_t sample);

/// Header "T d", then T whitespace-separated rows.
void write_grid(std::ostream& out, const Tensor& grid);
Tensor read_grid(std::istream& in);
void write_grid(const std::string& path, const Tensor& grid);
Tensor read_grid(const std::string& path);

/// Writes `central.txt` and `mini<i>.txt` under `dir` (prefixed by `prefix`);
/// returns the paths written.
std::vector<std::string> dump_hidden_dynamics(const ForwardTrace& trace, std::size_t sample,
                                              const std::string& dir,
                                              const std::string& prefix = "");

} // namespace clb

#pragma once

#include "clb/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace clb {

enum class Split : std::uint8_t { train, validation, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

/// One input part, dense or sparse.
struct FeatureVector {
    std::size_t dim = 0;
    bool sparse = false;
    /// Sparse entries only; 0-based, strictly increasing.
    std::vector<std::uint32_t> indices;
    /// Dense: dim values. Sparse: one value per index.
    std::vector<double> values;

    static FeatureVector dense(std::vector<double> values);
    static FeatureVector sparse_from(std::size_t dim, std::vector<std::uint32_t> indices,
                                     std::vector<double> values);

    double at(std::size_t i) const;
    /// Writes the dense form into column `col` of `out`.
    void scatter_into(Tensor& out, std::size_t col) const;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct Sample {
    /// Input parts; for bags, the instances.
    std::vector<FeatureVector> parts;
    /// Class index per output.
    std::vector<int> targets;
    Split split = Split::train;

    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class DatasetKind : std::uint8_t { multilabel, multiview, bags };

std::string to_string(DatasetKind k);

struct Dataset {
    DatasetKind kind = DatasetKind::multilabel;
    std::vector<std::string> part_names;
    /// One entry per part; bags hold the single instance dimension.
    std::vector<std::size_t> part_dims;
    /// Per output: 2 for binary, k for k-class.
    std::vector<std::size_t> arities;
    std::vector<Sample> samples;

    std::size_t n_outputs() const noexcept { return arities.size(); }
    std::size_t n_parts() const noexcept { return part_dims.size(); }
    /// Fraction of (sample, output) slots whose target is non-zero.
    double density() const;
    std::vector<std::size_t> indices(Split split) const;
    std::size_t count(Split split) const;
    /// Throws SchemaError on inconsistent dimensions or targets.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Stacks part `part` of each sample as columns of a dim x B matrix.
Tensor batch_part(std::span<const Sample* const> batch, std::size_t part, std::size_t dim);
/// Concatenates every part of each sample into one column.
Tensor batch_concat(std::span<const Sample* const> batch, std::size_t total_dim);

} // namespace clb

#include "clb/dataset.hpp"

#include "clb/errors.hpp"

#include <algorithm>
#include <string>

namespace clb {

std::string to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    throw UsageError("unknown split '" + s + "'");
}

std::string to_string(DatasetKind k) {
    switch (k) {
    case DatasetKind::multilabel: return "multilabel";
    case DatasetKind::multiview: return "multiview";
    case DatasetKind::bags: return "bags";
    }
    return "?";
}

FeatureVector FeatureVector::dense(std::vector<double> values) {
    FeatureVector f;
    f.dim = values.size();
    f.values = std::move(values);
    return f;
}

FeatureVector FeatureVector::sparse_from(std::size_t dim, std::vector<std::uint32_t> indices,
                                         std::vector<double> values) {
    if (indices.size() != values.size()) {
        throw SchemaError("sparse vector has " + std::to_string(indices.size()) + " indices and " +
                          std::to_string(values.size()) + " values");
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= dim) {
            throw SchemaError("sparse index " + std::to_string(indices[k]) + " outside dimension " +
                              std::to_string(dim));
        }
        if (k > 0 && indices[k] <= indices[k - 1]) {
            throw SchemaError("sparse indices must be strictly increasing");
        }
    }
    FeatureVector f;
    f.dim = dim;
    f.sparse = true;
    f.indices = std::move(indices);
    f.values = std::move(values);
    return f;
}

double FeatureVector::at(std::size_t i) const {
    if (i >= dim) throw DimensionError("feature " + std::to_string(i) + " outside " + std::to_string(dim));
    if (!sparse) return values[i];
    auto it = std::lower_bound(indices.begin(), indices.end(), static_cast<std::uint32_t>(i));
    if (it == indices.end() || *it != i) return 0.0;
    return values[static_cast<std::size_t>(it - indices.begin())];
}

void FeatureVector::scatter_into(Tensor& out, std::size_t col) const {
    if (out.rows() != dim || col >= out.cols()) {
        throw DimensionError("cannot scatter a " + std::to_string(dim) + "-vector into column " +
                             std::to_string(col) + " of " + out.shape_string());
    }
    if (sparse) {
        for (std::size_t k = 0; k < indices.size(); ++k) out(indices[k], col) = values[k];
    } else {
        for (std::size_t i = 0; i < dim; ++i) out(i, col) = values[i];
    }
}

double Dataset::density() const {
    if (samples.empty() || arities.empty()) return 0.0;
    std::size_t positive = 0;
    for (const Sample& s : samples) {
        for (int y : s.targets) positive += y != 0 ? 1 : 0;
    }
    return static_cast<double>(positive) /
           (static_cast<double>(samples.size()) * static_cast<double>(arities.size()));
}

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split == split) out.push_back(i);
    }
    return out;
}

std::size_t Dataset::count(Split split) const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                  [split](const Sample& s) { return s.split == split; }));
}

void Dataset::validate() const {
    if (part_dims.empty()) throw SchemaError("dataset has no input parts");
    if (arities.empty()) throw SchemaError("dataset has no outputs");
    if (part_names.size() != part_dims.size()) throw SchemaError("part names and dims disagree");
    if (kind == DatasetKind::bags && part_dims.size() != 1) {
        throw SchemaError("bag datasets hold a single instance dimension");
    }
    for (auto k : arities) {
        if (k < 2) throw SchemaError("output arity must be >= 2");
    }
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const Sample& s = samples[n];
        const std::string where = "sample " + std::to_string(n) + ": ";
        if (kind == DatasetKind::bags) {
            if (s.parts.empty()) throw SchemaError(where + "empty bag");
        } else if (s.parts.size() != part_dims.size()) {
            throw SchemaError(where + "has " + std::to_string(s.parts.size()) + " parts, expected " +
                              std::to_string(part_dims.size()));
        }
        for (std::size_t p = 0; p < s.parts.size(); ++p) {
            const std::size_t want = kind == DatasetKind::bags ? part_dims[0] : part_dims[p];
            if (s.parts[p].dim != want) {
                throw SchemaError(where + "part " + std::to_string(p) + " has dimension " +
                                  std::to_string(s.parts[p].dim) + ", expected " + std::to_string(want));
            }
            if (!s.parts[p].sparse && s.parts[p].values.size() != want) {
                throw SchemaError(where + "dense part " + std::to_string(p) + " has wrong length");
            }
        }
        if (s.targets.size() != arities.size()) {
            throw SchemaError(where + "has " + std::to_string(s.targets.size()) + " targets, expected " +
                              std::to_string(arities.size()));
        }
        for (std::size_t o = 0; o < arities.size(); ++o) {
            if (s.targets[o] < 0 || static_cast<std::size_t>(s.targets[o]) >= arities[o]) {
                throw SchemaError(where + "target " + std::to_string(s.targets[o]) + " outside arity " +
                                  std::to_string(arities[o]));
            }
        }
    }
}

Tensor batch_part(std::span<const Sample* const> batch, std::size_t part, std::size_t dim) {
    Tensor out(dim, batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (part >= batch[b]->parts.size()) {
            throw DimensionError("sample has no part " + std::to_string(part));
        }
        const FeatureVector& f = batch[b]->parts[part];
        if (f.dim != dim) {
            throw DimensionError("part " + std::to_string(part) + " has dimension " +
                                 std::to_string(f.dim) + ", model reads " + std::to_string(dim));
        }
        f.scatter_into(out, b);
    }
    return out;
}

Tensor batch_concat(std::span<const Sample* const> batch, std::size_t total_dim) {
    Tensor out(total_dim, batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::size_t offset = 0;
        for (const FeatureVector& f : batch[b]->parts) {
            if (offset + f.dim > total_dim) {
                throw DimensionError("concatenated parts exceed " + std::to_string(total_dim));
            }
            for (std::size_t i = 0; i < f.dim; ++i) out(offset + i, b) = f.at(i);
            offset += f.dim;
        }
        if (offset != total_dim) {
            throw DimensionError("concatenated parts have dimension " + std::to_string(offset) +
                                 ", model reads " + std::to_string(total_dim));
        }
    }
    return out;
}

} // namespace clb

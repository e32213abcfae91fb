#include "clb/data.hpp"

#include "clb/errors.hpp"
#include "clb/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>

namespace clb {

using nlohmann::json;

void assign_splits(Dataset& data, std::uint64_t seed, double train_fraction,
                   double validation_fraction) {
    if (train_fraction < 0 || validation_fraction < 0 || train_fraction + validation_fraction > 1) {
        throw UsageError("split fractions must be non-negative and sum to at most 1");
    }
    const std::size_t n = data.samples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
    const auto n_val = static_cast<std::size_t>(static_cast<double>(n) * validation_fraction);
    for (std::size_t k = 0; k < n; ++k) {
        Split s = k < n_train ? Split::train : k < n_train + n_val ? Split::validation : Split::test;
        data.samples[order[k]].split = s;
    }
}

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path + "'");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path + "'");
    return out;
}

/// Tracks the all-or-none split tag rule while reading.
class SplitTags {
public:
    void record(bool tagged, std::size_t line) {
        auto& first = tagged ? first_tagged_ : first_untagged_;
        if (!first) first = line;
        if (first_tagged_ && first_untagged_) {
            throw ParseError("split tags must be given for every sample or for none",
                             std::max(*first_tagged_, *first_untagged_));
        }
    }
    void finish(Dataset& data, std::uint64_t seed) const {
        if (!first_tagged_) assign_splits(data, seed);
    }

private:
    std::optional<std::size_t> first_tagged_, first_untagged_;
};

Split split_at(std::string_view tag, std::size_t line) {
    try {
        return parse_split(std::string(tag));
    } catch (const UsageError& e) {
        throw ParseError(e.what(), line);
    }
}

void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

// Multi-label text ---------------------------------------------------------

constexpr std::string_view kMultilabelHeader = "# clb-multilabel";

struct Header {
    std::optional<std::size_t> n_features, n_labels;
    std::optional<double> density;
};

Header parse_header(std::string_view line, std::size_t lineno) {
    Header h;
    auto tokens = textio::split_ws(line.substr(kMultilabelHeader.size()));
    for (auto tok : tokens) {
        auto eq = tok.find('=');
        if (eq == std::string_view::npos) throw ParseError("malformed header field", lineno);
        auto key = tok.substr(0, eq);
        if (key == "density") {
            h.density = textio::parse_double(tok.substr(eq + 1));
            if (!h.density) throw ParseError("malformed header value", lineno);
            continue;
        }
        auto value = textio::parse_size(tok.substr(eq + 1));
        if (!value) throw ParseError("malformed header value", lineno);
        if (key == "n_features") {
            h.n_features = *value;
        } else if (key == "n_labels") {
            h.n_labels = *value;
        } else {
            throw ParseError("unknown header field '" + std::string(key) + "'", lineno);
        }
    }
    return h;
}

/// Metadata may record the label density; it must match the samples.
void check_density(const Dataset& data, std::optional<double> recorded) {
    if (recorded && std::abs(*recorded - data.density()) > 1e-12) {
        throw SchemaError("recorded density " + textio::format_double(*recorded) +
                          " does not match the samples (" + textio::format_double(data.density()) + ")");
    }
}

struct RawLine {
    std::vector<std::size_t> labels;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
    Split split = Split::train;
    std::size_t line = 0;
};

} // namespace

Dataset load_multilabel(std::istream& in, std::uint64_t split_seed) {
    Header header;
    std::vector<RawLine> rows;
    SplitTags tags;
    std::string text;
    std::size_t lineno = 0;
    bool any_content = false;
    while (std::getline(in, text)) {
        ++lineno;
        strip_cr(text);
        std::string_view line = textio::trim(text);
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (!any_content && line.starts_with(kMultilabelHeader)) header = parse_header(line, lineno);
            any_content = true;
            continue;
        }
        any_content = true;

        RawLine row;
        row.line = lineno;
        const auto hash = line.find('#');
        const bool tagged = hash != std::string_view::npos;
        if (tagged) {
            row.split = split_at(textio::trim(line.substr(hash + 1)), lineno);
            line = line.substr(0, hash);
        }
        tags.record(tagged, lineno);

        auto tokens = textio::split_ws(line);
        std::size_t first_feature = 0;
        if (!tokens.empty() && tokens[0].find(':') == std::string_view::npos) {
            first_feature = 1;
            if (tokens[0] != "-") {
                for (auto piece : textio::split(tokens[0], ',')) {
                    auto label = textio::parse_size(piece);
                    if (!label) throw ParseError("malformed label '" + std::string(piece) + "'", lineno);
                    if (std::find(row.labels.begin(), row.labels.end(), *label) != row.labels.end()) {
                        throw ParseError("duplicate label " + std::to_string(*label), lineno);
                    }
                    row.labels.push_back(*label);
                }
            }
        }
        for (std::size_t k = first_feature; k < tokens.size(); ++k) {
            auto colon = tokens[k].find(':');
            if (colon == std::string_view::npos) {
                throw ParseError("expected idx:value, got '" + std::string(tokens[k]) + "'", lineno);
            }
            auto idx = textio::parse_size(tokens[k].substr(0, colon));
            auto val = textio::parse_double(tokens[k].substr(colon + 1));
            if (!idx || !val || *idx == 0) {
                throw ParseError("malformed feature '" + std::string(tokens[k]) + "'", lineno);
            }
            if (*idx > UINT32_MAX) throw ParseError("feature index too large", lineno);
            const auto zero_based = static_cast<std::uint32_t>(*idx - 1);
            if (!row.indices.empty() && zero_based <= row.indices.back()) {
                throw ParseError("feature indices must be strictly increasing", lineno);
            }
            row.indices.push_back(zero_based);
            row.values.push_back(*val);
        }
        rows.push_back(std::move(row));
    }
    if (in.bad()) throw UsageError("read error");

    std::size_t max_feature = 0, max_label = 0;
    for (const RawLine& r : rows) {
        if (!r.indices.empty()) max_feature = std::max<std::size_t>(max_feature, r.indices.back() + 1);
        for (auto l : r.labels) max_label = std::max(max_label, l + 1);
    }
    const std::size_t n_features = header.n_features.value_or(max_feature);
    const std::size_t n_labels = header.n_labels.value_or(max_label);
    if (n_features == 0) throw SchemaError("multi-label data has no features");
    if (n_labels == 0) throw SchemaError("multi-label data has no labels");

    Dataset data;
    data.kind = DatasetKind::multilabel;
    data.part_names = {"x"};
    data.part_dims = {n_features};
    data.arities.assign(n_labels, 2);
    data.samples.reserve(rows.size());
    for (RawLine& r : rows) {
        Sample s;
        if (!r.indices.empty() && r.indices.back() >= n_features) {
            throw SchemaError("line " + std::to_string(r.line) + ": feature index " +
                              std::to_string(r.indices.back() + 1) + " exceeds n_features=" +
                              std::to_string(n_features));
        }
        s.targets.assign(n_labels, 0);
        for (auto l : r.labels) {
            if (l >= n_labels) {
                throw SchemaError("line " + std::to_string(r.line) + ": label " + std::to_string(l) +
                                  " exceeds n_labels=" + std::to_string(n_labels));
            }
            s.targets[l] = 1;
        }
        s.parts.push_back(FeatureVector::sparse_from(n_features, std::move(r.indices), std::move(r.values)));
        s.split = r.split;
        data.samples.push_back(std::move(s));
    }
    tags.finish(data, split_seed);
    data.validate();
    check_density(data, header.density);
    return data;
}

void save_multilabel(std::ostream& out, const Dataset& data) {
    if (data.kind != DatasetKind::multilabel) throw UsageError("not a multi-label dataset");
    for (auto k : data.arities) {
        if (k != 2) throw UsageError("multi-label format holds binary outputs only");
    }
    out << kMultilabelHeader << " n_features=" << data.part_dims.at(0)
        << " n_labels=" << data.n_outputs() << " density=" << textio::format_double(data.density())
        << '\n';
    for (const Sample& s : data.samples) {
        std::string labels;
        for (std::size_t o = 0; o < s.targets.size(); ++o) {
            if (s.targets[o] == 0) continue;
            if (!labels.empty()) labels += ',';
            labels += std::to_string(o);
        }
        out << (labels.empty() ? "-" : labels);
        const FeatureVector& f = s.parts.at(0);
        if (f.sparse) {
            for (std::size_t k = 0; k < f.indices.size(); ++k) {
                out << ' ' << f.indices[k] + 1 << ':' << textio::format_double(f.values[k]);
            }
        } else {
            for (std::size_t i = 0; i < f.dim; ++i) {
                if (f.values[i] != 0.0) out << ' ' << i + 1 << ':' << textio::format_double(f.values[i]);
            }
        }
        out << " # " << to_string(s.split) << '\n';
    }
}

// JSON lines ---------------------------------------------------------------

namespace {

constexpr const char* kMultiviewFormat = "clb-multiview";
constexpr const char* kBagsFormat = "clb-bags";

json part_to_json(const FeatureVector& f) {
    if (!f.sparse) return json(f.values);
    return json{{"indices", f.indices}, {"values", f.values}};
}

FeatureVector part_from_json(const json& j, std::size_t dim, std::size_t lineno) {
    if (j.is_array()) {
        auto values = j.get<std::vector<double>>();
        if (values.size() != dim) {
            throw SchemaError("line " + std::to_string(lineno) + ": dense part has " +
                              std::to_string(values.size()) + " values, expected " + std::to_string(dim));
        }
        return FeatureVector::dense(std::move(values));
    }
    if (!j.is_object()) throw ParseError("part must be an array or an indices/values object", lineno);
    try {
        return FeatureVector::sparse_from(dim, j.at("indices").get<std::vector<std::uint32_t>>(),
                                          j.at("values").get<std::vector<double>>());
    } catch (const SchemaError& e) {
        throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
    }
}

std::vector<int> targets_from_json(const json& j, const std::vector<std::size_t>& arities,
                                   std::size_t lineno) {
    auto targets = j.get<std::vector<int>>();
    if (targets.size() != arities.size()) {
        throw SchemaError("line " + std::to_string(lineno) + ": " + std::to_string(targets.size()) +
                          " targets, expected " + std::to_string(arities.size()));
    }
    for (std::size_t o = 0; o < targets.size(); ++o) {
        if (targets[o] < 0 || static_cast<std::size_t>(targets[o]) >= arities[o]) {
            throw SchemaError("line " + std::to_string(lineno) + ": target " +
                              std::to_string(targets[o]) + " outside arity " + std::to_string(arities[o]));
        }
    }
    return targets;
}

/// Calls `meta` on the first record and `record` on each later one,
/// translating JSON errors into ParseError with the line number.
template <class Meta, class Record>
void read_json_lines(std::istream& in, Meta&& meta, Record&& record) {
    std::string text;
    std::size_t lineno = 0;
    bool have_meta = false;
    while (std::getline(in, text)) {
        ++lineno;
        strip_cr(text);
        if (textio::trim(text).empty()) continue;
        try {
            json j = json::parse(text);
            if (!j.is_object()) throw ParseError("record must be a JSON object", lineno);
            if (!have_meta) {
                meta(j, lineno);
                have_meta = true;
            } else {
                record(j, lineno);
            }
        } catch (const json::exception& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    if (in.bad()) throw UsageError("read error");
    if (!have_meta) throw ParseError("missing metadata record", lineno == 0 ? 1 : lineno);
}

std::vector<std::size_t> arities_from_json(const json& meta, std::size_t lineno) {
    auto arities = meta.at("arities").get<std::vector<std::size_t>>();
    if (arities.empty()) throw SchemaError("line " + std::to_string(lineno) + ": no outputs");
    for (auto k : arities) {
        if (k < 2) throw SchemaError("line " + std::to_string(lineno) + ": output arity must be >= 2");
    }
    return arities;
}

void expect_format(const json& meta, const char* format, std::size_t lineno) {
    if (!meta.contains("format") || meta.at("format") != format) {
        throw ParseError(std::string("expected a metadata record with format ") + format, lineno);
    }
}

void read_split(const json& j, Sample& s, SplitTags& tags, std::size_t lineno) {
    const bool tagged = j.contains("split");
    if (tagged) s.split = split_at(j.at("split").get<std::string>(), lineno);
    tags.record(tagged, lineno);
}

} // namespace

Dataset load_multiview(std::istream& in, std::uint64_t split_seed) {
    Dataset data;
    std::optional<double> density;
    data.kind = DatasetKind::multiview;
    SplitTags tags;
    read_json_lines(
        in,
        [&](const json& meta, std::size_t lineno) {
            expect_format(meta, kMultiviewFormat, lineno);
            for (const json& p : meta.at("parts")) {
                auto name = p.at("name").get<std::string>();
                auto dim = p.at("dim").get<std::size_t>();
                if (dim == 0) throw SchemaError("line " + std::to_string(lineno) + ": part dimension 0");
                if (std::find(data.part_names.begin(), data.part_names.end(), name) != data.part_names.end()) {
                    throw SchemaError("line " + std::to_string(lineno) + ": duplicate part '" + name + "'");
                }
                data.part_names.push_back(std::move(name));
                data.part_dims.push_back(dim);
            }
            if (data.part_dims.empty()) throw SchemaError("line " + std::to_string(lineno) + ": no parts");
            data.arities = arities_from_json(meta, lineno);
            if (meta.contains("density")) density = meta.at("density").get<double>();
        },
        [&](const json& j, std::size_t lineno) {
            const json& parts = j.at("parts");
            if (!parts.is_object()) throw ParseError("\"parts\" must be an object", lineno);
            if (parts.size() != data.part_names.size()) {
                throw SchemaError("line " + std::to_string(lineno) + ": " + std::to_string(parts.size()) +
                                  " parts, expected " + std::to_string(data.part_names.size()));
            }
            Sample s;
            for (std::size_t p = 0; p < data.part_names.size(); ++p) {
                if (!parts.contains(data.part_names[p])) {
                    throw SchemaError("line " + std::to_string(lineno) + ": missing part '" +
                                      data.part_names[p] + "'");
                }
                s.parts.push_back(part_from_json(parts.at(data.part_names[p]), data.part_dims[p], lineno));
            }
            s.targets = targets_from_json(j.at("targets"), data.arities, lineno);
            read_split(j, s, tags, lineno);
            data.samples.push_back(std::move(s));
        });
    tags.finish(data, split_seed);
    data.validate();
    check_density(data, density);
    return data;
}

Dataset load_bags(std::istream& in, std::uint64_t split_seed) {
    Dataset data;
    std::optional<double> density;
    data.kind = DatasetKind::bags;
    SplitTags tags;
    read_json_lines(
        in,
        [&](const json& meta, std::size_t lineno) {
            expect_format(meta, kBagsFormat, lineno);
            auto dim = meta.at("dim").get<std::size_t>();
            if (dim == 0) throw SchemaError("line " + std::to_string(lineno) + ": instance dimension 0");
            data.part_names = {"instance"};
            data.part_dims = {dim};
            data.arities = arities_from_json(meta, lineno);
            if (meta.contains("density")) density = meta.at("density").get<double>();
        },
        [&](const json& j, std::size_t lineno) {
            const json& instances = j.at("instances");
            if (!instances.is_array()) throw ParseError("\"instances\" must be an array", lineno);
            if (instances.empty()) throw ParseError("empty bag", lineno);
            Sample s;
            for (const json& inst : instances) s.parts.push_back(part_from_json(inst, data.part_dims[0], lineno));
            s.targets = targets_from_json(j.at("targets"), data.arities, lineno);
            read_split(j, s, tags, lineno);
            data.samples.push_back(std::move(s));
        });
    tags.finish(data, split_seed);
    data.validate();
    check_density(data, density);
    return data;
}

void save_multiview(std::ostream& out, const Dataset& data) {
    if (data.kind != DatasetKind::multiview) throw UsageError("not a multi-view dataset");
    json parts = json::array();
    for (std::size_t p = 0; p < data.n_parts(); ++p) {
        parts.push_back({{"name", data.part_names[p]}, {"dim", data.part_dims[p]}});
    }
    out << json{{"format", kMultiviewFormat}, {"parts", parts}, {"arities", data.arities},
                {"density", data.density()}}.dump()
        << '\n';
    for (const Sample& s : data.samples) {
        json record_parts = json::object();
        for (std::size_t p = 0; p < s.parts.size(); ++p) record_parts[data.part_names[p]] = part_to_json(s.parts[p]);
        out << json{{"parts", record_parts}, {"targets", s.targets}, {"split", to_string(s.split)}}.dump()
            << '\n';
    }
}

void save_bags(std::ostream& out, const Dataset& data) {
    if (data.kind != DatasetKind::bags) throw UsageError("not a bag dataset");
    out << json{{"format", kBagsFormat}, {"dim", data.part_dims.at(0)}, {"arities", data.arities},
                {"density", data.density()}}.dump()
        << '\n';
    for (const Sample& s : data.samples) {
        json instances = json::array();
        for (const FeatureVector& f : s.parts) instances.push_back(part_to_json(f));
        out << json{{"instances", instances}, {"targets", s.targets}, {"split", to_string(s.split)}}.dump()
            << '\n';
    }
}

Dataset load_multilabel(const std::string& path, std::uint64_t split_seed) {
    auto in = open_in(path);
    return load_multilabel(in, split_seed);
}

Dataset load_multiview(const std::string& path, std::uint64_t split_seed) {
    auto in = open_in(path);
    return load_multiview(in, split_seed);
}

Dataset load_bags(const std::string& path, std::uint64_t split_seed) {
    auto in = open_in(path);
    return load_bags(in, split_seed);
}

Dataset load_dataset(const std::string& path, std::uint64_t split_seed) {
    std::string first;
    {
        auto in = open_in(path);
        std::string text;
        while (std::getline(in, text)) {
            if (!textio::trim(text).empty()) {
                first = std::string(textio::trim(text));
                break;
            }
        }
    }
    if (first.empty() || first.front() != '{') return load_multilabel(path, split_seed);
    json meta = json::parse(first, nullptr, false);
    if (meta.is_object() && meta.contains("format") && meta["format"] == kBagsFormat) {
        return load_bags(path, split_seed);
    }
    return load_multiview(path, split_seed);
}

void save_dataset(std::ostream& out, const Dataset& data) {
    switch (data.kind) {
    case DatasetKind::multilabel: save_multilabel(out, data); break;
    case DatasetKind::multiview: save_multiview(out, data); break;
    case DatasetKind::bags: save_bags(out, data); break;
    }
}

void save_dataset(const std::string& path, const Dataset& data) {
    auto out = open_out(path);
    save_dataset(out, data);
    if (!out) throw UsageError("write to '" + path + "' failed");
}

} // namespace clb

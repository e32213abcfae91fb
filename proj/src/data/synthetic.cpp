#include "clb/data.hpp"

#include "clb/errors.hpp"

#include <random>

namespace clb {

std::string to_string(Generator g) {
    switch (g) {
    case Generator::correlated: return "correlated";
    case Generator::xor_views: return "xor_views";
    case Generator::bags: return "bags";
    }
    return "?";
}

Generator parse_generator(const std::string& s) {
    if (s == "correlated") return Generator::correlated;
    if (s == "xor_views") return Generator::xor_views;
    if (s == "bags") return Generator::bags;
    throw ConfigError("unknown generator '" + s + "' (expected correlated, xor_views or bags)");
}

namespace {

std::vector<double> normal_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
}

double dot(const std::vector<double>& w, const std::vector<double>& x, std::size_t offset) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[offset + i];
    return s;
}

Dataset gen_correlated(const SyntheticSpec& spec, std::mt19937_64& rng) {
    const std::size_t f = spec.n_features;
    if (f < 5) throw ConfigError("correlated generator needs n_features >= 5");
    const std::size_t flip = f - 1;
    const std::size_t group_a = (f - 1) / 2;
    const std::size_t group_b = f - 1 - group_a;
    const auto w1 = normal_vector(group_a, rng);
    const auto w3 = normal_vector(group_b, rng);

    Dataset data;
    data.kind = DatasetKind::multilabel;
    data.part_names = {"x"};
    data.part_dims = {f};
    data.arities = {2, 2, 2};
    std::vector<std::uint32_t> all(f);
    for (std::size_t i = 0; i < f; ++i) all[i] = static_cast<std::uint32_t>(i);
    for (std::size_t n = 0; n < spec.n_samples; ++n) {
        auto x = normal_vector(f, rng);
        const int l1 = dot(w1, x, 0) > 0.0 ? 1 : 0;
        const int flipped = x[flip] > spec.flip_threshold ? 1 : 0;
        const int l2 = l1 ^ flipped;
        const int l3 = dot(w3, x, group_a) > 0.0 ? 1 : 0;
        Sample s;
        s.parts.push_back(FeatureVector::sparse_from(f, all, std::move(x)));
        s.targets = {l1, l2, l3};
        data.samples.push_back(std::move(s));
    }
    return data;
}

Dataset gen_xor_views(const SyntheticSpec& spec, std::mt19937_64& rng) {
    if (spec.n_views < 2 || spec.view_dim < 1) {
        throw ConfigError("xor_views generator needs n_views >= 2 and view_dim >= 1");
    }
    Dataset data;
    data.kind = DatasetKind::multiview;
    for (std::size_t v = 0; v < spec.n_views; ++v) {
        data.part_names.push_back("view" + std::to_string(v));
        data.part_dims.push_back(spec.view_dim);
    }
    data.arities = {2};
    for (std::size_t n = 0; n < spec.n_samples; ++n) {
        Sample s;
        int y = 0;
        for (std::size_t v = 0; v < spec.n_views; ++v) {
            auto x = normal_vector(spec.view_dim, rng);
            y ^= x[0] > 0.0 ? 1 : 0;
            s.parts.push_back(FeatureVector::dense(std::move(x)));
        }
        s.targets = {y};
        data.samples.push_back(std::move(s));
    }
    return data;
}

Dataset gen_bags(const SyntheticSpec& spec, std::mt19937_64& rng) {
    if (spec.max_bag_size < 1 || spec.instance_dim < 1) {
        throw ConfigError("bags generator needs max_bag_size >= 1 and instance_dim >= 1");
    }
    Dataset data;
    data.kind = DatasetKind::bags;
    data.part_names = {"instance"};
    data.part_dims = {spec.instance_dim};
    data.arities = {2};
    std::uniform_int_distribution<std::size_t> size(1, spec.max_bag_size);
    for (std::size_t n = 0; n < spec.n_samples; ++n) {
        Sample s;
        int y = 0;
        const std::size_t m = size(rng);
        for (std::size_t k = 0; k < m; ++k) {
            auto x = normal_vector(spec.instance_dim, rng);
            y |= x[0] > spec.trigger_threshold ? 1 : 0;
            s.parts.push_back(FeatureVector::dense(std::move(x)));
        }
        s.targets = {y};
        data.samples.push_back(std::move(s));
    }
    return data;
}

} // namespace

Dataset gen_synthetic(Generator kind, const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.n_samples == 0) throw ConfigError("n_samples must be >= 1");
    std::mt19937_64 rng(seed);
    Dataset data;
    switch (kind) {
    case Generator::correlated: data = gen_correlated(spec, rng); break;
    case Generator::xor_views: data = gen_xor_views(spec, rng); break;
    case Generator::bags: data = gen_bags(spec, rng); break;
    }
    assign_splits(data, seed, spec.train_fraction, spec.validation_fraction);
    data.validate();
    return data;
}

} // namespace clb

#include "clb/data.hpp"

#include "clb/errors.hpp"
#include "clb/textio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace clb {

Tensor rescale_unit(const Tensor& m) {
    if (m.rows() != m.cols()) throw DimensionError("rescale_unit needs a square matrix");
    if (m.empty()) return m;
    const double lo = *std::min_element(m.data().begin(), m.data().end());
    Tensor out(m.rows(), m.cols(), 1.0);
    if (lo >= 1.0) return out;
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = (m[i] - lo) / (1.0 - lo);
    return out;
}

Tensor embedding_similarity_matrix(const Tensor& embedding, std::vector<std::size_t>* zero_columns) {
    const std::size_t n = embedding.cols();
    if (n == 0) throw UsageError("embedding has no columns");
    std::vector<double> norms(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < embedding.rows(); ++r) s += embedding(r, j) * embedding(r, j);
        norms[j] = std::sqrt(s);
        if (norms[j] == 0.0 && zero_columns) zero_columns->push_back(j);
    }
    Tensor sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sim(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double c = 0.0;
            if (norms[i] > 0.0 && norms[j] > 0.0) {
                for (std::size_t r = 0; r < embedding.rows(); ++r) c += embedding(r, i) * embedding(r, j);
                c = std::clamp(c / (norms[i] * norms[j]), -1.0, 1.0);
            }
            sim(i, j) = sim(j, i) = c;
        }
    }
    return rescale_unit(sim);
}

Tensor label_cooccurrence_matrix(const Dataset& data) {
    const std::size_t m = data.n_outputs();
    const std::size_t n = data.samples.size();
    if (n == 0 || m == 0) throw UsageError("co-occurrence needs a non-empty dataset");
    std::vector<double> mean(m, 0.0);
    for (const Sample& s : data.samples) {
        for (std::size_t o = 0; o < m; ++o) mean[o] += s.targets[o] != 0 ? 1.0 : 0.0;
    }
    for (auto& v : mean) v /= static_cast<double>(n);
    Tensor cov(m, m);
    for (const Sample& s : data.samples) {
        for (std::size_t a = 0; a < m; ++a) {
            const double da = (s.targets[a] != 0 ? 1.0 : 0.0) - mean[a];
            for (std::size_t b = 0; b < m; ++b) cov(a, b) += da * ((s.targets[b] != 0 ? 1.0 : 0.0) - mean[b]);
        }
    }
    Tensor corr(m, m);
    for (std::size_t a = 0; a < m; ++a) {
        corr(a, a) = 1.0;
        for (std::size_t b = 0; b < m; ++b) {
            if (a == b) continue;
            const double denom = std::sqrt(cov(a, a) * cov(b, b));
            corr(a, b) = denom > 0.0 ? std::clamp(cov(a, b) / denom, -1.0, 1.0) : 0.0;
        }
    }
    return rescale_unit(corr);
}

Tensor hidden_grid(const std::vector<Var>& states, std::size_t sample) {
    if (states.empty()) throw UsageError("no states to dump");
    const std::size_t d = states[0].rows();
    Tensor grid(states.size(), d);
    for (std::size_t t = 0; t < states.size(); ++t) {
        const Tensor& v = states[t].value();
        if (sample >= v.cols()) {
            throw UsageError("sample " + std::to_string(sample) + " outside batch of " +
                             std::to_string(v.cols()));
        }
        if (v.rows() != d) throw DimensionError("state widths differ across layers");
        for (std::size_t r = 0; r < d; ++r) grid(t, r) = v(r, sample);
    }
    return grid;
}

void write_grid(std::ostream& out, const Tensor& grid) {
    out << grid.rows() << ' ' << grid.cols() << '\n';
    for (std::size_t t = 0; t < grid.rows(); ++t) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            if (c) out << ' ';
            out << textio::format_double(grid(t, c));
        }
        out << '\n';
    }
}

Tensor read_grid(std::istream& in) {
    std::string text;
    std::size_t lineno = 0;
    if (!std::getline(in, text)) throw ParseError("missing grid header", 1);
    ++lineno;
    auto header = textio::split_ws(text);
    if (header.size() != 2) throw ParseError("grid header must be 'T d'", lineno);
    auto rows = textio::parse_size(header[0]);
    auto cols = textio::parse_size(header[1]);
    if (!rows || !cols) throw ParseError("grid header must be 'T d'", lineno);
    Tensor grid(*rows, *cols);
    for (std::size_t t = 0; t < *rows; ++t) {
        if (!std::getline(in, text)) throw ParseError("grid ends early", lineno + 1);
        ++lineno;
        auto tokens = textio::split_ws(text);
        if (tokens.size() != *cols) {
            throw ParseError("expected " + std::to_string(*cols) + " values, got " +
                             std::to_string(tokens.size()), lineno);
        }
        for (std::size_t c = 0; c < *cols; ++c) {
            auto v = textio::parse_double(tokens[c]);
            if (!v) throw ParseError("malformed value '" + std::string(tokens[c]) + "'", lineno);
            grid(t, c) = *v;
        }
    }
    return grid;
}

void write_grid(const std::string& path, const Tensor& grid) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path + "'");
    write_grid(out, grid);
}

Tensor read_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path + "'");
    return read_grid(in);
}

std::vector<std::string> dump_hidden_dynamics(const ForwardTrace& trace, std::size_t sample,
                                              const std::string& dir, const std::string& prefix) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::vector<Var>& states) {
        const std::string path = (fs::path(dir) / (prefix + name)).string();
        write_grid(path, hidden_grid(states, sample));
        written.push_back(path);
    };
    emit("central.txt", trace.central);
    for (std::size_t i = 0; i < trace.mini.size(); ++i) emit("mini" + std::to_string(i) + ".txt", trace.mini[i]);
    return written;
}

} // namespace clb

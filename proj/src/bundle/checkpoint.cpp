// Checkpoint container, version 1. Line-oriented text:
//
//   clb-checkpoint 1
//   config key=value ...
//   task key=value ...
//   tensors <count>
//   tensor <name> <rows> <cols>
//   <rows*cols values, row-major, space separated>
//   ...
//   end
//
// Values use the shortest decimal form that parses back to the same double,
// so save followed by load reproduces every parameter bit for bit.

#include "clb/bundle.hpp"

#include "clb/errors.hpp"
#include "clb/textio.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace clb {

namespace {

using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse_key_values(std::string_view line, std::string_view tag, std::size_t lineno) {
    auto tokens = textio::split_ws(line);
    if (tokens.empty() || tokens[0] != tag) {
        throw ParseError("expected '" + std::string(tag) + "' record", lineno);
    }
    KeyValues kv;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        auto eq = tokens[i].find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", lineno);
        kv.emplace(std::string(tokens[i].substr(0, eq)), std::string(tokens[i].substr(eq + 1)));
    }
    return kv;
}

const std::string& require(const KeyValues& kv, const std::string& key, std::size_t lineno) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("missing key '" + key + "'", lineno);
    return it->second;
}

std::size_t require_size(const KeyValues& kv, const std::string& key, std::size_t lineno) {
    auto v = textio::parse_size(require(kv, key, lineno));
    if (!v) throw ParseError("key '" + key + "' is not a count", lineno);
    return *v;
}

bool require_flag(const KeyValues& kv, const std::string& key, std::size_t lineno) {
    const auto& v = require(kv, key, lineno);
    if (v == "1") return true;
    if (v == "0") return false;
    throw ParseError("key '" + key + "' must be 0 or 1", lineno);
}

std::vector<std::size_t> require_sizes(const KeyValues& kv, const std::string& key,
                                       std::size_t lineno) {
    auto v = textio::parse_sizes(require(kv, key, lineno));
    if (!v) throw ParseError("key '" + key + "' is not a count list", lineno);
    return *v;
}

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::string next() {
        std::string line;
        if (!std::getline(in_, line)) throw ParseError("unexpected end of checkpoint", lineno_ + 1);
        ++lineno_;
        return line;
    }
    std::size_t lineno() const { return lineno_; }

private:
    std::istream& in_;
    std::size_t lineno_ = 0;
};

} // namespace

void save_checkpoint(std::ostream& out, const BundleParams& params) {
    const auto& c = params.config;
    const auto& t = params.task;
    out << "clb-checkpoint " << kCheckpointVersion << '\n';
    out << "config n_layers=" << c.n_layers << " n_output_layers=" << c.n_output_layers
        << " d_central=" << c.d_central << " d_mini=" << c.d_mini
        << " n_minicolumns=" << c.n_minicolumns << " share_layers=" << c.share_layers
        << " share_minicolumns=" << c.share_minicolumns
        << " share_input_minicolumns=" << c.share_input_minicolumns
        << " embed_dim=" << c.embed_dim << " activation=" << to_string(c.activation) << '\n';
    out << "task kind=" << to_string(t.kind) << " input_dims=" << textio::join_sizes(t.input_dims)
        << " output_arities=" << textio::join_sizes(t.output_arities)
        << " projection_dim=" << t.projection_dim
        << " use_label_embedding=" << t.use_label_embedding
        << " variable_parts=" << t.variable_parts << '\n';
    out << "tensors " << params.store.size() << '\n';
    for (const auto& p : params.store.all()) {
        out << "tensor " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            if (i) out << ' ';
            out << textio::format_double(p.value[i]);
        }
        out << '\n';
    }
    out << "end\n";
}

BundleParams load_checkpoint(std::istream& in) {
    LineReader reader(in);
    {
        const std::string line = reader.next();
        auto header = textio::split_ws(line);
        if (header.size() != 2 || header[0] != "clb-checkpoint") {
            throw ParseError("not a checkpoint file", reader.lineno());
        }
        if (header[1] != std::to_string(kCheckpointVersion)) {
            throw ParseError("unsupported checkpoint version " + std::string(header[1]), reader.lineno());
        }
    }

    BundleConfig config;
    {
        auto kv = parse_key_values(reader.next(), "config", reader.lineno());
        const auto ln = reader.lineno();
        config.n_layers = require_size(kv, "n_layers", ln);
        config.n_output_layers = require_size(kv, "n_output_layers", ln);
        config.d_central = require_size(kv, "d_central", ln);
        config.d_mini = require_size(kv, "d_mini", ln);
        config.n_minicolumns = require_size(kv, "n_minicolumns", ln);
        config.share_layers = require_flag(kv, "share_layers", ln);
        config.share_minicolumns = require_flag(kv, "share_minicolumns", ln);
        config.share_input_minicolumns = require_flag(kv, "share_input_minicolumns", ln);
        config.embed_dim = require_size(kv, "embed_dim", ln);
        config.activation = parse_activation(require(kv, "activation", ln));
    }
    TaskSpec task;
    {
        auto kv = parse_key_values(reader.next(), "task", reader.lineno());
        const auto ln = reader.lineno();
        task.kind = parse_task_kind(require(kv, "kind", ln));
        task.input_dims = require_sizes(kv, "input_dims", ln);
        task.output_arities = require_sizes(kv, "output_arities", ln);
        task.projection_dim = require_size(kv, "projection_dim", ln);
        task.use_label_embedding = require_flag(kv, "use_label_embedding", ln);
        task.variable_parts = require_flag(kv, "variable_parts", ln);
    }

    BundleParams params = init_params(config, task, 0);

    const std::string count_line = reader.next();
    auto count_tokens = textio::split_ws(count_line);
    if (count_tokens.size() != 2 || count_tokens[0] != "tensors") {
        throw ParseError("expected 'tensors <count>'", reader.lineno());
    }
    auto count = textio::parse_size(count_tokens[1]);
    if (!count) throw ParseError("bad tensor count", reader.lineno());
    if (*count != params.store.size()) {
        throw SchemaError("checkpoint holds " + std::to_string(*count) +
                          " tensors, configuration implies " + std::to_string(params.store.size()));
    }

    std::vector<bool> seen(params.store.size(), false);
    for (std::size_t k = 0; k < *count; ++k) {
        const std::string head_line = reader.next();
        auto head = textio::split_ws(head_line);
        const auto ln = reader.lineno();
        if (head.size() != 4 || head[0] != "tensor") throw ParseError("expected tensor header", ln);
        const std::string name(head[1]);
        auto rows = textio::parse_size(head[2]);
        auto cols = textio::parse_size(head[3]);
        if (!rows || !cols) throw ParseError("bad tensor shape", ln);

        std::size_t index = params.store.size();
        for (std::size_t i = 0; i < params.store.size(); ++i) {
            if (params.store.all()[i].name == name) index = i;
        }
        if (index == params.store.size()) throw SchemaError("unexpected tensor '" + name + "'");
        if (seen[index]) throw SchemaError("tensor '" + name + "' appears twice");
        seen[index] = true;
        Tensor& value = params.store.all()[index].value;
        if (value.rows() != *rows || value.cols() != *cols) {
            throw SchemaError("tensor '" + name + "' has shape " + std::to_string(*rows) + "x" +
                              std::to_string(*cols) + ", expected " + value.shape_string());
        }

        const std::string value_line = reader.next();
        auto values = textio::split_ws(value_line);
        if (values.size() != value.size()) {
            throw ParseError("tensor '" + name + "' needs " + std::to_string(value.size()) +
                                 " values",
                             reader.lineno());
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            auto v = textio::parse_double(values[i]);
            if (!v) throw ParseError("bad number '" + std::string(values[i]) + "'", reader.lineno());
            value[i] = *v;
        }
    }
    if (textio::trim(reader.next()) != "end") throw ParseError("expected 'end'", reader.lineno());
    params.store.zero_grad();
    return params;
}

void save_checkpoint(const std::string& path, const BundleParams& params) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write checkpoint '" + path + "'");
    save_checkpoint(out, params);
    if (!out) throw UsageError("failed writing checkpoint '" + path + "'");
}

BundleParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open checkpoint '" + path + "'");
    return load_checkpoint(in);
}

} // namespace clb

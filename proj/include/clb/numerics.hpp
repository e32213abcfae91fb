#pragma once

// Dense float64 tensors and a tape-based reverse-mode differentiator.
//
// Every value is a row-major matrix. Column vectors are d x 1; a batch of
// column vectors is d x B with one sample per column.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace clb {

class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }
    static Tensor identity(std::size_t n);
    /// Column vector from values.
    static Tensor column(std::initializer_list<double> values);
    static Tensor column(std::span<const double> values);
    /// Matrix from nested row lists; all rows must have equal length.
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const Tensor& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_string() const;

    Tensor column_at(std::size_t c) const;
    void fill(double v);
    bool all_finite() const noexcept;
    double norm() const noexcept;

    Tensor& operator+=(const Tensor& other);

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// c = a * b (plain product, no tape).
Tensor matmul(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// A trainable tensor living outside any tape. Gradients from every tape
/// that binds it accumulate into `grad` until zero_grad() is called.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    void zero_grad() { grad = Tensor(value.rows(), value.cols()); }
};

/// Handle into ParamStore.
struct ParamId {
    std::uint32_t index = UINT32_MAX;
    bool valid() const noexcept { return index != UINT32_MAX; }
    friend bool operator==(ParamId, ParamId) = default;
};

/// Owning, ordered collection of parameters. Copies are deep.
class ParamStore {
public:
    ParamId add(std::string name, Tensor value);

    Parameter& operator[](ParamId id) { return params_.at(id.index); }
    const Parameter& operator[](ParamId id) const { return params_.at(id.index); }

    std::size_t size() const noexcept { return params_.size(); }
    std::vector<Parameter>& all() noexcept { return params_; }
    const std::vector<Parameter>& all() const noexcept { return params_; }

    /// Total number of scalar parameters.
    std::size_t scalar_count() const noexcept;
    void zero_grad();
    /// Copies values only; names and shapes must match.
    void assign_values(const ParamStore& other);
    const Parameter* find(const std::string& name) const;

private:
    std::vector<Parameter> params_;
};

class Tape;

/// Reference to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    /// Gradient after Tape::backward; zeros if the node received none.
    const Tensor& grad() const;
    Tape* tape() const noexcept { return tape_; }
    std::uint32_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

enum class Op : std::uint8_t {
    leaf,
    matmul,
    add,
    sub,
    add_bias,
    scale,
    hadamard,
    sigmoid,
    relu,
    tanh,
    mean,
    column,
    sum,
    log_clamped,
    softmax,
    highway,
};

/// Records operations in creation order; parents always precede children.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives a gradient.
    Var constant(Tensor value);
    /// Local leaf; its gradient is readable through Var::grad after backward.
    Var variable(Tensor value);
    /// Binds an external parameter. Repeated binds return the same node, so
    /// tied weights used at several layers share one leaf.
    Var param(Parameter& p);

    /// Reverse pass from a 1x1 loss. When `accumulate_params` is set, the
    /// gradient of each bound parameter is added into Parameter::grad.
    /// A second call requires reset_grads() first.
    void backward(Var loss, bool accumulate_params = true);
    /// Clears node gradients so backward may run again.
    void reset_grads();

    std::size_t node_count() const noexcept { return nodes_.size(); }
    Op op(Var v) const;
    std::vector<Var> parents(Var v) const;

    /// Number of entries clamped by log_clamped since the tape was created.
    std::size_t clamp_events() const noexcept { return clamp_events_; }

private:
    friend class Var;
    friend struct TapeAccess;

    struct Node {
        Tensor value;
        Tensor grad;
        Op op = Op::leaf;
        bool requires_grad = false;
        std::vector<std::uint32_t> parents;
        Parameter* param = nullptr;
        double scalar = 0.0;
        std::size_t index = 0;
    };

    Var push(Node node);
    void backward_node(Node& node);

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::uint32_t> bound_;
    std::size_t clamp_events_ = 0;
    bool backward_done_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a (rows x B) plus column vector b (rows x 1) broadcast over columns.
Var add_bias(Var a, Var b);
Var scale(Var a, double c);
Var hadamard(Var a, Var b);
Var sigmoid(Var a);
Var relu(Var a);
Var tanh(Var a);
/// Elementwise mean; summation runs in list order.
Var mean_of(std::span<const Var> nodes);
/// Column i of a matrix as a rows x 1 vector.
Var column_of(Var e, std::size_t i);
/// Sum of all entries as a 1x1 node.
Var sum(Var a);
/// log(max(a, floor)); entries at or below the floor get zero gradient.
Var log_clamped(Var a, double floor);
/// Column-wise softmax.
Var softmax(Var a);
/// gate * candidate + (1 - gate) * prev.
Var highway(Var candidate, Var gate, Var prev);

/// Scalar sigmoid clamped to the open interval (0, 1).
double sigmoid_scalar(double x) noexcept;

/// Compares tape gradients of `build` (which must return a 1x1 loss) with
/// central differences over every scalar of `params`. Returns the largest
/// |analytic - numeric| / max(1, |analytic|). Parameter grads are left
/// holding the analytic gradient.
double grad_check(const std::function<Var(Tape&)>& build,
                  std::span<Parameter* const> params, double step = 1e-6);

} // namespace clb

#include "clb/numerics.hpp"

#include "clb/errors.hpp"

#include <algorithm>
#include <cmath>

namespace clb {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string());
    }
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::column(std::initializer_list<double> values) {
    return Tensor(values.size(), 1, std::vector<double>(values));
}

Tensor Tensor::column(std::span<const double> values) {
    return Tensor(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(r, c, std::move(data));
}

std::string Tensor::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Tensor Tensor::column_at(std::size_t c) const {
    if (c >= cols_) throw UsageError("column index out of range");
    Tensor out(rows_, 1);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::norm() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) {
        throw DimensionError("cannot add " + other.shape_string() + " to " + shape_string());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + a.shape_string() + " * " +
                             b.shape_string());
    }
    Tensor c(a.rows(), b.cols());
    const std::size_t n = a.cols();
    const std::size_t m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.data().data() + i * m;
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data().data() + k * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("max_abs_diff shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

ParamId ParamStore::add(std::string name, Tensor value) {
    Parameter p{std::move(name), std::move(value), {}};
    p.zero_grad();
    params_.push_back(std::move(p));
    return ParamId{static_cast<std::uint32_t>(params_.size() - 1)};
}

std::size_t ParamStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::assign_values(const ParamStore& other) {
    if (other.params_.size() != params_.size()) {
        throw DimensionError("parameter stores differ in size");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name ||
            !params_[i].value.same_shape(other.params_[i].value)) {
            throw DimensionError("parameter '" + params_[i].name + "' does not match '" +
                                 other.params_[i].name + "'");
        }
        params_[i].value = other.params_[i].value;
    }
}

const Parameter* ParamStore::find(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

} // namespace clb

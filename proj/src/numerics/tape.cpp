#include "clb/numerics.hpp"

#include "clb/errors.hpp"

#include <cfloat>
#include <cmath>

namespace clb {

namespace {

constexpr double kSigmoidHi = 1.0 - DBL_EPSILON / 2.0;

} // namespace

double sigmoid_scalar(double x) noexcept {
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double z = std::exp(x);
        s = z / (1.0 + z);
    }
    if (s < DBL_MIN) return DBL_MIN;
    if (s > kSigmoidHi) return kSigmoidHi;
    return s;
}

const Tensor& Var::value() const {
    if (tape_ == nullptr) throw UsageError("value() on an unbound Var");
    return tape_->nodes_[id_].value;
}

const Tensor& Var::grad() const {
    if (tape_ == nullptr) throw UsageError("grad() on an unbound Var");
    auto& node = tape_->nodes_[id_];
    if (node.grad.empty() && !node.value.empty()) {
        node.grad = Tensor(node.value.rows(), node.value.cols());
    }
    return node.grad;
}

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::variable(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::param(Parameter& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
    Node n;
    n.value = p.value;
    n.requires_grad = true;
    n.param = &p;
    Var v = push(std::move(n));
    bound_.emplace(&p, v.id());
    return v;
}

Op Tape::op(Var v) const { return nodes_.at(v.id()).op; }

std::vector<Var> Tape::parents(Var v) const {
    std::vector<Var> out;
    for (auto pid : nodes_.at(v.id()).parents) out.push_back(Var(const_cast<Tape*>(this), pid));
    return out;
}

void Tape::reset_grads() {
    for (auto& n : nodes_) n.grad = Tensor();
    backward_done_ = false;
}

void Tape::backward(Var loss, bool accumulate_params) {
    if (loss.tape() != this) throw UsageError("loss is not recorded on this tape");
    const auto& lv = nodes_[loss.id()].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw UsageError("backward needs a 1x1 loss, got " + lv.shape_string());
    }
    if (backward_done_) throw UsageError("backward called twice without reset_grads()");
    backward_done_ = true;

    for (auto& n : nodes_) n.grad = Tensor();
    nodes_[loss.id()].grad = Tensor(1, 1, 1.0);
    for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty() || n.op == Op::leaf) continue;
        backward_node(n);
    }
    if (!accumulate_params) return;
    for (auto& n : nodes_) {
        if (n.param == nullptr || n.grad.empty()) continue;
        if (!n.param->grad.same_shape(n.param->value)) n.param->zero_grad();
        n.param->grad += n.grad;
    }
}

void Tape::backward_node(Node& node) {
    const Tensor& g = node.grad;
    auto grad_of = [this](std::uint32_t pid) -> Tensor* {
        Node& p = nodes_[pid];
        if (!p.requires_grad) return nullptr;
        if (p.grad.empty()) p.grad = Tensor(p.value.rows(), p.value.cols());
        return &p.grad;
    };
    auto val = [this](std::uint32_t pid) -> const Tensor& { return nodes_[pid].value; };

    switch (node.op) {
    case Op::leaf:
        break;
    case Op::matmul: {
        const Tensor& a = val(node.parents[0]);
        const Tensor& b = val(node.parents[1]);
        if (Tensor* ga = grad_of(node.parents[0])) {
            // ga += g * b^T
            for (std::size_t i = 0; i < a.rows(); ++i) {
                for (std::size_t k = 0; k < a.cols(); ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < b.cols(); ++j) s += g(i, j) * b(k, j);
                    (*ga)(i, k) += s;
                }
            }
        }
        if (Tensor* gb = grad_of(node.parents[1])) {
            // gb += a^T * g
            for (std::size_t i = 0; i < a.rows(); ++i) {
                for (std::size_t k = 0; k < a.cols(); ++k) {
                    const double aik = a(i, k);
                    if (aik == 0.0) continue;
                    for (std::size_t j = 0; j < b.cols(); ++j) (*gb)(k, j) += aik * g(i, j);
                }
            }
        }
        break;
    }
    case Op::add:
        for (auto pid : node.parents) {
            if (Tensor* gp = grad_of(pid)) *gp += g;
        }
        break;
    case Op::sub:
        if (Tensor* ga = grad_of(node.parents[0])) *ga += g;
        if (Tensor* gb = grad_of(node.parents[1])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
        }
        break;
    case Op::add_bias:
        if (Tensor* ga = grad_of(node.parents[0])) *ga += g;
        if (Tensor* gb = grad_of(node.parents[1])) {
            for (std::size_t r = 0; r < g.rows(); ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c);
                (*gb)[r] += s;
            }
        }
        break;
    case Op::scale:
        if (Tensor* ga = grad_of(node.parents[0])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += node.scalar * g[i];
        }
        break;
    case Op::hadamard: {
        const Tensor& a = val(node.parents[0]);
        const Tensor& b = val(node.parents[1]);
        if (Tensor* ga = grad_of(node.parents[0])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b[i];
        }
        if (Tensor* gb = grad_of(node.parents[1])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a[i];
        }
        break;
    }
    case Op::sigmoid:
        if (Tensor* ga = grad_of(node.parents[0])) {
            const Tensor& s = node.value;
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * s[i] * (1.0 - s[i]);
        }
        break;
    case Op::relu:
        if (Tensor* ga = grad_of(node.parents[0])) {
            const Tensor& a = val(node.parents[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (a[i] > 0.0) (*ga)[i] += g[i];
            }
        }
        break;
    case Op::tanh:
        if (Tensor* ga = grad_of(node.parents[0])) {
            const Tensor& t = node.value;
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - t[i] * t[i]);
        }
        break;
    case Op::mean: {
        const double inv = 1.0 / static_cast<double>(node.parents.size());
        for (auto pid : node.parents) {
            if (Tensor* gp = grad_of(pid)) {
                for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] += g[i] * inv;
            }
        }
        break;
    }
    case Op::column:
        if (Tensor* ge = grad_of(node.parents[0])) {
            for (std::size_t r = 0; r < g.rows(); ++r) (*ge)(r, node.index) += g[r];
        }
        break;
    case Op::sum:
        if (Tensor* ga = grad_of(node.parents[0])) {
            for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0];
        }
        break;
    case Op::log_clamped:
        if (Tensor* ga = grad_of(node.parents[0])) {
            const Tensor& a = val(node.parents[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (a[i] > node.scalar) (*ga)[i] += g[i] / a[i];
            }
        }
        break;
    case Op::softmax:
        if (Tensor* ga = grad_of(node.parents[0])) {
            const Tensor& s = node.value;
            for (std::size_t c = 0; c < s.cols(); ++c) {
                double dot = 0.0;
                for (std::size_t r = 0; r < s.rows(); ++r) dot += g(r, c) * s(r, c);
                for (std::size_t r = 0; r < s.rows(); ++r) (*ga)(r, c) += s(r, c) * (g(r, c) - dot);
            }
        }
        break;
    case Op::highway: {
        const Tensor& cand = val(node.parents[0]);
        const Tensor& gate = val(node.parents[1]);
        const Tensor& prev = val(node.parents[2]);
        if (Tensor* gc = grad_of(node.parents[0])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gc)[i] += g[i] * gate[i];
        }
        if (Tensor* gg = grad_of(node.parents[1])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gg)[i] += g[i] * (cand[i] - prev[i]);
        }
        if (Tensor* gp = grad_of(node.parents[2])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] += g[i] * (1.0 - gate[i]);
        }
        break;
    }
    }
}

// Ops --------------------------------------------------------------------

struct TapeAccess {
    static Tape::Node& node(Var v) { return v.tape()->nodes_[v.id()]; }

    static Var push(Tape* tape, Tensor value, Op op, std::vector<std::uint32_t> parents,
                    double scalar = 0.0, std::size_t index = 0) {
        Tape::Node n;
        n.value = std::move(value);
        n.op = op;
        for (auto pid : parents) n.requires_grad = n.requires_grad || tape->nodes_[pid].requires_grad;
        n.parents = std::move(parents);
        n.scalar = scalar;
        n.index = index;
        return tape->push(std::move(n));
    }

    static void count_clamps(Tape* tape, std::size_t n) { tape->clamp_events_ += n; }
};

namespace {

Tape* common_tape(Var a, Var b) {
    if (!a.valid() || !b.valid()) throw UsageError("operation on an unbound Var");
    if (a.tape() != b.tape()) throw UsageError("operands live on different tapes");
    return a.tape();
}

Tape* tape_of(Var a) {
    if (!a.valid()) throw UsageError("operation on an unbound Var");
    return a.tape();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

template <typename F>
Var unary(Var a, Op op, F f) {
    Tape* t = tape_of(a);
    Tensor out = a.value();
    for (auto& v : out.data()) v = f(v);
    return TapeAccess::push(t, std::move(out), op, {a.id()});
}

} // namespace

Var matmul(Var a, Var b) {
    Tape* t = common_tape(a, b);
    Tensor out = matmul(a.value(), b.value());
    return TapeAccess::push(t, std::move(out), Op::matmul, {a.id(), b.id()});
}

Var add(Var a, Var b) {
    Tape* t = common_tape(a, b);
    require_same_shape("add", a.value(), b.value());
    Tensor out = a.value();
    out += b.value();
    return TapeAccess::push(t, std::move(out), Op::add, {a.id(), b.id()});
}

Var sub(Var a, Var b) {
    Tape* t = common_tape(a, b);
    require_same_shape("sub", a.value(), b.value());
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return TapeAccess::push(t, std::move(out), Op::sub, {a.id(), b.id()});
}

Var add_bias(Var a, Var b) {
    Tape* t = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (bv.cols() != 1 || bv.rows() != av.rows()) {
        throw DimensionError("add_bias shape mismatch: " + av.shape_string() + " + " +
                             bv.shape_string() + " (bias must be rows x 1)");
    }
    Tensor out = av;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[r];
    }
    return TapeAccess::push(t, std::move(out), Op::add_bias, {a.id(), b.id()});
}

Var scale(Var a, double c) {
    Tape* t = tape_of(a);
    Tensor out = a.value();
    for (auto& v : out.data()) v *= c;
    return TapeAccess::push(t, std::move(out), Op::scale, {a.id()}, c);
}

Var hadamard(Var a, Var b) {
    Tape* t = common_tape(a, b);
    require_same_shape("hadamard", a.value(), b.value());
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return TapeAccess::push(t, std::move(out), Op::hadamard, {a.id(), b.id()});
}

Var sigmoid(Var a) { return unary(a, Op::sigmoid, sigmoid_scalar); }

Var relu(Var a) {
    return unary(a, Op::relu, [](double v) { return v > 0.0 ? v : 0.0; });
}

Var tanh(Var a) {
    return unary(a, Op::tanh, [](double v) { return std::tanh(v); });
}

Var mean_of(std::span<const Var> nodes) {
    if (nodes.empty()) throw UsageError("mean_of needs at least one node");
    Tape* t = tape_of(nodes[0]);
    Tensor out = nodes[0].value();
    std::vector<std::uint32_t> parents{nodes[0].id()};
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        common_tape(nodes[0], nodes[k]);
        require_same_shape("mean_of", out, nodes[k].value());
        out += nodes[k].value();
        parents.push_back(nodes[k].id());
    }
    const double n = static_cast<double>(nodes.size());
    for (auto& v : out.data()) v /= n;
    return TapeAccess::push(t, std::move(out), Op::mean, std::move(parents));
}

Var column_of(Var e, std::size_t i) {
    Tape* t = tape_of(e);
    const Tensor& ev = e.value();
    if (i >= ev.cols()) {
        throw UsageError("column_of index " + std::to_string(i) + " out of range for " +
                         ev.shape_string());
    }
    return TapeAccess::push(t, ev.column_at(i), Op::column, {e.id()}, 0.0, i);
}

Var sum(Var a) {
    Tape* t = tape_of(a);
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return TapeAccess::push(t, Tensor(1, 1, s), Op::sum, {a.id()});
}

Var log_clamped(Var a, double floor) {
    Tape* t = tape_of(a);
    Tensor out = a.value();
    std::size_t clamped = 0;
    for (auto& v : out.data()) {
        if (!(v > floor)) {
            v = floor;
            ++clamped;
        }
        v = std::log(v);
    }
    TapeAccess::count_clamps(t, clamped);
    return TapeAccess::push(t, std::move(out), Op::log_clamped, {a.id()}, floor);
}

Var softmax(Var a) {
    Tape* t = tape_of(a);
    Tensor out = a.value();
    for (std::size_t c = 0; c < out.cols(); ++c) {
        double mx = out(0, c);
        for (std::size_t r = 1; r < out.rows(); ++r) mx = std::max(mx, out(r, c));
        double z = 0.0;
        for (std::size_t r = 0; r < out.rows(); ++r) {
            out(r, c) = std::exp(out(r, c) - mx);
            z += out(r, c);
        }
        for (std::size_t r = 0; r < out.rows(); ++r) out(r, c) /= z;
    }
    return TapeAccess::push(t, std::move(out), Op::softmax, {a.id()});
}

Var highway(Var candidate, Var gate, Var prev) {
    Tape* t = common_tape(candidate, gate);
    common_tape(candidate, prev);
    require_same_shape("highway", candidate.value(), gate.value());
    require_same_shape("highway", candidate.value(), prev.value());
    const Tensor& c = candidate.value();
    const Tensor& g = gate.value();
    const Tensor& p = prev.value();
    Tensor out(c.rows(), c.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] * c[i] + (1.0 - g[i]) * p[i];
    return TapeAccess::push(t, std::move(out), Op::highway, {candidate.id(), gate.id(), prev.id()});
}

double grad_check(const std::function<Var(Tape&)>& build, std::span<Parameter* const> params,
                  double step) {
    if (!(step > 0.0)) throw UsageError("grad_check step must be positive");
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Var loss = build(tape);
        tape.backward(loss);
    }
    auto eval = [&build]() {
        Tape tape;
        return build(tape).value()[0];
    };
    double worst = 0.0;
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + step;
            const double up = eval();
            p->value[i] = orig - step;
            const double down = eval();
            p->value[i] = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = p->grad[i];
            const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace clb

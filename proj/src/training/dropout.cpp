#include "clb/dropout.hpp"

#include "clb/errors.hpp"

namespace clb {

Var apply_dropout(Var x, double rate, Rng& rng, Mode mode) {
    if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout rate must be in [0, 1)");
    if (mode == Mode::eval || rate == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    Tensor mask(x.rows(), x.cols());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? scale : 0.0;
    return hadamard(x, x.tape()->constant(std::move(mask)));
}

Var apply_dropout(Var x, const DropoutContext& ctx) {
    if (ctx.mode == Mode::eval || ctx.rate == 0.0) return x;
    if (!ctx.rng) throw UsageError("training-mode dropout needs an rng");
    return apply_dropout(x, ctx.rate, *ctx.rng, ctx.mode);
}

} // namespace clb

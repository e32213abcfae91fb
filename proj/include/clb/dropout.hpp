#pragma once

#include "clb/numerics.hpp"

#include <random>

namespace clb {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

struct DropoutContext {
    double rate = 0.0;
    Mode mode = Mode::eval;
    Rng* rng = nullptr;
};

/// Inverted dropout: keeps each entry with probability 1 - rate and scales
/// kept entries by 1 / (1 - rate). Identity in eval mode or at rate 0.
Var apply_dropout(Var x, double rate, Rng& rng, Mode mode);
Var apply_dropout(Var x, const DropoutContext& ctx);

} // namespace clb

#include "clb/training.hpp"

#include "clb/errors.hpp"

namespace clb {

std::string to_string(ScheduleAction a) {
    switch (a) {
    case ScheduleAction::proceed: return "proceed";
    case ScheduleAction::halve: return "halve";
    case ScheduleAction::stop: return "stop";
    }
    return "?";
}

ScheduleAction lr_schedule_step(const std::vector<double>& history, ScheduleState& state,
                                const TrainConfig& config) {
    if (history.empty()) throw UsageError("schedule needs a non-empty history");
    if (history.size() != state.epoch + 1) {
        throw UsageError("schedule state is at epoch " + std::to_string(state.epoch) +
                         ", history has " + std::to_string(history.size()) + " entries");
    }
    state.epoch = history.size();
    const double value = history.back();

    ScheduleAction action = ScheduleAction::proceed;
    if (value < state.best - config.improvement_tolerance) {
        state.best = value;
        state.since_improvement = 0;
    } else if (state.epoch > config.warmup_epochs) {
        ++state.since_improvement;
    }
    if (state.since_improvement >= config.patience_epochs) {
        state.since_improvement = 0;
        if (state.halvings >= config.max_halvings) {
            action = ScheduleAction::stop;
        } else {
            ++state.halvings;
            action = state.halvings == config.max_halvings ? ScheduleAction::stop : ScheduleAction::halve;
        }
    }
    if (state.epoch >= config.max_epochs) action = ScheduleAction::stop;
    return action;
}

std::vector<ScheduleAction> replay_schedule(const std::vector<double>& history,
                                            const TrainConfig& config) {
    std::vector<ScheduleAction> actions;
    ScheduleState state;
    std::vector<double> prefix;
    prefix.reserve(history.size());
    for (double v : history) {
        prefix.push_back(v);
        actions.push_back(lr_schedule_step(prefix, state, config));
        if (actions.back() == ScheduleAction::stop) break;
    }
    return actions;
}

} // namespace clb

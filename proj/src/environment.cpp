#include "felab/environment.hpp"

namespace felab {

LakeConfig LakeConfig::nonstationary() {
    LakeConfig cfg;
    // Initially G at 6, H at 8 (context 2), swapping at the listed episodes.
    cfg.initial_context = 2;
    int ctx = 2;
    for (int ep : {21, 121, 141, 251, 451}) {
        ctx = (ctx == 1) ? 2 : 1;
        cfg.context_switches.emplace_back(ep, ctx);
    }
    return cfg;
}

int apply_schedule(const LakeConfig& cfg, int episode) {
    int ctx = cfg.initial_context;
    for (const auto& [ep, c] : cfg.context_switches) {
        if (episode >= ep) ctx = c;
        else break;
    }
    return ctx;
}

FrozenLakeEnv::FrozenLakeEnv(LakeConfig cfg) : cfg_(std::move(cfg)) {
    int last = 0;
    for (const auto& [ep, c] : cfg_.context_switches) {
        if (ep <= last) throw ModelError("context switch episodes must be strictly increasing");
        if (c < 1 || c > static_cast<int>(cfg_.goal_of_context.size()))
            throw ModelError("context out of range in schedule");
        last = ep;
    }
    reset(1);
}

void FrozenLakeEnv::reset(int episode) {
    context_ = apply_schedule(cfg_, episode);
    pos_ = cfg_.start;
    moves_ = 0;
    terminal_ = false;
    goal_reached_ = false;
}

int FrozenLakeEnv::observe_score() const {
    if (pos_ == goal_position()) return kScorePositive;
    if (pos_ == hole_position()) return kScoreNegative;
    return kScoreNeutral;
}

StepResult FrozenLakeEnv::step(Action a) {
    if (terminal_) throw ModelError("step() called on a terminal episode");
    pos_ = move_location(pos_ - 1, a, cfg_.rows, cfg_.cols) + 1;
    ++moves_;
    StepResult r;
    r.position = pos_;
    r.score_outcome = observe_score();
    r.moves = moves_;
    if (pos_ == goal_position()) {
        terminal_ = true;
        goal_reached_ = true;
        r.reward = cfg_.reward_goal;
    } else if (pos_ == hole_position()) {
        terminal_ = true;
        r.reward = cfg_.reward_hole;
    } else {
        r.reward = cfg_.reward_step;
        if (moves_ >= cfg_.horizon) terminal_ = true;
    }
    r.terminal = terminal_;
    return r;
}

} // namespace felab

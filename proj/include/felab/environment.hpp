#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "felab/generative_model.hpp"

namespace felab {

/// Generative-process configuration: grid geometry, context schedule and
/// reward shaping. Contexts are 1-based; context k places the goal at
/// goal_of_context[k-1].
struct LakeConfig {
    int rows = 3, cols = 3;
    int start = 1;      // 1-based position
    int horizon = 15;   // max moves per episode
    int initial_context = 2; // stationary default: G at 6, H at 8
    std::vector<int> goal_of_context{8, 6};
    std::vector<int> hole_of_context{6, 8};
    /// (episode, new context), episodes strictly increasing, 1-based.
    std::vector<std::pair<int, int>> context_switches;
    // Reward shaping: goal / hole delivered on termination, step cost per
    // non-terminal move. The 100-score metric is independent of these.
    double reward_goal = 100.0;
    double reward_hole = 0.0;
    double reward_step = 0.0;

    /// Non-stationary schedule from the swap episodes {21,121,141,251,451}.
    static LakeConfig nonstationary();
};

/// Piecewise-constant context for a 1-based episode index.
int apply_schedule(const LakeConfig& cfg, int episode);

struct StepResult {
    int position = 0;      // 1-based
    int score_outcome = kScoreNeutral;
    double reward = 0.0;   // shaped reward for this move
    bool terminal = false;
    int moves = 0;         // moves so far this episode
};

/// The generative process: deterministic 3x3 grid walk with absorbing goal
/// and hole cells and an episode-indexed context schedule.
class FrozenLakeEnv {
public:
    explicit FrozenLakeEnv(LakeConfig cfg);

    void reset(int episode); // 1-based episode index; applies the schedule

    int position() const { return pos_; }
    int context() const { return context_; }
    int moves() const { return moves_; }
    bool terminal() const { return terminal_; }
    bool goal_reached() const { return goal_reached_; }
    int goal_position() const { return cfg_.goal_of_context[context_ - 1]; }
    int hole_position() const { return cfg_.hole_of_context[context_ - 1]; }
    const LakeConfig& config() const { return cfg_; }

    /// Score category of the current position under the current context.
    int observe_score() const;

    StepResult step(Action a);

    /// 100 if the goal was reached this episode, else 0.
    double episode_score() const { return goal_reached_ ? 100.0 : 0.0; }

private:
    LakeConfig cfg_;
    int context_ = 1;
    int pos_ = 1;
    int moves_ = 0;
    bool terminal_ = false;
    bool goal_reached_ = false;
};

} // namespace felab

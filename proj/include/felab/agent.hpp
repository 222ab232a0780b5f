#pragma once

#include <string>
#include <vector>

#include "felab/environment.hpp"
#include "felab/rng.hpp"

namespace felab {

/// Per-step diagnostic record (emitted behind --trace).
struct StepDiag {
    int episode = 0;
    int tau = 0;
    int action = -1;
    double gamma = 0.0;
    double q_entropy = 0.0;
    double free_energy = 0.0;
    std::vector<double> G; // per policy (inactive policies carry their last value)
};

/// Per-episode record shared by all agents.
struct AgentTrace {
    std::vector<int> actions;
    std::vector<int> positions;      // observed positions incl. start (1-based)
    std::vector<int> score_outcomes; // aligned with positions
    double score = 0.0;              // 100-score metric
    double shaped_return = 0.0;      // sum of shaped rewards
    int moves = 0;
    bool goal_reached = false;
    std::vector<StepDiag> diag;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string id() const = 0;
    /// Reset all cross-episode state (start of a trial).
    virtual void begin_trial() = 0;
    virtual AgentTrace run_episode(FrozenLakeEnv& env, Rng& rng, int episode,
                                   bool record_diag = false) = 0;
};

} // namespace felab

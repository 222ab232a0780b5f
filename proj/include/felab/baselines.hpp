#pragma once

#include <string>
#include <vector>

#include "felab/agent.hpp"
#include "felab/math_utils.hpp"

namespace felab {

// ---------------------------------------------------------------------------
// Tabular Q-learning with epsilon-greedy exploration.
// ---------------------------------------------------------------------------

struct QConfig {
    double alpha = 0.5;
    double gamma = 0.99;
    double epsilon = 0.1;   // fixed rate; ignored when decay_episodes > 0
    int decay_episodes = 0; // > 0: epsilon decays linearly 1 -> 0 over this many episodes
    double q_init = 0.0;    // optimistic initialization value
    // When set, the harness initializes the table to max(0, shaped rewards).
    bool init_from_rewards = true;
    // Break greedy ties uniformly at random instead of by lowest index.
    bool random_ties = false;
    double tie_tol = 0.0; // values within this of the max count as tied
    // > 0: add U(0, init_noise) to the initial table, giving each trial a
    // stable random tie preference instead of per-step coin flips.
    double init_noise = 0.0;
};

/// Greedy action with lowest-index tie-break.
int q_greedy(std::span<const double> q_row);

/// Greedy action with uniform tie-break among near-maximal entries.
int q_greedy_random_ties(std::span<const double> q_row, Rng& rng,
                         double tie_tol = 0.0);

/// Epsilon-greedy draw: uniform action with probability eps, else greedy.
int q_step(const Matrix& q, int s, double eps, Rng& rng, bool random_ties = false,
           double tie_tol = 0.0);

/// TD(0): Q(s,a) <- (1-alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a')),
/// with a zero bootstrap when s' is terminal.
void q_update(Matrix& q, int s, int a, double r, int s_next, bool terminal,
              double alpha, double gamma);

class QLearningAgent : public Agent {
public:
    QLearningAgent(int num_states, QConfig cfg, std::string id);

    std::string id() const override { return id_; }
    void begin_trial() override;
    AgentTrace run_episode(FrozenLakeEnv& env, Rng& rng, int episode,
                           bool record_diag = false) override;

    double epsilon_for(int episode) const;
    const Matrix& table() const { return q_; }

private:
    QConfig cfg_;
    std::string id_;
    Matrix q_; // num_states x num_actions
};

// ---------------------------------------------------------------------------
// Bayesian model-based RL: Beta-Bernoulli transition and reward models,
// Thompson sampling, value iteration.
// ---------------------------------------------------------------------------

struct BetaCount {
    double alpha = 1.0;
    double beta = 1.0;
    double mean() const { return alpha / (alpha + beta); }
    double sample(Rng& rng) const { return rng.beta(alpha, beta); }
};

/// One sampled MDP on the grid positions: per (s, a) the probability that
/// the intended move succeeds (failure keeps the position), terminal cells
/// with a sampled arrival reward, and a per-move living reward.
struct SampledMdp {
    int rows = 0, cols = 0;
    std::vector<double> theta;     // [s * 4 + a] success probability
    std::vector<char> terminal;    // per position (0-based)
    std::vector<double> reward;    // arrival reward per position (terminal cells)
    double reward_step = 0.0;
    double gamma = 0.9;
};

/// Optimal Q for a sampled MDP by value iteration (Bellman residual below
/// tol, sweep cap). `v` is used as a warm start and holds the final values.
/// Throws ModelError when the cap is hit before convergence.
Matrix value_iteration(const SampledMdp& mdp, std::vector<double>& v,
                       double tol = 1e-6, int cap = 1000);

struct BayesRlConfig {
    int samples = 50;   // Thompson posterior samples per episode
    double gamma = 0.9; // planning discount
    double vi_tol = 1e-6;
    int vi_cap = 1000;
    double tie_tol = 1e-9; // Q values within this of the max tie for random break
    // > 0: sliding-window posterior — when a reward candidate's pseudo-count
    // total exceeds this, both counts are rescaled to sum to it. Bounds how
    // much contrary evidence is needed after an environment change.
    double count_window = 0.0;
};

class BayesianRlAgent : public Agent {
public:
    BayesianRlAgent(int rows, int cols, std::vector<int> reward_candidates,
                    BayesRlConfig cfg, std::string id);

    std::string id() const override { return id_; }
    void begin_trial() override;
    AgentTrace run_episode(FrozenLakeEnv& env, Rng& rng, int episode,
                           bool record_diag = false) override;

    /// Average of the optimal Q over `samples` posterior draws.
    Matrix thompson_plan(Rng& rng, double reward_goal, double reward_hole,
                         double reward_step);

    /// Conjugate updates from one observed transition.
    void posterior_update(int s, int a, double r, int s_next, bool terminal);

    const std::vector<BetaCount>& transition_counts() const { return trans_; }
    const std::vector<BetaCount>& reward_counts() const { return rew_; }

private:
    int rows_, cols_;
    std::vector<int> candidates_; // 1-based reward-candidate positions
    BayesRlConfig cfg_;
    std::string id_;
    std::vector<BetaCount> trans_; // per (s, a)
    std::vector<BetaCount> rew_;   // per candidate: P(this cell pays the goal reward)
    std::vector<double> v_warm_;
};

} // namespace felab

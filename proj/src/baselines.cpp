#include "felab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace felab {

// --------------------------------------------------------------------------
// Q-learning
// --------------------------------------------------------------------------

int q_greedy(std::span<const double> q_row) {
    int best = 0;
    for (std::size_t a = 1; a < q_row.size(); ++a) {
        if (q_row[a] > q_row[best]) best = static_cast<int>(a);
    }
    return best;
}

int q_greedy_random_ties(std::span<const double> q_row, Rng& rng, double tie_tol) {
    double best = -std::numeric_limits<double>::infinity();
    for (double v : q_row) best = std::max(best, v);
    std::vector<int> ties;
    for (std::size_t a = 0; a < q_row.size(); ++a) {
        if (q_row[a] >= best - tie_tol) ties.push_back(static_cast<int>(a));
    }
    return ties[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(ties.size())))];
}

int q_step(const Matrix& q, int s, double eps, Rng& rng, bool random_ties,
           double tie_tol) {
    if (rng.uniform() < eps) return rng.uniform_int(q.cols());
    std::vector<double> row(q.cols());
    for (int a = 0; a < q.cols(); ++a) row[a] = q(s, a);
    return random_ties ? q_greedy_random_ties(row, rng, tie_tol) : q_greedy(row);
}

void q_update(Matrix& q, int s, int a, double r, int s_next, bool terminal,
              double alpha, double gamma) {
    double bootstrap = 0.0;
    if (!terminal) {
        bootstrap = q(s_next, 0);
        for (int u = 1; u < q.cols(); ++u) bootstrap = std::max(bootstrap, q(s_next, u));
    }
    q(s, a) = (1.0 - alpha) * q(s, a) + alpha * (r + gamma * bootstrap);
}

QLearningAgent::QLearningAgent(int num_states, QConfig cfg, std::string id)
    : cfg_(cfg), id_(std::move(id)), q_(num_states, kNumActions, cfg.q_init) {}

void QLearningAgent::begin_trial() {
    std::fill(q_.data().begin(), q_.data().end(), cfg_.q_init);
}

double QLearningAgent::epsilon_for(int episode) const {
    if (cfg_.decay_episodes <= 1) return cfg_.decay_episodes == 1 ? 0.0 : cfg_.epsilon;
    const double t = static_cast<double>(episode - 1) / (cfg_.decay_episodes - 1);
    return std::max(0.0, 1.0 - t);
}

AgentTrace QLearningAgent::run_episode(FrozenLakeEnv& env, Rng& rng, int episode, bool) {
    env.reset(episode);
    if (episode == 1 && cfg_.init_noise > 0.0) {
        for (double& v : q_.data()) v = cfg_.q_init + cfg_.init_noise * rng.uniform();
    }
    AgentTrace trace;
    trace.positions.push_back(env.position());
    trace.score_outcomes.push_back(env.observe_score());
    const double eps = epsilon_for(episode);

    int s = env.position() - 1;
    while (!env.terminal()) {
        const int a = q_step(q_, s, eps, rng, cfg_.random_ties, cfg_.tie_tol);
        const StepResult step = env.step(static_cast<Action>(a));
        q_update(q_, s, a, step.reward, step.position - 1, step.terminal,
                 cfg_.alpha, cfg_.gamma);
        trace.actions.push_back(a);
        trace.positions.push_back(step.position);
        trace.score_outcomes.push_back(step.score_outcome);
        trace.shaped_return += step.reward;
        s = step.position - 1;
    }
    trace.moves = env.moves();
    trace.goal_reached = env.goal_reached();
    trace.score = env.episode_score();
    return trace;
}

// --------------------------------------------------------------------------
// Bayesian model-based RL
// --------------------------------------------------------------------------

Matrix value_iteration(const SampledMdp& mdp, std::vector<double>& v, double tol, int cap) {
    const int n = mdp.rows * mdp.cols;
    if (static_cast<int>(v.size()) != n) v.assign(n, 0.0);
    Matrix q(n, kNumActions, 0.0);
    std::vector<double> v_new(n, 0.0);

    auto contrib = [&](int dest) {
        return mdp.terminal[dest] ? mdp.gamma * mdp.reward[dest]
                                  : mdp.reward_step + mdp.gamma * v[dest];
    };

    for (int sweep = 0; sweep < cap; ++sweep) {
        double residual = 0.0;
        for (int s = 0; s < n; ++s) {
            if (mdp.terminal[s]) {
                v_new[s] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < kNumActions; ++a) {
                const int ns = move_location(s, static_cast<Action>(a), mdp.rows, mdp.cols);
                const double theta = mdp.theta[s * kNumActions + a];
                const double val = theta * contrib(ns) + (1.0 - theta) * contrib(s);
                q(s, a) = val;
                best = std::max(best, val);
            }
            v_new[s] = best;
            residual = std::max(residual, std::abs(v_new[s] - v[s]));
        }
        v = v_new;
        if (residual < tol) return q;
    }
    throw ModelError("value iteration failed to converge within the sweep cap");
}

BayesianRlAgent::BayesianRlAgent(int rows, int cols, std::vector<int> reward_candidates,
                                 BayesRlConfig cfg, std::string id)
    : rows_(rows), cols_(cols), candidates_(std::move(reward_candidates)), cfg_(cfg),
      id_(std::move(id)) {
    begin_trial();
}

void BayesianRlAgent::begin_trial() {
    trans_.assign(static_cast<std::size_t>(rows_) * cols_ * kNumActions, BetaCount{});
    rew_.assign(candidates_.size(), BetaCount{});
    v_warm_.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
}

Matrix BayesianRlAgent::thompson_plan(Rng& rng, double reward_goal, double reward_hole,
                                      double reward_step) {
    const int n = rows_ * cols_;
    SampledMdp mdp;
    mdp.rows = rows_;
    mdp.cols = cols_;
    mdp.gamma = cfg_.gamma;
    mdp.reward_step = reward_step;
    mdp.theta.resize(static_cast<std::size_t>(n) * kNumActions);
    mdp.terminal.assign(n, 0);
    mdp.reward.assign(n, 0.0);
    for (int c : candidates_) mdp.terminal[c - 1] = 1;

    Matrix q_hat(n, kNumActions, 0.0);
    for (int i = 0; i < cfg_.samples; ++i) {
        for (std::size_t t = 0; t < mdp.theta.size(); ++t) mdp.theta[t] = trans_[t].sample(rng);
        for (std::size_t ci = 0; ci < candidates_.size(); ++ci) {
            const double p = rew_[ci].sample(rng);
            mdp.reward[candidates_[ci] - 1] = p * reward_goal + (1.0 - p) * reward_hole;
        }
        const Matrix q = value_iteration(mdp, v_warm_, cfg_.vi_tol, cfg_.vi_cap);
        for (std::size_t j = 0; j < q.data().size(); ++j) q_hat.data()[j] += q.data()[j];
    }
    const double inv = 1.0 / cfg_.samples;
    for (double& x : q_hat.data()) x *= inv;
    return q_hat;
}

void BayesianRlAgent::posterior_update(int s, int a, double r, int s_next, bool terminal) {
    const int intended = move_location(s, static_cast<Action>(a), rows_, cols_);
    BetaCount& t = trans_[static_cast<std::size_t>(s) * kNumActions + a];
    if (s_next == intended) t.alpha += 1.0;
    else t.beta += 1.0;

    if (terminal) {
        for (std::size_t ci = 0; ci < candidates_.size(); ++ci) {
            if (candidates_[ci] - 1 == s_next) {
                if (r > 0.0) rew_[ci].alpha += 1.0;
                else rew_[ci].beta += 1.0;
                const double total = rew_[ci].alpha + rew_[ci].beta;
                if (cfg_.count_window > 0.0 && total > cfg_.count_window) {
                    const double scale = cfg_.count_window / total;
                    rew_[ci].alpha *= scale;
                    rew_[ci].beta *= scale;
                }
            }
        }
    }
}

AgentTrace BayesianRlAgent::run_episode(FrozenLakeEnv& env, Rng& rng, int episode, bool) {
    env.reset(episode);
    AgentTrace trace;
    trace.positions.push_back(env.position());
    trace.score_outcomes.push_back(env.observe_score());

    const LakeConfig& ec = env.config();
    const Matrix q_hat = thompson_plan(rng, ec.reward_goal, ec.reward_hole, ec.reward_step);

    std::vector<int> ties;
    while (!env.terminal()) {
        const int s = env.position() - 1;
        double best = q_hat(s, 0);
        for (int a = 1; a < kNumActions; ++a) best = std::max(best, q_hat(s, a));
        ties.clear();
        for (int a = 0; a < kNumActions; ++a) {
            if (q_hat(s, a) >= best - cfg_.tie_tol) ties.push_back(a);
        }
        const int a = ties[rng.uniform_int(static_cast<int>(ties.size()))];

        const StepResult step = env.step(static_cast<Action>(a));
        const bool absorbed = step.position == env.goal_position() ||
                              step.position == env.hole_position();
        posterior_update(s, a, step.reward, step.position - 1, absorbed);
        trace.actions.push_back(a);
        trace.positions.push_back(step.position);
        trace.score_outcomes.push_back(step.score_outcome);
        trace.shaped_return += step.reward;
    }
    trace.moves = env.moves();
    trace.goal_reached = env.goal_reached();
    trace.score = env.episode_score();
    return trace;
}

} // namespace felab

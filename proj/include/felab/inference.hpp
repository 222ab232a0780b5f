#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "felab/agent.hpp"
#include "felab/generative_model.hpp"
#include "felab/rng.hpp"

namespace felab {

/// Tuning knobs for the variational scheme and the planning agent.
struct AiConfig {
    double zeta = 4.0;         // gradient step divisor for state updates
    int max_sweeps = 16;       // update sweeps over the policy window
    double conv_tol = 1e-4;    // early exit when all prediction errors fall below this
    double beta_prior = 1.0;   // prior on inverse precision (gamma = 1/beta)
    int precision_iters = 32;
    double precision_tol = 1e-6;
    double beta_floor = 1e-3;
    double prune_ratio = 1.0 / 128.0; // drop policies below max(q) * ratio
    bool sample_actions = true;       // false: argmax with lowest-index ties
    bool carry_context = true;        // carry the context posterior across episodes
    double context_drift = 0.05;      // between-episode mix toward uniform context
    bool online_learning = false;     // apply Dirichlet updates within the episode
    double eta = 1.0;                 // Dirichlet learning rate
};

/// Per-policy beliefs over the planning window: s[w] is the joint state
/// distribution at window step w (w = 0 is the current, observed time).
struct PolicyBeliefs {
    std::vector<std::vector<double>> s;
};

/// Additive decomposition of the expected free energy for one predicted
/// state distribution. The two routes,
///   risk + ambiguity   and   -epistemic - extrinsic,
/// are algebraically equal; both are computed independently for testing.
struct EFEBreakdown {
    double risk = 0.0;
    double ambiguity = 0.0;
    double epistemic = 0.0; // mutual information between states and outcomes
    double extrinsic = 0.0; // expected log-preference of predicted outcomes
    double novelty = 0.0;   // Dirichlet count-based information gain
};

/// Posterior over policies with the converged precision.
struct PolicyPosterior {
    std::vector<double> q;     // softmax(-gamma G - F), zero on inactive entries
    std::vector<double> prior; // softmax(-gamma G)
    double gamma = 1.0;
    double beta = 1.0;
    int iterations = 0;
};

/// Sum over observed modalities of log A_m(o_m, .) as a function of the
/// joint state; zero vector when nothing is observed.
std::vector<double> log_likelihood(const GenerativeModel& g, const Observation& o);

/// Forward rollout initialization: exact single-step posterior at w = 0,
/// then beliefs propagated through the policy's transitions.
PolicyBeliefs rollout_beliefs(const GenerativeModel& g, const std::vector<int>& policy,
                              std::span<const double> d, const Observation& o);

/// Gradient sweeps on the window beliefs (state estimation). Prediction
/// errors are centered before the step so the fixed point has zero error.
/// Returns the number of sweeps performed.
int update_states(const GenerativeModel& g, const std::vector<int>& policy,
                  std::span<const double> d, const Observation& o,
                  PolicyBeliefs& b, const AiConfig& cfg);

/// Variational free energy of one policy's window under the model.
double variational_free_energy(const GenerativeModel& g, const std::vector<int>& policy,
                               std::span<const double> d, const Observation& o,
                               const PolicyBeliefs& b);

/// Expected free energy of a predicted state distribution, scored against
/// the preference columns for (0-based) timestep tau. The primary route
/// fills risk/ambiguity; set `use_epistemic_route` to fill the
/// epistemic/extrinsic pair instead. Novelty is filled whenever the model
/// learns its likelihood.
EFEBreakdown expected_free_energy(const GenerativeModel& g, std::span<const double> s,
                                  int tau, bool use_epistemic_route = false);

inline double efe_total(const EFEBreakdown& e, bool epistemic_route = false) {
    const double base = epistemic_route ? -e.epistemic - e.extrinsic : e.risk + e.ambiguity;
    return base - e.novelty;
}

/// Fixed-point iteration on the expected precision, returning the policy
/// posterior q = softmax(-gamma G - F) restricted to active policies.
PolicyPosterior infer_policies(std::span<const double> F, std::span<const double> G,
                               const std::vector<char>& active, const AiConfig& cfg);

/// Deactivate policies whose posterior falls below max(q) * ratio and
/// renormalize q over the survivors.
void prune_policies(std::vector<double>& q, std::vector<char>& active, double ratio);

/// Posterior-weighted average of the per-policy beliefs at window step w.
std::vector<double> bayesian_model_average(const std::vector<PolicyBeliefs>& beliefs,
                                           std::span<const double> q,
                                           const std::vector<char>& active, int w);

/// Marginal probability of each first action under the policy posterior.
std::vector<double> action_marginal(const PolicySet& ps, std::span<const double> q,
                                    const std::vector<char>& active);

/// Sample from the action marginal, or argmax with lowest-index ties.
int select_action(std::span<const double> action_probs, bool sample, Rng& rng);

struct PlannerCache; // internal fast-path state (see inference.cpp)
struct PlannerCacheDeleter {
    void operator()(PlannerCache*) const;
};
using PlannerCachePtr = std::unique_ptr<PlannerCache, PlannerCacheDeleter>;
PlannerCachePtr make_planner_cache();

/// One planning step: per-policy free energies, the converged policy
/// posterior (after pruning), the action marginal, and the model-averaged
/// current-state belief.
struct StepPlan {
    std::vector<double> F, G;
    PolicyPosterior post;
    std::vector<double> action_probs;
    std::vector<double> s_now;
};

/// Evaluate all policies for one observed timestep `tau` (1-based) from
/// prior `d`. Equivalent to running rollout_beliefs/update_states/
/// variational_free_energy/expected_free_energy/infer_policies/
/// prune_policies per policy, but restricted to the reachable state
/// support and deduplicated over dynamically identical policies.
StepPlan plan_step(GenerativeModel& g, const AiConfig& cfg, PlannerCache& cache,
                   std::span<const double> d, const Observation& o, int tau);

/// Receding-horizon planner: each move it re-enumerates the policy set,
/// infers states and policies over a depth-long window, and acts on the
/// first-step action marginal.
class ActiveInferenceAgent : public Agent {
public:
    ActiveInferenceAgent(GenerativeModel model, AiConfig cfg,
                         std::string id = "active-inference");
    ~ActiveInferenceAgent() override;

    std::string id() const override { return id_; }
    void begin_trial() override;
    AgentTrace run_episode(FrozenLakeEnv& env, Rng& rng, int episode,
                           bool record_diag = false) override;

    const GenerativeModel& model() const { return g_; }
    const AiConfig& config() const { return cfg_; }
    const std::vector<double>& context_belief() const { return context_belief_; }

private:
    GenerativeModel base_;
    GenerativeModel g_;
    AiConfig cfg_;
    std::string id_;
    std::vector<double> context_belief_;
    PlannerCachePtr cache_;
};

} // namespace felab

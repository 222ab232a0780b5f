#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "felab/math_utils.hpp"
#include "felab/state_space.hpp"

namespace felab {

enum class Action : int { Left = 0, Right = 1, Down = 2, Up = 3 };

/// Outcome index per modality; -1 marks an unobserved modality.
using Observation = std::vector<int>;
inline constexpr int kNumActions = 4;
inline const char* action_name(Action a) {
    switch (a) {
        case Action::Left: return "left";
        case Action::Right: return "right";
        case Action::Down: return "down";
        default: return "up";
    }
}

/// Score outcome categories for the second modality.
enum ScoreOutcome : int { kScorePositive = 0, kScoreNegative = 1, kScoreNeutral = 2 };
inline constexpr int kNumScoreOutcomes = 3;

/// Log-preferences over outcomes, per modality and per timestep.
/// Entries are nats, defined up to an additive constant, clipped at `floor`.
struct PreferenceModel {
    std::vector<Matrix> log_pref; // [modality](outcome, tau), tau in 0..T-1
    double floor = -32.0;

    bool flat(int modality) const;
    /// Preferred outcome distribution for (modality, tau): softmax of the column.
    std::vector<double> preferred(int modality, int tau) const;
};

/// Dirichlet concentration parameters over A (likelihood) and over the
/// per-timestep preference distributions, with learning-enabled flags.
struct DirichletCounts {
    bool learn_a = false;
    std::vector<Matrix> a; // same shapes as A
    bool learn_c = false;
    std::vector<Matrix> c; // same shapes as PreferenceModel::log_pref
};

/// The admissible policy set: every action sequence of length `depth`,
/// with an active flag used for pruning.
struct PolicySet {
    int depth = 0;
    int num_actions = 0;
    std::vector<std::vector<int>> seq; // [policy][step] -> action index
    std::vector<char> active;

    static PolicySet enumerate(int num_actions, int depth);
    void reset_active();
    int num_active() const;
    int size() const { return static_cast<int>(seq.size()); }
};

struct GenerativeModel {
    StateSpace states;
    std::vector<Matrix> A;              // per modality: |O_m| x |S|
    std::vector<Matrix> B;              // per action:   |S| x |S|
    PreferenceModel C;
    std::vector<std::vector<double>> D; // per factor
    DirichletCounts counts;
    PolicySet policies;
    int horizon = 15;

    int num_modalities() const { return static_cast<int>(A.size()); }
    /// Joint initial prior (outer product of the D factors).
    std::vector<double> initial_joint() const { return states.outer(D); }
    /// Check all normalization and shape invariants; throws ModelError.
    void validate() const;
    /// Recompute expected A from the Dirichlet counts (column means).
    void refresh_expected_likelihood();
};

struct FrozenLakeModelConfig {
    int rows = 3, cols = 3;
    int start = 1;                            // 1-based location
    std::vector<int> goal_of_context{8, 6};   // context 1 -> G=8, context 2 -> G=6
    std::vector<int> hole_of_context{6, 8};
    double concentration = 100.0;             // prior concentration on A
    double base_count = 0.25;                 // residual count spread over off entries
    double pref_positive = 4.0;               // nats, score modality
    double pref_negative = -4.0;
    double pref_neutral = 0.0;
    int policy_depth = 3;
    int horizon = 15;
    bool learn_a = false;
    bool learn_c = false;
    double a_init = 5.0;
    double c_init = 1.0;
};

/// Builds and validates the two-factor (location x context) FrozenLake
/// generative model: near-identity position likelihood, context-dependent
/// score likelihood, deterministic grid transitions with absorbing cells.
GenerativeModel build_frozenlake_model(const FrozenLakeModelConfig& config);

/// Scale such that a reward of magnitude 100 maps to 6 nats.
inline const double kRewardPreferenceScale = 6.0 / std::log(101.0);

/// Monotone reward -> log-preference map: scale * sign(r) * log(1 + |r|).
/// Zero rewards map to the flat baseline (0 nats).
std::vector<double> preferences_from_rewards(const std::vector<double>& rewards,
                                             double scale = kRewardPreferenceScale);

int move_location(int loc0, Action a, int rows, int cols); // 0-based locations

} // namespace felab

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "felab/baselines.hpp"
#include "felab/inference.hpp"

namespace felab {

/// Everything needed to construct one agent for a run.
struct AgentSpec {
    std::string id;
    std::string kind; // "q" | "bayes-rl" | "active-inference"
    QConfig q;
    BayesRlConfig brl;
    AiConfig ai;
    bool null_preferences = false;  // flat C (active inference)
    bool prefs_from_rewards = false; // derive C from the lake's shaped rewards
    bool learn_a = false;
    bool learn_c = false;
};

struct RunConfig {
    std::string experiment = "table1-stationary";
    int trials = 200;
    int episodes = 500;
    std::uint64_t seed = 1;
    int jobs = 0; // 0: hardware concurrency
    std::string out_dir = "out";
    bool trace = false;
    double ai_beta_prior = 1.0;
};

struct TrialSeries {
    std::vector<double> score; // per episode
    std::vector<double> moves;
};

struct Aggregate {
    double mean_score = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    double mean_moves = 0.0;
    std::vector<double> curve; // cross-trial mean score per episode
};

struct CellStat {
    std::string agent;
    std::string row; // reward-shaping label for table2, empty otherwise
    double mean_score = 0.0, ci_lo = 0.0, ci_hi = 0.0, mean_moves = 0.0;
};

struct ExperimentReport {
    std::string experiment;
    std::uint64_t seed = 0;
    int trials = 0, episodes = 0;
    std::vector<CellStat> cells;
    std::vector<std::pair<std::string, std::vector<double>>> curves;
    std::vector<int> switch_episodes;
};

/// The reward-shaping rows of the comparison experiment: (G, H, F).
struct ShapingRow {
    double reward_goal, reward_hole, reward_step;
    std::string label() const;
};
std::vector<ShapingRow> table2_rows();

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const LakeConfig& lake,
                                  int episodes);

/// The five-agent roster of the navigation experiments.
std::vector<AgentSpec> table1_roster(const RunConfig& cfg);

/// Run an agent spec over independent trials (parallel across trials,
/// deterministic merge in trial order; stream keyed by (seed, agent, trial)).
std::vector<TrialSeries> run_trials(const AgentSpec& spec, const LakeConfig& lake,
                                    int trials, int episodes, std::uint64_t seed,
                                    int agent_index, int jobs);

Aggregate aggregate(const std::vector<TrialSeries>& trials);

ExperimentReport run_table1(const RunConfig& cfg, bool nonstationary);
ExperimentReport run_table2(const RunConfig& cfg);

/// Qualitative summaries of the preference-learning experiments, plus
/// Dirichlet-count dumps (written when out_dir is non-empty).
struct PrefsOutcome {
    int likelihood_runs = 0;
    int likelihood_no_revisit_runs = 0; // first episode visits no cell twice
    int pref_runs = 0;
    int pref_dominant_runs = 0; // first-captured outcome dominates learned C
    int both_runs = 0;
    int both_direct_runs = 0; // direct path to preferred cell from episode 6
    std::vector<std::vector<int>> first_episode_paths; // likelihood-only runs
};
PrefsOutcome run_preference_learning(const RunConfig& cfg);

/// Writes summary.json, table.csv, curves.csv, curves.svg under out_dir.
void emit_report(const ExperimentReport& report, const std::string& out_dir);

} // namespace felab

#include "felab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace felab {

namespace {

std::string trim_number(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

} // namespace

std::string ShapingRow::label() const {
    return "G" + trim_number(reward_goal) + "_H" + trim_number(reward_hole) +
           "_F" + trim_number(reward_step);
}

std::vector<ShapingRow> table2_rows() {
    return {
        {0.0, 0.0, 0.0},     {0.0, -100.0, 0.0},  {100.0, -100.0, 0.0},
        {100.0, 0.0, -10.0}, {100.0, -100.0, -10.0}, {100.0, 0.0, 0.0},
    };
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const LakeConfig& lake,
                                  int episodes) {
    const int n_loc = lake.rows * lake.cols;
    if (spec.kind == "q") {
        QConfig q = spec.q;
        if (q.decay_episodes < 0) q.decay_episodes = episodes;
        if (q.init_from_rewards) {
            q.q_init = std::max({0.0, lake.reward_goal, lake.reward_hole, lake.reward_step});
            // Optimistic tables explore via uniform tie-breaks; an all-zero
            // table keeps the deterministic lowest-index policy.
            q.random_ties = q.q_init > 0.0;
        }
        return std::make_unique<QLearningAgent>(n_loc, q, spec.id);
    }
    if (spec.kind == "bayes-rl") {
        std::set<int> cells(lake.goal_of_context.begin(), lake.goal_of_context.end());
        cells.insert(lake.hole_of_context.begin(), lake.hole_of_context.end());
        return std::make_unique<BayesianRlAgent>(
            lake.rows, lake.cols, std::vector<int>(cells.begin(), cells.end()),
            spec.brl, spec.id);
    }
    if (spec.kind == "active-inference") {
        FrozenLakeModelConfig mc;
        mc.rows = lake.rows;
        mc.cols = lake.cols;
        mc.start = lake.start;
        mc.goal_of_context = lake.goal_of_context;
        mc.hole_of_context = lake.hole_of_context;
        mc.horizon = lake.horizon;
        mc.learn_a = spec.learn_a;
        mc.learn_c = spec.learn_c;
        if (spec.null_preferences) {
            mc.pref_positive = mc.pref_negative = mc.pref_neutral = 0.0;
        }
        if (spec.prefs_from_rewards) {
            const std::vector<double> p = preferences_from_rewards(
                {lake.reward_goal, lake.reward_hole, lake.reward_step});
            mc.pref_positive = p[0];
            mc.pref_negative = p[1];
            mc.pref_neutral = p[2];
        }
        return std::make_unique<ActiveInferenceAgent>(build_frozenlake_model(mc),
                                                      spec.ai, spec.id);
    }
    throw ModelError("unknown agent kind: " + spec.kind);
}

std::vector<AgentSpec> table1_roster(const RunConfig& cfg) {
    std::vector<AgentSpec> roster;

    AgentSpec q_fixed;
    q_fixed.id = "q-eps-0.1";
    q_fixed.kind = "q";
    q_fixed.q.epsilon = 0.1;
    q_fixed.q.init_from_rewards = false;
    q_fixed.q.init_noise = 1e-12;
    roster.push_back(q_fixed);

    AgentSpec q_decay;
    q_decay.id = "q-decay";
    q_decay.kind = "q";
    q_decay.q.decay_episodes = -1; // decay across the whole run
    q_decay.q.init_from_rewards = false;
    q_decay.q.init_noise = 1e-12;
    roster.push_back(q_decay);

    AgentSpec brl;
    brl.id = "bayes-rl";
    brl.kind = "bayes-rl";
    brl.brl.samples = 1;
    brl.brl.count_window = 80.0;
    roster.push_back(brl);

    AgentSpec ai;
    ai.id = "active-inference";
    ai.kind = "active-inference";
    ai.ai.beta_prior = cfg.ai_beta_prior;
    roster.push_back(ai);

    AgentSpec null;
    null.id = "ai-null";
    null.kind = "active-inference";
    null.null_preferences = true;
    null.ai.beta_prior = cfg.ai_beta_prior;
    null.ai.carry_context = false;
    roster.push_back(null);

    return roster;
}

namespace {

TrialSeries run_one_trial(const AgentSpec& spec, const LakeConfig& lake, int episodes,
                          std::uint64_t seed, int agent_index, int trial) {
    FrozenLakeEnv env(lake);
    std::unique_ptr<Agent> agent = make_agent(spec, lake, episodes);
    agent->begin_trial();
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(agent_index),
                          static_cast<std::uint64_t>(trial));
    TrialSeries series;
    series.score.reserve(episodes);
    series.moves.reserve(episodes);
    for (int ep = 1; ep <= episodes; ++ep) {
        const AgentTrace t = agent->run_episode(env, rng, ep);
        series.score.push_back(t.score);
        series.moves.push_back(static_cast<double>(t.moves));
    }
    return series;
}

} // namespace

std::vector<TrialSeries> run_trials(const AgentSpec& spec, const LakeConfig& lake,
                                    int trials, int episodes, std::uint64_t seed,
                                    int agent_index, int jobs) {
    if (trials < 1 || episodes < 1) throw ModelError("trials and episodes must be >= 1");
    if (jobs <= 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, trials);

    std::vector<TrialSeries> out(trials);
    if (jobs == 1) {
        for (int t = 0; t < trials; ++t) {
            out[t] = run_one_trial(spec, lake, episodes, seed, agent_index, t);
        }
        return out;
    }

    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        int t;
        while ((t = next.fetch_add(1)) < trials) {
            try {
                out[t] = run_one_trial(spec, lake, episodes, seed, agent_index, t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

Aggregate aggregate(const std::vector<TrialSeries>& trials) {
    if (trials.empty() || trials.front().score.empty()) {
        throw ModelError("aggregate: empty input");
    }
    const int n_trials = static_cast<int>(trials.size());
    const int episodes = static_cast<int>(trials.front().score.size());

    Aggregate agg;
    std::vector<double> trial_means(n_trials, 0.0);
    double moves_total = 0.0;
    agg.curve.assign(episodes, 0.0);
    for (int t = 0; t < n_trials; ++t) {
        double sum = 0.0;
        for (int e = 0; e < episodes; ++e) {
            sum += trials[t].score[e];
            agg.curve[e] += trials[t].score[e];
            moves_total += trials[t].moves[e];
        }
        trial_means[t] = sum / episodes;
    }
    for (double& x : agg.curve) x /= n_trials;

    double mean = 0.0;
    for (double m : trial_means) mean += m;
    mean /= n_trials;
    double var = 0.0;
    for (double m : trial_means) var += (m - mean) * (m - mean);
    const double sd = n_trials > 1 ? std::sqrt(var / (n_trials - 1)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(static_cast<double>(n_trials));

    agg.mean_score = mean;
    agg.ci_lo = mean - half;
    agg.ci_hi = mean + half;
    agg.mean_moves = moves_total / (static_cast<double>(n_trials) * episodes);
    return agg;
}

ExperimentReport run_table1(const RunConfig& cfg, bool nonstationary) {
    const LakeConfig lake = nonstationary ? LakeConfig::nonstationary() : LakeConfig{};
    ExperimentReport report;
    report.experiment = nonstationary ? "table1-nonstationary" : "table1-stationary";
    report.seed = cfg.seed;
    report.trials = cfg.trials;
    report.episodes = cfg.episodes;
    for (const auto& [ep, ctx] : lake.context_switches) report.switch_episodes.push_back(ep);

    const std::vector<AgentSpec> roster = table1_roster(cfg);
    for (std::size_t i = 0; i < roster.size(); ++i) {
        const auto series = run_trials(roster[i], lake, cfg.trials, cfg.episodes,
                                       cfg.seed, static_cast<int>(i), cfg.jobs);
        const Aggregate agg = aggregate(series);
        report.cells.push_back({roster[i].id, "", agg.mean_score, agg.ci_lo,
                                agg.ci_hi, agg.mean_moves});
        report.curves.emplace_back(roster[i].id, agg.curve);
    }
    return report;
}

ExperimentReport run_table2(const RunConfig& cfg) {
    ExperimentReport report;
    report.experiment = "table2";
    report.seed = cfg.seed;
    report.trials = cfg.trials;
    report.episodes = cfg.episodes;

    std::vector<AgentSpec> roster;
    AgentSpec q;
    q.id = "q-eps-0";
    q.kind = "q";
    q.q.epsilon = 0.0;
    roster.push_back(q);
    AgentSpec brl;
    brl.id = "bayes-rl";
    brl.kind = "bayes-rl";
    brl.brl.samples = 1;
    roster.push_back(brl);
    AgentSpec ai;
    ai.id = "active-inference";
    ai.kind = "active-inference";
    ai.prefs_from_rewards = true;
    ai.ai.beta_prior = cfg.ai_beta_prior;
    roster.push_back(ai);

    const std::vector<ShapingRow> rows = table2_rows();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        LakeConfig lake;
        lake.reward_goal = rows[r].reward_goal;
        lake.reward_hole = rows[r].reward_hole;
        lake.reward_step = rows[r].reward_step;
        for (std::size_t i = 0; i < roster.size(); ++i) {
            const int agent_index = static_cast<int>(r * roster.size() + i);
            const auto series = run_trials(roster[i], lake, cfg.trials, cfg.episodes,
                                           cfg.seed, agent_index, cfg.jobs);
            const Aggregate agg = aggregate(series);
            report.cells.push_back({roster[i].id, rows[r].label(), agg.mean_score,
                                    agg.ci_lo, agg.ci_hi, agg.mean_moves});
        }
    }
    return report;
}

namespace {

void dump_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << m(r, c);
        }
        out << '\n';
    }
}

bool no_repeated_positions(const std::vector<int>& path) {
    std::set<int> seen;
    for (int p : path) {
        if (!seen.insert(p).second) return false;
    }
    return true;
}

} // namespace

PrefsOutcome run_preference_learning(const RunConfig& cfg) {
    const LakeConfig lake; // stationary
    const int episodes = cfg.episodes;
    PrefsOutcome out;

    const bool dump = !cfg.out_dir.empty();
    std::filesystem::path counts_dir;
    if (dump) {
        counts_dir = std::filesystem::path(cfg.out_dir) / "counts";
        std::filesystem::create_directories(counts_dir);
    }

    auto prefs_spec = [&](bool learn_a, bool learn_c, const std::string& id) {
        AgentSpec s;
        s.id = id;
        s.kind = "active-inference";
        s.learn_a = learn_a;
        s.learn_c = learn_c;
        s.null_preferences = true; // flat C; any drive comes from learning
        s.ai.beta_prior = cfg.ai_beta_prior;
        s.ai.sample_actions = false;
        s.ai.online_learning = true;
        return s;
    };

    // Likelihood learning only: novelty-driven exploration.
    const AgentSpec lk = prefs_spec(true, false, "learn-likelihood");
    out.likelihood_runs = 15;
    for (int run = 0; run < out.likelihood_runs; ++run) {
        FrozenLakeEnv env(lake);
        auto agent = make_agent(lk, lake, episodes);
        auto* ai = static_cast<ActiveInferenceAgent*>(agent.get());
        agent->begin_trial();
        Rng rng = Rng::stream(cfg.seed, 100, static_cast<std::uint64_t>(run));
        for (int ep = 1; ep <= episodes; ++ep) {
            const AgentTrace t = agent->run_episode(env, rng, ep);
            if (ep == 1) {
                out.first_episode_paths.push_back(t.positions);
                if (no_repeated_positions(t.positions)) ++out.likelihood_no_revisit_runs;
            }
            if (dump && run == 0) {
                dump_matrix_csv(ai->model().counts.a[0],
                                (counts_dir / ("likelihood_a-pos_ep" + std::to_string(ep) + ".csv")).string());
            }
        }
    }

    // Preference learning only: the first captured absorbing outcome should
    // come to dominate the learned preferences.
    const AgentSpec pf = prefs_spec(false, true, "learn-preferences");
    out.pref_runs = 10;
    for (int run = 0; run < out.pref_runs; ++run) {
        FrozenLakeEnv env(lake);
        auto agent = make_agent(pf, lake, episodes);
        auto* ai = static_cast<ActiveInferenceAgent*>(agent.get());
        agent->begin_trial();
        Rng rng = Rng::stream(cfg.seed, 200, static_cast<std::uint64_t>(run));
        int first_outcome = -1, first_tau = -1;
        bool dominant = false;
        for (int ep = 1; ep <= episodes; ++ep) {
            const AgentTrace t = agent->run_episode(env, rng, ep);
            if (first_outcome < 0 && t.score_outcomes.back() != kScoreNeutral) {
                first_outcome = t.score_outcomes.back();
                first_tau = static_cast<int>(t.positions.size()) - 1; // 0-based column
            }
            if (first_outcome >= 0 && ep <= 10 && !dominant) {
                const Matrix& c = ai->model().C.log_pref[1];
                const int col = std::min(first_tau, c.cols() - 1);
                bool best = true;
                for (int i = 0; i < c.rows(); ++i) {
                    if (i != first_outcome && c(i, col) >= c(first_outcome, col)) best = false;
                }
                dominant = best;
            }
            if (dump && run == 0) {
                dump_matrix_csv(ai->model().counts.c[1],
                                (counts_dir / ("preferences_c-score_ep" + std::to_string(ep) + ".csv")).string());
            }
        }
        if (dominant) ++out.pref_dominant_runs;
    }

    // Both distributions learned: behavior should lock onto the preferred
    // absorbing cell and go straight there.
    const AgentSpec both = prefs_spec(true, true, "learn-both");
    out.both_runs = 10;
    for (int run = 0; run < out.both_runs; ++run) {
        FrozenLakeEnv env(lake);
        auto agent = make_agent(both, lake, episodes);
        auto* ai = static_cast<ActiveInferenceAgent*>(agent.get());
        agent->begin_trial();
        Rng rng = Rng::stream(cfg.seed, 300, static_cast<std::uint64_t>(run));
        int target = -1;
        bool direct = true;
        for (int ep = 1; ep <= episodes; ++ep) {
            const AgentTrace t = agent->run_episode(env, rng, ep);
            if (ep >= 6) {
                const int last = t.positions.back();
                if (target < 0) target = last;
                const bool absorbed = t.score_outcomes.back() != kScoreNeutral;
                if (!absorbed || last != target || t.moves != 3) direct = false;
            }
            if (dump && run == 0) {
                dump_matrix_csv(ai->model().counts.a[0],
                                (counts_dir / ("both_a-pos_ep" + std::to_string(ep) + ".csv")).string());
                dump_matrix_csv(ai->model().counts.c[1],
                                (counts_dir / ("both_c-score_ep" + std::to_string(ep) + ".csv")).string());
            }
        }
        if (episodes >= 6 && direct) ++out.both_direct_runs;
    }

    return out;
}

} // namespace felab

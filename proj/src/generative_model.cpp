#include "felab/generative_model.hpp"

#include <algorithm>
#include <cmath>

namespace felab {

bool PreferenceModel::flat(int modality) const {
    const Matrix& m = log_pref[modality];
    for (int t = 0; t < m.cols(); ++t) {
        for (int o = 1; o < m.rows(); ++o) {
            if (std::abs(m(o, t) - m(0, t)) > 1e-12) return false;
        }
    }
    return true;
}

std::vector<double> PreferenceModel::preferred(int modality, int tau) const {
    auto col = log_pref[modality].col(tau);
    return softmax(col);
}

PolicySet PolicySet::enumerate(int num_actions, int depth) {
    PolicySet ps;
    ps.depth = depth;
    ps.num_actions = num_actions;
    int n = 1;
    for (int i = 0; i < depth; ++i) n *= num_actions;
    ps.seq.resize(n, std::vector<int>(depth));
    for (int p = 0; p < n; ++p) {
        int rem = p;
        for (int i = depth - 1; i >= 0; --i) {
            ps.seq[p][i] = rem % num_actions;
            rem /= num_actions;
        }
    }
    ps.active.assign(n, 1);
    return ps;
}

void PolicySet::reset_active() {
    std::fill(active.begin(), active.end(), 1);
}

int PolicySet::num_active() const {
    int n = 0;
    for (char a : active) n += a;
    return n;
}

void GenerativeModel::validate() const {
    for (std::size_t m = 0; m < A.size(); ++m) {
        for (int c = 0; c < A[m].cols(); ++c) {
            double sum = 0.0;
            for (double v : A[m].col(c)) {
                if (v < 0.0) throw ModelError("A[" + std::to_string(m) + "]: negative entry, column " + std::to_string(c));
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-10)
                throw ModelError("A[" + std::to_string(m) + "]: column " + std::to_string(c) + " not normalized");
        }
    }
    for (std::size_t u = 0; u < B.size(); ++u) {
        for (int c = 0; c < B[u].cols(); ++c) {
            double sum = 0.0;
            for (double v : B[u].col(c)) sum += v;
            if (std::abs(sum - 1.0) > 1e-10)
                throw ModelError("B[" + std::to_string(u) + "]: column " + std::to_string(c) + " not normalized");
        }
    }
    for (std::size_t f = 0; f < D.size(); ++f) {
        double sum = 0.0;
        for (double v : D[f]) sum += v;
        if (std::abs(sum - 1.0) > 1e-10) throw ModelError("D[" + std::to_string(f) + "] not normalized");
    }
    for (const auto& m : C.log_pref) {
        for (double v : m.data()) {
            if (!std::isfinite(v)) throw ModelError("C contains non-finite entries");
        }
    }
    if (policies.num_active() < 1) throw ModelError("policy set has no active policy");
}

void GenerativeModel::refresh_expected_likelihood() {
    for (std::size_t m = 0; m < counts.a.size(); ++m) {
        A[m] = normalize_counts(counts.a[m], "a[" + std::to_string(m) + "]");
    }
}

int move_location(int loc0, Action a, int rows, int cols) {
    int r = loc0 / cols, c = loc0 % cols;
    switch (a) {
        case Action::Left: c -= 1; break;
        case Action::Right: c += 1; break;
        case Action::Down: r += 1; break;
        case Action::Up: r -= 1; break;
    }
    if (r < 0 || r >= rows || c < 0 || c >= cols) return loc0;
    return r * cols + c;
}

GenerativeModel build_frozenlake_model(const FrozenLakeModelConfig& cfg) {
    if (cfg.rows < 1 || cfg.cols < 1) throw ModelError("invalid grid geometry");
    const int n_loc = cfg.rows * cfg.cols;
    const int n_ctx = static_cast<int>(cfg.goal_of_context.size());
    if (n_ctx == 0 || cfg.hole_of_context.size() != static_cast<std::size_t>(n_ctx))
        throw ModelError("goal/hole context maps must have equal, nonzero size");
    for (int k = 0; k < n_ctx; ++k) {
        if (cfg.goal_of_context[k] < 1 || cfg.goal_of_context[k] > n_loc ||
            cfg.hole_of_context[k] < 1 || cfg.hole_of_context[k] > n_loc)
            throw ModelError("goal/hole location out of grid for context " + std::to_string(k + 1));
    }

    GenerativeModel g;
    g.states = StateSpace({{"location", n_loc}, {"context", n_ctx}});
    g.horizon = cfg.horizon;
    const int n_joint = g.states.joint_size();

    // Likelihood counts. Position: identity over location, context-blind.
    // Score: goal -> positive, hole -> negative, otherwise neutral.
    Matrix a_pos(n_loc, n_joint, cfg.base_count);
    Matrix a_score(kNumScoreOutcomes, n_joint, cfg.base_count);
    for (int j = 0; j < n_joint; ++j) {
        auto idx = g.states.from_joint(j);
        const int loc = idx[0], ctx = idx[1];
        a_pos(loc, j) += cfg.concentration;
        int score = kScoreNeutral;
        if (loc == cfg.goal_of_context[ctx] - 1) score = kScorePositive;
        else if (loc == cfg.hole_of_context[ctx] - 1) score = kScoreNegative;
        a_score(score, j) += cfg.concentration;
    }
    if (cfg.learn_a) {
        // Flat hyper-prior: the agent starts ignorant of both mappings.
        a_pos = Matrix(n_loc, n_joint, cfg.a_init);
        a_score = Matrix(kNumScoreOutcomes, n_joint, cfg.a_init);
        g.counts.learn_a = true;
    }
    g.counts.a = {a_pos, a_score};
    g.A = {normalize_counts(a_pos, "A[position]"), normalize_counts(a_score, "A[score]")};

    // Absorbing cells: any location that is a goal or hole in some context.
    std::vector<char> absorbing(n_loc, 0);
    for (int k = 0; k < n_ctx; ++k) {
        absorbing[cfg.goal_of_context[k] - 1] = 1;
        absorbing[cfg.hole_of_context[k] - 1] = 1;
    }

    // Deterministic transitions; context factor is identity.
    g.B.assign(kNumActions, Matrix(n_joint, n_joint, 0.0));
    for (int u = 0; u < kNumActions; ++u) {
        for (int j = 0; j < n_joint; ++j) {
            auto idx = g.states.from_joint(j);
            int next_loc = absorbing[idx[0]] ? idx[0]
                                             : move_location(idx[0], static_cast<Action>(u), cfg.rows, cfg.cols);
            int idx2[2] = {next_loc, idx[1]};
            g.B[u](g.states.to_joint(idx2), j) = 1.0;
        }
    }

    // Preferences: flat over position; configured nats over score, broadcast
    // over timesteps.
    const double floor = -32.0;
    Matrix c_pos(n_loc, cfg.horizon, 0.0);
    Matrix c_score(kNumScoreOutcomes, cfg.horizon, 0.0);
    for (int t = 0; t < cfg.horizon; ++t) {
        c_score(kScorePositive, t) = std::max(cfg.pref_positive, floor);
        c_score(kScoreNegative, t) = std::max(cfg.pref_negative, floor);
        c_score(kScoreNeutral, t) = std::max(cfg.pref_neutral, floor);
    }
    g.C.log_pref = {c_pos, c_score};
    g.C.floor = floor;
    if (cfg.learn_c) {
        g.counts.learn_c = true;
        g.counts.c = {Matrix(n_loc, cfg.horizon, cfg.c_init),
                      Matrix(kNumScoreOutcomes, cfg.horizon, cfg.c_init)};
        // Learned preferences replace any configured ones.
        g.C.log_pref = {Matrix(n_loc, cfg.horizon, 0.0), Matrix(kNumScoreOutcomes, cfg.horizon, 0.0)};
    }

    if (cfg.start < 1 || cfg.start > n_loc) throw ModelError("start location out of grid");
    std::vector<double> d_loc(n_loc, 0.0);
    d_loc[cfg.start - 1] = 1.0;
    std::vector<double> d_ctx(n_ctx, 1.0 / n_ctx);
    g.D = {d_loc, d_ctx};

    g.policies = PolicySet::enumerate(kNumActions, cfg.policy_depth);
    g.validate();
    return g;
}

std::vector<double> preferences_from_rewards(const std::vector<double>& rewards, double scale) {
    std::vector<double> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        const double r = rewards[i];
        const double mag = scale * std::log1p(std::abs(r));
        out[i] = r >= 0.0 ? mag : -mag;
    }
    return out;
}

} // namespace felab

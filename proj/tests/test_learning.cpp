#include <cmath>
#include <vector>

#include "doctest.h"
#include "felab/generative_model.hpp"
#include "felab/harness.hpp"
#include "felab/inference.hpp"
#include "felab/learning.hpp"

using namespace felab;

namespace {

DirichletCounts flat_counts(int n_out, int n_states, int horizon) {
    DirichletCounts c;
    c.learn_a = true;
    c.a = {Matrix(n_out, n_states, 1.0)};
    c.learn_c = true;
    c.c = {Matrix(n_out, horizon, 1.0)};
    return c;
}

} // namespace

TEST_CASE("likelihood accumulation adds eta at the observed outcome-state cell") {
    DirichletCounts c = flat_counts(4, 5, 6);
    const std::vector<double> s{0.0, 0.0, 0.0, 1.0, 0.0}; // one-hot state 3
    accumulate_likelihood(c, {2}, s, 1.0);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 5; ++j) {
            const double expect = (i == 2 && j == 3) ? 2.0 : 1.0;
            CHECK(c.a[0](i, j) == doctest::Approx(expect));
        }
    }
}

TEST_CASE("likelihood accumulation is belief-weighted and eta-scaled") {
    DirichletCounts c = flat_counts(2, 2, 4);
    const std::vector<double> s{0.25, 0.75};
    accumulate_likelihood(c, {0}, s, 2.0);
    CHECK(c.a[0](0, 0) == doctest::Approx(1.5));
    CHECK(c.a[0](0, 1) == doctest::Approx(2.5));
    CHECK(c.a[0](1, 0) == doctest::Approx(1.0));
}

TEST_CASE("zero learning rate leaves counts unchanged") {
    DirichletCounts c = flat_counts(3, 3, 4);
    const DirichletCounts before = c;
    accumulate_likelihood(c, {1}, std::vector<double>{1.0, 0.0, 0.0}, 0.0);
    accumulate_preferences(c, {1}, 2, 0.0);
    for (std::size_t k = 0; k < c.a[0].data().size(); ++k)
        CHECK(c.a[0].data()[k] == before.a[0].data()[k]);
    for (std::size_t k = 0; k < c.c[0].data().size(); ++k)
        CHECK(c.c[0].data()[k] == before.c[0].data()[k]);
}

TEST_CASE("an unobserved modality is skipped") {
    DirichletCounts c = flat_counts(3, 3, 4);
    accumulate_likelihood(c, {-1}, std::vector<double>{1.0, 0.0, 0.0}, 1.0);
    accumulate_preferences(c, {-1}, 1, 1.0);
    for (double v : c.a[0].data()) CHECK(v == doctest::Approx(1.0));
    for (double v : c.c[0].data()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("one preference observation tilts the learned column") {
    DirichletCounts c = flat_counts(3, 6, 6);
    accumulate_preferences(c, {0}, 4, 1.0); // positive outcome at column 4
    PreferenceModel prefs;
    prefs.log_pref = {Matrix(3, 6, 0.0)};
    refresh_preferences(prefs, c);
    const auto p4 = prefs.preferred(0, 4);
    CHECK(p4[0] > p4[1]);
    CHECK(p4[0] > p4[2]);
    CHECK(p4[0] == doctest::Approx(0.5)); // counts (2,1,1)
    // Other columns stay flat.
    const auto p1 = prefs.preferred(0, 1);
    for (double v : p1) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("repeated captures grow the same preference monotonically") {
    DirichletCounts c = flat_counts(3, 6, 6);
    PreferenceModel prefs;
    prefs.log_pref = {Matrix(3, 6, 0.0)};
    double last = -1.0;
    for (int ep = 0; ep < 10; ++ep) {
        accumulate_preferences(c, {kScoreNegative}, 3, 1.0);
        refresh_preferences(prefs, c);
        const double p = prefs.preferred(0, 3)[kScoreNegative];
        CHECK(p > last);
        last = p;
        // Normalized after every update.
        double sum = 0.0;
        for (double v : prefs.preferred(0, 3)) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(last > 0.8); // strict preference after ten captures
}

TEST_CASE("drift_toward_uniform leaks belief mass without losing normalization") {
    const std::vector<double> carried{0.9, 0.1};
    const auto drifted = drift_toward_uniform(carried, 0.05);
    CHECK(drifted[0] == doctest::Approx(0.95 * 0.9 + 0.05 * 0.5));
    CHECK(drifted[0] + drifted[1] == doctest::Approx(1.0).epsilon(1e-12));
    // Zero drift is the identity.
    const auto same = drift_toward_uniform(carried, 0.0);
    CHECK(same[0] == doctest::Approx(0.9));
}

TEST_CASE("dirichlet counts never decrease across learning episodes") {
    AgentSpec spec;
    spec.id = "learner";
    spec.kind = "active-inference";
    spec.learn_a = true;
    spec.learn_c = true;
    spec.null_preferences = true;
    spec.ai.online_learning = true;
    spec.ai.sample_actions = false;
    LakeConfig lake;
    auto agent = make_agent(spec, lake, 6);
    auto* ai = static_cast<ActiveInferenceAgent*>(agent.get());
    agent->begin_trial();
    FrozenLakeEnv env(lake);
    Rng rng(4);
    std::vector<Matrix> prev_a = ai->model().counts.a;
    std::vector<Matrix> prev_c = ai->model().counts.c;
    for (int ep = 1; ep <= 6; ++ep) {
        agent->run_episode(env, rng, ep);
        const auto& cnt = ai->model().counts;
        for (std::size_t m = 0; m < cnt.a.size(); ++m)
            for (std::size_t k = 0; k < cnt.a[m].data().size(); ++k)
                CHECK(cnt.a[m].data()[k] >= prev_a[m].data()[k] - 1e-12);
        for (std::size_t m = 0; m < cnt.c.size(); ++m)
            for (std::size_t k = 0; k < cnt.c[m].data().size(); ++k)
                CHECK(cnt.c[m].data()[k] >= prev_c[m].data()[k] - 1e-12);
        prev_a = cnt.a;
        prev_c = cnt.c;
    }
}

TEST_CASE("context posterior carries across episodes, location resets to start") {
    AgentSpec spec;
    spec.id = "carrier";
    spec.kind = "active-inference";
    spec.ai.sample_actions = false;
    spec.ai.context_drift = 0.0;
    LakeConfig lake;
    lake.initial_context = 1;
    auto agent = make_agent(spec, lake, 4);
    auto* ai = static_cast<ActiveInferenceAgent*>(agent.get());
    agent->begin_trial();
    // First episode starts from the uniform context prior.
    CHECK(ai->context_belief()[0] == doctest::Approx(0.5));
    FrozenLakeEnv env(lake);
    Rng rng(2);
    const AgentTrace t = agent->run_episode(env, rng, 1);
    CHECK(t.positions.front() == 1); // location resets to the start cell
    // After one successful episode the context is essentially resolved.
    CHECK(ai->context_belief()[0] > 0.95);
}

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "felab/harness.hpp"

namespace {

using felab::RunConfig;

void add_common(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--trials", cfg.trials, "Independent trials");
    cmd->add_option("--episodes", cfg.episodes, "Episodes per trial");
    cmd->add_option("--seed", cfg.seed, "Master RNG seed");
    cmd->add_option("--jobs", cfg.jobs, "Worker threads (0 = hardware)");
    cmd->add_option("--out", cfg.out_dir, "Output directory");
    cmd->add_option("--beta-prior", cfg.ai_beta_prior, "Prior on inverse precision");
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("schema_version", 0) != 1) {
        throw CLI::ValidationError("--config", "unsupported schema_version (expected 1)");
    }
    RunConfig cfg;
    cfg.experiment = j.value("experiment", cfg.experiment);
    cfg.trials = j.value("trials", cfg.trials);
    cfg.episodes = j.value("episodes", cfg.episodes);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.ai_beta_prior = j.value("beta_prior", cfg.ai_beta_prior);
    return cfg;
}

int run_experiment(const RunConfig& cfg) {
    if (cfg.experiment == "table1-stationary" || cfg.experiment == "table1-nonstationary") {
        const auto report = felab::run_table1(cfg, cfg.experiment == "table1-nonstationary");
        felab::emit_report(report, cfg.out_dir);
    } else if (cfg.experiment == "table2") {
        const auto report = felab::run_table2(cfg);
        felab::emit_report(report, cfg.out_dir);
    } else if (cfg.experiment == "prefs") {
        const auto out = felab::run_preference_learning(cfg);
        std::cout << "likelihood-only no-revisit runs: " << out.likelihood_no_revisit_runs
                  << "/" << out.likelihood_runs << "\n"
                  << "preferences-only dominant runs:  " << out.pref_dominant_runs << "/"
                  << out.pref_runs << "\n"
                  << "learn-both direct runs:          " << out.both_direct_runs << "/"
                  << out.both_runs << "\n";
        return 0;
    } else {
        std::cerr << "unknown experiment: " << cfg.experiment << "\n";
        return 1;
    }
    std::cout << "report written to " << cfg.out_dir << "\n";
    return 0;
}

void dump_model(bool learn) {
    felab::FrozenLakeModelConfig mc;
    mc.learn_a = learn;
    mc.learn_c = learn;
    const felab::GenerativeModel g = felab::build_frozenlake_model(mc);

    auto matrix_json = [](const felab::Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (int r = 0; r < m.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(row);
        }
        return rows;
    };

    nlohmann::json j;
    j["state_factors"] = nlohmann::json::array();
    for (int f = 0; f < g.states.num_factors(); ++f) {
        j["state_factors"].push_back(
            {{"name", g.states.factor(f).name}, {"size", g.states.factor(f).size}});
    }
    j["A"] = nlohmann::json::array();
    for (const auto& a : g.A) j["A"].push_back(matrix_json(a));
    j["B"] = nlohmann::json::array();
    for (const auto& b : g.B) j["B"].push_back(matrix_json(b));
    j["C"] = nlohmann::json::array();
    for (const auto& c : g.C.log_pref) j["C"].push_back(matrix_json(c));
    j["D"] = g.D;
    j["horizon"] = g.horizon;
    j["policy_depth"] = g.policies.depth;
    std::cout << j.dump(2) << "\n";
}

void render_env(int context) {
    felab::LakeConfig cfg;
    cfg.initial_context = context;
    felab::FrozenLakeEnv env(cfg);
    std::cout << "context " << context << " (G at " << env.goal_position() << ", H at "
              << env.hole_position() << ")\n";
    for (int r = 0; r < cfg.rows; ++r) {
        for (int c = 0; c < cfg.cols; ++c) {
            const int pos = r * cfg.cols + c + 1;
            char glyph = 'F';
            if (pos == cfg.start) glyph = 'S';
            if (pos == env.goal_position()) glyph = 'G';
            if (pos == env.hole_position()) glyph = 'H';
            std::cout << glyph << (c + 1 < cfg.cols ? ' ' : '\n');
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FrozenLake planning-agent laboratory"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    CLI::App* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--seed", cfg.seed, "Override the config seed");
    run->add_option("--jobs", cfg.jobs, "Override the config parallelism");
    run->add_option("--out", cfg.out_dir, "Override the output directory");

    RunConfig t1 = cfg;
    CLI::App* table1 = app.add_subcommand("table1", "Five-agent navigation comparison");
    bool nonstationary = false;
    table1->add_flag("--nonstationary", nonstationary, "Use the context-switch schedule");
    add_common(table1, t1);

    RunConfig t2 = cfg;
    t2.trials = 100;
    t2.episodes = 100;
    CLI::App* table2 = app.add_subcommand("table2", "Reward-shaping comparison");
    add_common(table2, t2);

    RunConfig pr = cfg;
    pr.trials = 1;
    pr.episodes = 10;
    CLI::App* prefs = app.add_subcommand("prefs", "Likelihood/preference learning runs");
    add_common(prefs, pr);

    CLI::App* model = app.add_subcommand("model", "Model utilities");
    CLI::App* model_dump = model->add_subcommand("dump", "Print expanded A/B/C/D as JSON");
    bool dump_learn = false;
    model_dump->add_flag("--learn", dump_learn, "Dump the learning-enabled variant");

    CLI::App* env = app.add_subcommand("env", "Environment utilities");
    CLI::App* env_render = env->add_subcommand("render", "Print the ASCII grid");
    int context = 2;
    env_render->add_option("--context", context, "Context (1 or 2)")->check(CLI::Range(1, 2));

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            RunConfig loaded = load_config(config_path);
            for (const auto* opt : {run->get_option("--seed")}) {
                if (opt->count()) loaded.seed = cfg.seed;
            }
            if (run->get_option("--jobs")->count()) loaded.jobs = cfg.jobs;
            if (run->get_option("--out")->count()) loaded.out_dir = cfg.out_dir;
            return run_experiment(loaded);
        }
        if (table1->parsed()) {
            t1.experiment = nonstationary ? "table1-nonstationary" : "table1-stationary";
            return run_experiment(t1);
        }
        if (table2->parsed()) {
            t2.experiment = "table2";
            return run_experiment(t2);
        }
        if (prefs->parsed()) {
            pr.experiment = "prefs";
            return run_experiment(pr);
        }
        if (model->parsed() && model_dump->parsed()) {
            dump_model(dump_learn);
            return 0;
        }
        if (env->parsed() && env_render->parsed()) {
            render_env(context);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "missing subcommand\n";
    return 1;
}

// Command-line front end: train / eval / ablate / bound / compare.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seqcomm/analysis.hpp"
#include "seqcomm/checkpoint.hpp"
#include "seqcomm/config.hpp"
#include "seqcomm/trainer.hpp"

namespace fs = std::filesystem;
using namespace seqcomm;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string mode;
    std::string out;
    int64_t seed = -1;
    int64_t steps = -1;
};

cli::ExperimentConfig load_with_overrides(const CommonArgs& args) {
    cli::ExperimentConfig cfg = cli::load_config(args.config_path);
    if (!args.mode.empty()) {
        cfg.mode = train::mode_from_name(args.mode);
        if (args.mode.rfind("fixed:", 0) == 0) {
            cfg.fixed_order.clear();
            std::string spec = args.mode.substr(6);
            size_t pos = 0;
            while (pos < spec.size()) {
                size_t dash = spec.find('-', pos);
                cfg.fixed_order.push_back(std::stoi(spec.substr(pos, dash - pos)));
                if (dash == std::string::npos) break;
                pos = dash + 1;
            }
        }
    }
    if (args.seed >= 0) cfg.seeds = {static_cast<uint64_t>(args.seed)};
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (args.steps > 0) cfg.ppo.total_steps = args.steps;
    // Environment may override seed and output directory only.
    if (const char* s = std::getenv("SEQCOMM_SEED"); s && args.seed < 0)
        cfg.seeds = {static_cast<uint64_t>(std::stoull(s))};
    if (const char* o = std::getenv("SEQCOMM_OUT"); o && args.out.empty()) cfg.out_dir = o;
    return cfg;
}

std::string seed_stem(const cli::ExperimentConfig& cfg, uint64_t seed) {
    return cfg.out_dir + "/" + cfg.run_id + "_" + train::mode_name(cfg.mode) + "_seed" +
           std::to_string(seed);
}

// Runs one seed to completion; returns the final evaluation return.
double run_one_seed(const cli::ExperimentConfig& cfg, uint64_t seed, bool write_files) {
    auto trainer = train::Trainer(cli::make_env(cfg.env), cfg.mode, cfg.fixed_order, cfg.ppo,
                                  seed, cfg.run_id);
    std::ofstream metrics;
    if (write_files) {
        fs::create_directories(cfg.out_dir);
        metrics.open(seed_stem(cfg, seed) + ".metrics.jsonl", std::ios::app);
    }
    auto result = trainer.run([&](const train::MetricsRecord& rec) {
        if (metrics.is_open()) metrics << rec.to_json() << "\n" << std::flush;
    });
    if (write_files) cli::save_checkpoint(trainer.networks(), seed_stem(cfg, seed) + ".ckpt");
    return result.eval_returns.back();
}

int cmd_train(const CommonArgs& args) {
    cli::ExperimentConfig cfg = load_with_overrides(args);
    for (uint64_t seed : cfg.seeds) {
        double final_ret = run_one_seed(cfg, seed, true);
        std::cout << "trained seed=" << seed << " mode=" << train::mode_name(cfg.mode)
                  << " final_eval_return=" << final_ret << "\n";
    }
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt, int episodes) {
    cli::ExperimentConfig cfg = load_with_overrides(args);
    cfg.ppo.eval_episodes = episodes;
    train::Trainer trainer(cli::make_env(cfg.env), cfg.mode, cfg.fixed_order, cfg.ppo,
                           cfg.seeds.front(), cfg.run_id);
    cli::load_checkpoint(trainer.networks(), ckpt);
    std::cout << "mean_eval_return=" << trainer.evaluate() << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args, const std::vector<std::string>& modes) {
    if (modes.size() < 2) throw std::invalid_argument("ablate: need at least two modes");
    if (std::set<std::string>(modes.begin(), modes.end()).size() != modes.size())
        throw std::invalid_argument("ablate: duplicate mode entries");
    cli::ExperimentConfig base = load_with_overrides(args);
    fs::create_directories(base.out_dir);
    std::ofstream csv(base.out_dir + "/ablation.csv");
    csv << "mode,mean,std,n_seeds\n";
    std::cout << "mode,mean,std,n_seeds\n";
    for (const auto& mode : modes) {
        CommonArgs per = args;
        per.mode = mode;
        cli::ExperimentConfig cfg = load_with_overrides(per);
        std::vector<double> finals;
        for (uint64_t seed : cfg.seeds) finals.push_back(run_one_seed(cfg, seed, true));
        double mean = 0.0;
        for (double v : finals) mean += v;
        mean /= finals.size();
        double var = 0.0;
        for (double v : finals) var += (v - mean) * (v - mean);
        double sd = std::sqrt(var / finals.size());
        csv << mode << "," << mean << "," << sd << "," << finals.size() << "\n";
        std::cout << mode << "," << mean << "," << sd << "," << finals.size() << "\n";
    }
    return 0;
}

int cmd_bound(const CommonArgs& args, const std::string& old_ckpt, const std::string& new_ckpt,
              int probe_steps) {
    cli::ExperimentConfig cfg = load_with_overrides(args);
    train::Trainer helper(cli::make_env(cfg.env), cfg.mode, cfg.fixed_order, cfg.ppo,
                          cfg.seeds.front(), cfg.run_id);
    nn::NetConfig nc;
    auto env = cli::make_env(cfg.env);
    nc.obs_width = env->obs_width();
    nc.n_actions = env->n_actions();
    nn::Networks old_nets(nc), new_nets(nc);
    cli::load_checkpoint(old_nets, old_ckpt);
    cli::load_checkpoint(new_nets, new_ckpt);

    // Probe batch: real transitions collected with the new policy under
    // per-timestep random orders.
    std::vector<analysis::ProbeSample> probe;
    std::mt19937_64 rng(cfg.seeds.front());
    double r_max = 1e-9;
    auto obs = env->reset(rng());
    int n = env->n_agents();
    while (static_cast<int>(probe.size()) < probe_steps) {
        std::vector<nn::Tensor> h;
        for (int i = 0; i < n; ++i)
            h.push_back(nn::encode(nullptr, new_nets, nn::Tensor::vec(obs[i])));
        proto::OrderSequence order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        auto launch = proto::launching_step(new_nets, order, h, proto::ActionMode::Sample, rng);
        auto sr = env->step(launch.actions);
        analysis::ProbeSample s;
        s.joint_obs = obs;
        s.joint_actions = launch.actions;
        s.order = order;
        s.next_joint_obs = sr.observations;
        s.reward = sr.reward;
        probe.push_back(std::move(s));
        r_max = std::max(r_max, std::abs(sr.reward));
        obs = sr.done ? env->reset(rng()) : sr.observations;
    }
    auto inputs = analysis::estimate_divergences(old_nets, new_nets, probe, cfg.ppo.gamma, r_max);
    nlohmann::ordered_json j;
    j["epsilon_m"] = inputs.epsilon_m;
    j["epsilon_m_note"] = "MSE-based proxy, not a true total-variation bound";
    j["epsilon_pi"] = inputs.epsilon_pi;
    j["gamma"] = inputs.gamma;
    j["r_max"] = inputs.r_max;
    j["bound_C"] = analysis::theorem_bound(inputs);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& inputs) {
    // Aligns metrics streams by env step count and emits mean/std per step.
    std::map<long, std::vector<double>> by_step;
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("compare: cannot open " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            by_step[j.at("env_steps").get<long>()].push_back(j.at("eval_return").get<double>());
        }
    }
    std::cout << "step,mean,std\n";
    for (const auto& [step, vals] : by_step) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        std::cout << step << "," << mean << "," << std::sqrt(var / vals.size()) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential-communication multi-agent RL trainer"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string ckpt, old_ckpt, new_ckpt;
    std::vector<std::string> modes, inputs;
    int episodes = 10;
    int probe_steps = 200;

    auto add_common = [&](CLI::App* sub, bool need_config = true) {
        auto* opt = sub->add_option("--config", args.config_path, "experiment config (JSON)");
        if (need_config) opt->required();
        sub->add_option("--seed", args.seed, "override the seed list with one seed");
        sub->add_option("--mode", args.mode, "ordering mode override");
        sub->add_option("--out", args.out, "output directory override");
        sub->add_option("--steps", args.steps, "total env step override");
    };

    auto* train_cmd = app.add_subcommand("train", "train one mode over the configured seeds");
    add_common(train_cmd);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--episodes", episodes, "evaluation episodes");
    auto* ablate_cmd = app.add_subcommand("ablate", "run several ordering modes and compare");
    add_common(ablate_cmd);
    ablate_cmd->add_option("--modes", modes, "ordering modes")->required()->delimiter(',');
    auto* bound_cmd = app.add_subcommand("bound", "model/policy divergence bound report");
    add_common(bound_cmd);
    bound_cmd->add_option("--old", old_ckpt, "pre-update checkpoint")->required();
    bound_cmd->add_option("--new", new_ckpt, "post-update checkpoint")->required();
    bound_cmd->add_option("--probe-steps", probe_steps, "probe batch size");
    auto* compare_cmd = app.add_subcommand("compare", "merge metrics streams into CSV");
    compare_cmd->add_option("--inputs", inputs, "metrics.jsonl files")->required()->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(args);
        if (eval_cmd->parsed()) return cmd_eval(args, ckpt, episodes);
        if (ablate_cmd->parsed()) return cmd_ablate(args, modes);
        if (bound_cmd->parsed()) return cmd_bound(args, old_ckpt, new_ckpt, probe_steps);
        if (compare_cmd->parsed()) return cmd_compare(inputs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "seqcomm/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace seqcomm::cli {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    check_keys(j, {"env", "mode", "fixed_order", "ppo", "H", "F", "seeds", "out_dir", "run_id"},
               "top level");
    if (j.contains("env")) {
        const auto& je = j.at("env");
        check_keys(je, {"type", "n_agents", "episode_len", "step_size", "agent_radius",
                        "landmark_radius", "collision_reward", "spawn_bound"},
                   "env");
        read(je, "type", cfg.env.type);
        if (cfg.env.type != "matrix" && cfg.env.type != "particle")
            throw std::invalid_argument("config: env.type must be 'matrix' or 'particle'");
        read(je, "n_agents", cfg.env.particle.n_agents);
        read(je, "episode_len", cfg.env.particle.episode_len);
        read(je, "step_size", cfg.env.particle.step_size);
        read(je, "agent_radius", cfg.env.particle.agent_radius);
        read(je, "landmark_radius", cfg.env.particle.landmark_radius);
        read(je, "collision_reward", cfg.env.particle.collision_reward);
        read(je, "spawn_bound", cfg.env.particle.spawn_bound);
        if (cfg.env.particle.n_agents < 1 || cfg.env.particle.episode_len < 1)
            throw std::invalid_argument("config: env.n_agents and env.episode_len must be >= 1");
    }
    if (j.contains("mode")) cfg.mode = train::mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("fixed_order")) cfg.fixed_order = j.at("fixed_order").get<std::vector<int>>();
    if (j.contains("ppo")) {
        const auto& jp = j.at("ppo");
        check_keys(jp, {"gamma", "gae_lambda", "clip_eps", "epochs", "minibatch", "rollout_len",
                        "n_envs", "lr", "lr_world", "entropy_coef", "value_coef", "reward_scale",
                        "total_steps", "warmup_updates", "wm_epochs", "wm_minibatch", "wm_batches",
                        "wm_dataset_cap", "max_grad_norm", "eval_every_updates", "eval_episodes"},
                   "ppo");
        read(jp, "gamma", cfg.ppo.gamma);
        read(jp, "gae_lambda", cfg.ppo.gae_lambda);
        read(jp, "clip_eps", cfg.ppo.clip_eps);
        read(jp, "epochs", cfg.ppo.epochs);
        read(jp, "minibatch", cfg.ppo.minibatch);
        read(jp, "rollout_len", cfg.ppo.rollout_len);
        read(jp, "n_envs", cfg.ppo.n_envs);
        read(jp, "lr", cfg.ppo.lr);
        read(jp, "lr_world", cfg.ppo.lr_world);
        read(jp, "entropy_coef", cfg.ppo.entropy_coef);
        read(jp, "value_coef", cfg.ppo.value_coef);
        read(jp, "reward_scale", cfg.ppo.reward_scale);
        read(jp, "max_grad_norm", cfg.ppo.max_grad_norm);
        read(jp, "total_steps", cfg.ppo.total_steps);
        read(jp, "warmup_updates", cfg.ppo.warmup_updates);
        read(jp, "wm_epochs", cfg.ppo.wm_epochs);
        read(jp, "wm_minibatch", cfg.ppo.wm_minibatch);
        read(jp, "wm_batches", cfg.ppo.wm_batches);
        read(jp, "wm_dataset_cap", cfg.ppo.wm_dataset_cap);
        read(jp, "eval_every_updates", cfg.ppo.eval_every_updates);
        read(jp, "eval_episodes", cfg.ppo.eval_episodes);
    }
    read(j, "H", cfg.ppo.horizon);
    read(j, "F", cfg.ppo.samples);
    read(j, "seeds", cfg.seeds);
    read(j, "out_dir", cfg.out_dir);
    read(j, "run_id", cfg.run_id);
    cfg.ppo.validate();
    if (cfg.seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
    int n = cfg.env.type == "matrix" ? 2 : cfg.env.particle.n_agents;
    if (cfg.mode == train::OrderingMode::FixedOrder && !proto::is_permutation(cfg.fixed_order, n))
        throw std::invalid_argument("config: fixed_order must be a permutation of all agents");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return parse_config(j);
}

std::unique_ptr<env::Env> make_env(const EnvSpec& spec) {
    if (spec.type == "matrix") return std::make_unique<env::MatrixGame>();
    return std::make_unique<env::ParticleEnv>(spec.particle);
}

}  // namespace seqcomm::cli

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "seqcomm/env.hpp"
#include "seqcomm/nets.hpp"
#include "seqcomm/protocol.hpp"

namespace seqcomm::train {

using env::Env;
using nn::Networks;
using proto::CommLog;
using proto::OrderSequence;

enum class OrderingMode { SeqComm, FixedOrder, RandomOrder, Simultaneous, NoComm };

std::string mode_name(OrderingMode m);
OrderingMode mode_from_name(const std::string& s);

struct PpoConfig {
    double gamma = 0.95;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    int epochs = 4;
    int minibatch = 256;
    int rollout_len = 20;  // env steps per env between updates
    int n_envs = 8;
    double lr = 3e-4;
    double lr_world = 1e-3;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double reward_scale = 1.0;   // applied to rewards for advantage/value targets only
    double max_grad_norm = 10.0; // global L2 clip per update; 0 disables
    long total_steps = 100000;  // total environment steps (summed over envs)
    int horizon = 10;           // H
    int samples = 2;            // F
    int warmup_updates = 5;     // random-order updates before priority search activates
    int wm_epochs = 1;
    int wm_minibatch = 256;
    int wm_batches = 0;  // minibatches per epoch; 0 = full pass over the dataset
    long wm_dataset_cap = 20000;
    int eval_every_updates = 10;
    int eval_episodes = 10;

    void validate() const;  // throws std::invalid_argument on bad values
};

// One environment transition for world-model regression.
struct WmSample {
    std::vector<std::vector<double>> obs;
    std::vector<int> actions;
    std::vector<std::vector<double>> next_obs;
    double reward = 0.0;
};
using WmDataset = std::vector<WmSample>;

// Mean squared error over concatenated (next joint observations, reward)
// targets; no gradient.
double world_model_loss(Networks& nets, const WmDataset& data, size_t begin = 0,
                        size_t end = SIZE_MAX);

// One full pass of minibatch gradient steps over the dataset; returns the
// mean minibatch loss. Hidden states enter without gradient: the regression
// trains the world-model parameters only.
double world_model_epoch(Networks& nets, num::Adam& opt, const WmDataset& data, int minibatch,
                         std::mt19937_64& rng, int max_batches = 0, double max_grad_norm = 0.0);

// Standard GAE recursion. `values` carries one bootstrap entry more than
// `rewards`; returns_out = advantages + values.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 double gamma, double lambda, std::vector<double>& advantages_out,
                 std::vector<double>& returns_out);

// min(ratio * A, g(eps, A)) with g = (1+eps)A for A >= 0 else (1-eps)A.
double ppo_clip_objective(double ratio, double advantage, double epsilon);

struct StepRecord {
    std::vector<std::vector<double>> joint_obs;
    OrderSequence order;
    std::vector<int> actions;
    std::vector<double> log_probs;  // per agent, at collection time
    std::vector<double> values;     // per agent, conditioned on its upper actions
    double reward = 0.0;
    bool done = false;
};

struct RolloutBuffer {
    std::vector<std::vector<StepRecord>> steps;                       // [env][t]
    std::vector<std::vector<std::vector<double>>> advantages;         // [env][t][agent]
    std::vector<std::vector<std::vector<double>>> returns;            // [env][t][agent]
    void clear() { steps.clear(); advantages.clear(); returns.clear(); }
    bool empty() const { return steps.empty(); }
};

struct MetricsRecord {
    std::string run_id;
    uint64_t seed = 0;
    long env_steps = 0;
    std::string mode;
    double eval_return = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double world_loss = 0.0;
    CommLog comm;
    std::map<std::string, long> order_hist;
    double gamma = 0.0;
    int horizon = 0;
    int samples = 0;
    double wall_clock_s = 0.0;
    std::string to_json() const;
};

struct TrainResult {
    std::vector<long> eval_steps;
    std::vector<double> eval_returns;
    CommLog comm_total;
    std::map<std::string, long> order_hist;
};

// On-policy PPO training loop with a configurable ordering mode. Strictly
// on-policy: the buffer is cleared after every update.
class Trainer {
public:
    Trainer(std::unique_ptr<Env> env_prototype, OrderingMode mode, OrderSequence fixed_order,
            PpoConfig cfg, uint64_t seed, std::string run_id = "run");

    TrainResult run(const std::function<void(const MetricsRecord&)>& on_metrics = {});

    // Individual phases, exposed so tests can drive them directly.
    void collect_rollouts();
    std::pair<double, double> update_policy_value();  // (policy loss, value loss)
    double update_world_model();
    double evaluate();

    // Verifies each stored log-prob against a fresh forward pass with the
    // stored upper actions; throws if any deviates by more than `tol`.
    void check_logprob_consistency(double tol = 1e-9) const;

    Networks& networks() { return *nets_; }
    const RolloutBuffer& buffer() const { return buffer_; }
    const WmDataset& world_dataset() const { return wm_data_; }
    const PpoConfig& config() const { return cfg_; }
    long env_steps_done() const { return env_steps_; }
    int updates_done() const { return updates_; }
    bool priority_search_active() const;
    bool share_hidden() const { return mode_ != OrderingMode::NoComm; }
    bool share_actions() const {
        return mode_ == OrderingMode::SeqComm || mode_ == OrderingMode::FixedOrder ||
               mode_ == OrderingMode::RandomOrder;
    }

private:
    OrderSequence choose_order(int env_idx, const std::vector<nn::Tensor>& joint_h);
    void finalize_advantages();

    std::unique_ptr<Env> env_proto_;
    OrderingMode mode_;
    OrderSequence fixed_order_;
    PpoConfig cfg_;
    uint64_t seed_;
    std::string run_id_;

    std::unique_ptr<Networks> nets_;
    std::unique_ptr<num::Adam> opt_ac_;
    std::unique_ptr<num::Adam> opt_wm_;

    std::vector<std::unique_ptr<Env>> envs_;
    std::vector<std::vector<std::vector<double>>> cur_obs_;  // [env][agent][dim]
    std::vector<std::mt19937_64> env_rngs_;
    std::vector<long> episode_counters_;
    std::mt19937_64 update_rng_;

    RolloutBuffer buffer_;
    WmDataset wm_data_;
    CommLog comm_total_;
    std::map<std::string, long> order_hist_;
    long env_steps_ = 0;
    int updates_ = 0;
    double last_world_loss_ = 0.0;
};

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0);

}  // namespace seqcomm::train

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "seqcomm/nets.hpp"

namespace seqcomm::proto {

using nn::Networks;
using nn::Tensor;

// Permutation of agent ids; position index = decision level, level 0 first.
using OrderSequence = std::vector<int>;

bool is_permutation(const OrderSequence& order, int n);

// Message counts per timestep, by kind.
struct CommLog {
    long hidden_state_msgs = 0;
    long intention_value_msgs = 0;
    long action_msgs = 0;

    CommLog& operator+=(const CommLog& o) {
        hidden_state_msgs += o.hidden_state_msgs;
        intention_value_msgs += o.intention_value_msgs;
        action_msgs += o.action_msgs;
        return *this;
    }
};

enum class Phase { Negotiation, Launching };

// Closed-form accounting for one timestep of the implemented scheme:
// negotiation = n hidden-state broadcasts + sum_{k=1}^{n-1} (n-k+1) value
// messages; launching = n(n-1)/2 action messages.
CommLog count_messages(int n, Phase phase);

// Discounted mean return of one predicted trajectory:
// sum_{i=1}^{H} gamma^{i-1} r_i / H.
double trajectory_value(const std::vector<double>& rewards, double gamma, int H);

// World-model rollout machinery for intention evaluation. Deliberately holds
// no environment handle: every transition comes from the learned model.
struct RolloutModel {
    Networks& nets;
    double gamma = 0.95;
    int horizon = 10;  // H
    int samples = 2;   // F
    bool sample_actions = false;  // default greedy for reproducible orders
};

// Mean over F model rollouts of horizon H with `first_mover` deciding right
// after the fixed upper-level agents and the remaining agents following a
// freshly sampled order per rollout.
double rollout_intention(const RolloutModel& model, int first_mover,
                         const std::vector<std::pair<int, int>>& fixed_uppers,
                         const std::vector<Tensor>& joint_h, std::mt19937_64& rng);

// Injection points so priority determination can be exercised with stubbed
// intention values and greedy actions.
using IntentionEvaluator =
    std::function<double(int candidate, const std::vector<std::pair<int, int>>& fixed_uppers,
                         uint64_t rng_seed)>;
using GreedyActionFn =
    std::function<int(int agent, const std::vector<std::pair<int, int>>& fixed_uppers)>;

// Iterative priority search: at each level every remaining agent's intention
// value is recomputed conditioned on the fixed uppers' greedy actions and the
// argmax (ties to the lowest agent id) takes the level.
OrderSequence determine_priority(int n, const IntentionEvaluator& eval,
                                 const GreedyActionFn& greedy, std::mt19937_64& rng,
                                 CommLog* log = nullptr);

// Production wiring of the search onto the world-model rollout machinery.
OrderSequence determine_priority(const RolloutModel& model, const std::vector<Tensor>& joint_h,
                                 std::mt19937_64& rng, CommLog* log = nullptr);

enum class ActionMode { Sample, Greedy };

struct LaunchResult {
    std::vector<int> actions;
    std::vector<double> log_probs;
    CommLog log;
};

// Sequential action selection along `order`: the level-k agent conditions on
// the k-1 upper-level actions (when share_actions) and on peer hidden states
// (when share_hidden). Actions are recorded for simultaneous execution.
LaunchResult launching_step(Networks& nets, const OrderSequence& order,
                            const std::vector<Tensor>& joint_h, ActionMode mode,
                            std::mt19937_64& rng, bool share_hidden = true,
                            bool share_actions = true);

// Policy distribution of one agent given upper actions; used by the trainer
// for log-prob recomputation and by divergence probes.
nn::PolicyOut agent_policy(Networks& nets, num::Tape* tape, int agent,
                           const std::vector<Tensor>& joint_h,
                           const std::vector<int>& joint_actions_known, bool share_hidden,
                           bool share_actions);

// Level-k value estimate under the same conditioning as agent_policy.
Tensor agent_critic(Networks& nets, num::Tape* tape, int agent,
                    const std::vector<Tensor>& joint_h,
                    const std::vector<int>& joint_actions_known, bool share_hidden,
                    bool share_actions);

int sample_categorical(const std::vector<double>& probs, std::mt19937_64& rng);
int argmax_index(const std::vector<double>& values);

}  // namespace seqcomm::proto

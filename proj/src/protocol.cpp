#include "seqcomm/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace seqcomm::proto {

bool is_permutation(const OrderSequence& order, int n) {
    if (static_cast<int>(order.size()) != n) return false;
    std::vector<bool> seen(n, false);
    for (int a : order) {
        if (a < 0 || a >= n || seen[a]) return false;
        seen[a] = true;
    }
    return true;
}

CommLog count_messages(int n, Phase phase) {
    if (n < 1) throw std::invalid_argument("count_messages: n must be >= 1");
    CommLog log;
    if (phase == Phase::Negotiation) {
        log.hidden_state_msgs = n;
        for (int k = 1; k <= n - 1; ++k) log.intention_value_msgs += n - k + 1;
    } else {
        log.action_msgs = static_cast<long>(n) * (n - 1) / 2;
    }
    return log;
}

double trajectory_value(const std::vector<double>& rewards, double gamma, int H) {
    if (static_cast<int>(rewards.size()) != H)
        throw std::invalid_argument("trajectory_value: reward count must equal H");
    if (H < 1) throw std::invalid_argument("trajectory_value: H must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("trajectory_value: gamma must be in (0, 1]");
    double acc = 0.0;
    double disc = 1.0;
    for (double r : rewards) {
        acc += disc * r;
        disc *= gamma;
    }
    return acc / H;
}

int argmax_index(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("argmax_index: empty input");
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

int sample_categorical(const std::vector<double>& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng);
    double acc = 0.0;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
        acc += probs[i];
        if (x < acc) return i;
    }
    return static_cast<int>(probs.size()) - 1;
}

nn::PolicyOut agent_policy(Networks& nets, num::Tape* tape, int agent,
                           const std::vector<Tensor>& joint_h,
                           const std::vector<int>& joint_actions_known, bool share_hidden,
                           bool share_actions) {
    int n = static_cast<int>(joint_h.size());
    std::vector<Tensor> peers;
    std::vector<int> peer_actions;
    if (share_hidden) {
        peers.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j == agent) continue;
            peers.push_back(joint_h[j]);
            peer_actions.push_back(share_actions ? joint_actions_known[j] : -1);
        }
    }
    return nn::policy_forward(tape, nets, joint_h[agent], peers, peer_actions);
}

Tensor agent_critic(Networks& nets, num::Tape* tape, int agent,
                    const std::vector<Tensor>& joint_h,
                    const std::vector<int>& joint_actions_known, bool share_hidden,
                    bool share_actions) {
    int n = static_cast<int>(joint_h.size());
    std::vector<Tensor> peers;
    std::vector<int> peer_actions;
    if (share_hidden) {
        peers.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j == agent) continue;
            peers.push_back(joint_h[j]);
            peer_actions.push_back(share_actions ? joint_actions_known[j] : -1);
        }
    }
    return nn::critic_forward(tape, nets, joint_h[agent], peers, peer_actions);
}

namespace {

// One greedy (or sampled) model rollout of length H under a fixed decision
// order; `preset_first` carries the already-chosen actions for the first
// predicted step.
double roll_trajectory(const RolloutModel& model, const std::vector<int>& decision_order,
                       const std::vector<std::pair<int, int>>& preset_first,
                       const std::vector<Tensor>& joint_h0, std::mt19937_64& rng) {
    int n = static_cast<int>(joint_h0.size());
    std::vector<Tensor> h = joint_h0;
    std::vector<double> rewards;
    rewards.reserve(model.horizon);
    for (int step = 0; step < model.horizon; ++step) {
        std::vector<int> actions(n, -1);
        if (step == 0)
            for (auto [agent, act] : preset_first) actions[agent] = act;
        for (int agent : decision_order) {
            if (actions[agent] >= 0) continue;
            nn::PolicyOut out = agent_policy(model.nets, nullptr, agent, h, actions,
                                             /*share_hidden=*/true, /*share_actions=*/true);
            actions[agent] = model.sample_actions ? sample_categorical(out.probs.data, rng)
                                                  : argmax_index(out.probs.data);
        }
        nn::WorldOut pred = nn::world_forward(nullptr, model.nets, h, actions);
        rewards.push_back(pred.reward.item());
        for (int i = 0; i < n; ++i) h[i] = nn::encode(nullptr, model.nets, pred.next_obs[i]);
    }
    return trajectory_value(rewards, model.gamma, model.horizon);
}

}  // namespace

double rollout_intention(const RolloutModel& model, int first_mover,
                         const std::vector<std::pair<int, int>>& fixed_uppers,
                         const std::vector<Tensor>& joint_h, std::mt19937_64& rng) {
    if (model.samples < 1 || model.horizon < 1)
        throw std::invalid_argument("rollout_intention: F and H must be >= 1");
    int n = static_cast<int>(joint_h.size());
    std::vector<bool> taken(n, false);
    std::vector<int> upper_order;
    for (auto [agent, act] : fixed_uppers) {
        (void)act;
        if (agent == first_mover)
            throw std::invalid_argument("rollout_intention: first_mover already fixed");
        taken[agent] = true;
        upper_order.push_back(agent);
    }
    taken[first_mover] = true;
    std::vector<int> lowers;
    for (int i = 0; i < n; ++i)
        if (!taken[i]) lowers.push_back(i);

    // Sample F lower-level orders, without replacement while distinct
    // permutations remain.
    double total_perms = 1.0;
    for (size_t i = 2; i <= lowers.size(); ++i) total_perms *= static_cast<double>(i);
    bool distinct = model.samples <= total_perms;
    std::set<std::vector<int>> used;
    double acc = 0.0;
    for (int f = 0; f < model.samples; ++f) {
        std::vector<int> lower = lowers;
        for (;;) {
            std::shuffle(lower.begin(), lower.end(), rng);
            if (!distinct || used.insert(lower).second) break;
        }
        std::vector<int> order = upper_order;
        order.push_back(first_mover);
        order.insert(order.end(), lower.begin(), lower.end());
        acc += roll_trajectory(model, order, fixed_uppers, joint_h, rng);
    }
    return acc / model.samples;
}

OrderSequence determine_priority(int n, const IntentionEvaluator& eval,
                                 const GreedyActionFn& greedy, std::mt19937_64& rng,
                                 CommLog* log) {
    if (n < 1) throw std::invalid_argument("determine_priority: n must be >= 1");
    if (log) log->hidden_state_msgs += n;
    OrderSequence order;
    std::vector<std::pair<int, int>> fixed;
    std::vector<bool> taken(n, false);
    for (int level = 0; level < n; ++level) {
        std::vector<int> remaining;
        for (int i = 0; i < n; ++i)
            if (!taken[i]) remaining.push_back(i);
        int winner;
        if (remaining.size() == 1) {
            winner = remaining[0];
        } else {
            // Every remaining candidate broadcasts its value at this level.
            if (log) log->intention_value_msgs += static_cast<long>(remaining.size());
            double best_v = -std::numeric_limits<double>::infinity();
            winner = remaining[0];
            for (int cand : remaining) {
                double v = eval(cand, fixed, rng());
                if (v > best_v) {  // strict: ties resolve to the lowest id
                    best_v = v;
                    winner = cand;
                }
            }
        }
        taken[winner] = true;
        order.push_back(winner);
        if (level + 1 < n) fixed.emplace_back(winner, greedy(winner, fixed));
    }
    return order;
}

OrderSequence determine_priority(const RolloutModel& model, const std::vector<Tensor>& joint_h,
                                 std::mt19937_64& rng, CommLog* log) {
    int n = static_cast<int>(joint_h.size());
    IntentionEvaluator eval = [&](int cand, const std::vector<std::pair<int, int>>& fixed,
                                  uint64_t seed) {
        std::mt19937_64 local(seed);
        return rollout_intention(model, cand, fixed, joint_h, local);
    };
    GreedyActionFn greedy = [&](int agent, const std::vector<std::pair<int, int>>& fixed) {
        std::vector<int> known(n, -1);
        for (auto [upper, act] : fixed) known[upper] = act;
        nn::PolicyOut out = agent_policy(model.nets, nullptr, agent, joint_h, known,
                                         /*share_hidden=*/true, /*share_actions=*/true);
        return argmax_index(out.probs.data);
    };
    return determine_priority(n, eval, greedy, rng, log);
}

LaunchResult launching_step(Networks& nets, const OrderSequence& order,
                            const std::vector<Tensor>& joint_h, ActionMode mode,
                            std::mt19937_64& rng, bool share_hidden, bool share_actions) {
    int n = static_cast<int>(joint_h.size());
    if (!is_permutation(order, n))
        throw std::invalid_argument("launching_step: order must be a permutation of all agents");
    LaunchResult res;
    res.actions.assign(n, -1);
    res.log_probs.assign(n, 0.0);
    for (int agent : order) {
        nn::PolicyOut out =
            agent_policy(nets, nullptr, agent, joint_h, res.actions, share_hidden, share_actions);
        int a = mode == ActionMode::Sample ? sample_categorical(out.probs.data, rng)
                                           : argmax_index(out.probs.data);
        res.actions[agent] = a;
        res.log_probs[agent] = std::log(out.probs.data[a]);
    }
    if (share_actions) res.log.action_msgs = static_cast<long>(n) * (n - 1) / 2;
    return res;
}

}  // namespace seqcomm::proto

#pragma once

#include <random>
#include <vector>

#include "seqcomm/tensor.hpp"

namespace seqcomm::nn {

using num::Parameter;
using num::Tape;
using num::Tensor;

struct NetConfig {
    int obs_width = 0;
    int n_actions = 0;
    int hidden = 48;      // observation encoder output
    int d_k = 32;         // attention key width
    int ctx = 48;         // attention value/context width
    int mlp_hidden = 100; // policy/critic/decoder hidden layer
    int act_embed = 16;   // world-model action encoder output
};

// One scaled dot-product attention head: per-entry key/value projections
// plus a query projection applied to the agent's own hidden state.
struct AttentionParams {
    Parameter q_w, q_b;
    Parameter k_w, k_b;
    Parameter v_w, v_b;
};

struct AttendResult {
    Tensor context;
    Tensor weights;
};

// Parameter-shared heads for all agents: one set of weights serves every
// agent's encoder, attention modules, policy, critic, and world model.
struct Networks {
    NetConfig cfg;

    Parameter enc_w, enc_b;          // observation encoder
    Parameter aenc_w, aenc_b;        // world-model action encoder
    AttentionParams am_a;            // attention for policy/critic messages
    AttentionParams am_w;            // attention inside the world model
    Parameter pol1_w, pol1_b, pol2_w, pol2_b;
    Parameter val1_w, val1_b, val2_w, val2_b;
    Parameter wobs1_w, wobs1_b, wobs2_w, wobs2_b;  // per-agent next-obs decoder
    Parameter wrew1_w, wrew1_b, wrew2_w, wrew2_b;  // reward decoder

    explicit Networks(const NetConfig& config);
    void init(std::mt19937_64& rng);

    // Grouped parameter lists: the actor/critic group trains under the PPO
    // losses, the world group under the model regression loss.
    std::vector<Parameter*> actor_critic_params();
    std::vector<Parameter*> world_params();
    std::vector<Parameter*> all_params();
    std::vector<std::pair<std::string, Parameter*>> named_params();
};

// h = tanh(W o + b), width cfg.hidden.
Tensor encode(Tape* tape, Networks& nets, const Tensor& obs);

// Scaled dot-product attention over `entries` with the query drawn from
// `query_source`. Weights sum to 1; context is their convex combination of
// the entries' value projections.
AttendResult attend(Tape* tape, AttentionParams& p, int d_k,
                    const Tensor& query_source, const std::vector<Tensor>& entries);

// Message layout for the policy/critic attention: peer hidden state
// concatenated with the peer's action one-hot, or a zero action slot when
// the action is unknown (lower-level or simultaneous mode).
Tensor message(Tape* tape, const Tensor& peer_h, int action, int n_actions);

struct PolicyOut {
    Tensor logits;
    Tensor probs;
};

// peer_actions[i] pairs with peer_h[i]; -1 marks an unknown (lower-level)
// action. With no peers the agent attends over its own zero-action message.
PolicyOut policy_forward(Tape* tape, Networks& nets, const Tensor& h_self,
                         const std::vector<Tensor>& peer_h,
                         const std::vector<int>& peer_actions);

Tensor critic_forward(Tape* tape, Networks& nets, const Tensor& h_self,
                      const std::vector<Tensor>& peer_h,
                      const std::vector<int>& peer_actions);

struct WorldOut {
    std::vector<Tensor> next_obs;  // one prediction per agent, width obs_width
    Tensor reward;                 // scalar
};

// Attention-fronted world model: accepts any agent count n and predicts the
// next joint observations and the team reward.
WorldOut world_forward(Tape* tape, Networks& nets,
                       const std::vector<Tensor>& joint_h,
                       const std::vector<int>& joint_actions);

}  // namespace seqcomm::nn

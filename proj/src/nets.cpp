#include "seqcomm/nets.hpp"

#include <cmath>

namespace seqcomm::nn {

namespace {

Parameter make(const std::string& name, int rows, int cols) {
    return Parameter(name, {rows, cols});
}
Parameter makeb(const std::string& name, int n) { return Parameter(name, {n}); }

}  // namespace

Networks::Networks(const NetConfig& config) : cfg(config) {
    if (cfg.obs_width <= 0 || cfg.n_actions <= 0)
        throw std::invalid_argument("Networks: obs_width and n_actions must be positive");
    int H = cfg.hidden, A = cfg.n_actions, M = cfg.mlp_hidden;
    int msg_a = H + A;               // policy/critic message: h + action one-hot
    int msg_w = H + cfg.act_embed;   // world message: h + encoded action
    int head_in = H + cfg.ctx;       // own h concatenated with attention context

    enc_w = make("enc.w", cfg.obs_width, H);
    enc_b = makeb("enc.b", H);
    aenc_w = make("aenc.w", A, cfg.act_embed);
    aenc_b = makeb("aenc.b", cfg.act_embed);

    am_a.q_w = make("am_a.q.w", H, cfg.d_k);
    am_a.q_b = makeb("am_a.q.b", cfg.d_k);
    am_a.k_w = make("am_a.k.w", msg_a, cfg.d_k);
    am_a.k_b = makeb("am_a.k.b", cfg.d_k);
    am_a.v_w = make("am_a.v.w", msg_a, cfg.ctx);
    am_a.v_b = makeb("am_a.v.b", cfg.ctx);

    am_w.q_w = make("am_w.q.w", H, cfg.d_k);
    am_w.q_b = makeb("am_w.q.b", cfg.d_k);
    am_w.k_w = make("am_w.k.w", msg_w, cfg.d_k);
    am_w.k_b = makeb("am_w.k.b", cfg.d_k);
    am_w.v_w = make("am_w.v.w", msg_w, cfg.ctx);
    am_w.v_b = makeb("am_w.v.b", cfg.ctx);

    pol1_w = make("pol.1.w", head_in, M);
    pol1_b = makeb("pol.1.b", M);
    pol2_w = make("pol.2.w", M, A);
    pol2_b = makeb("pol.2.b", A);

    val1_w = make("val.1.w", head_in, M);
    val1_b = makeb("val.1.b", M);
    val2_w = make("val.2.w", M, 1);
    val2_b = makeb("val.2.b", 1);

    wobs1_w = make("wobs.1.w", head_in, M);
    wobs1_b = makeb("wobs.1.b", M);
    wobs2_w = make("wobs.2.w", M, cfg.obs_width);
    wobs2_b = makeb("wobs.2.b", cfg.obs_width);

    wrew1_w = make("wrew.1.w", head_in, M);
    wrew1_b = makeb("wrew.1.b", M);
    wrew2_w = make("wrew.2.w", M, 1);
    wrew2_b = makeb("wrew.2.b", 1);
}

void Networks::init(std::mt19937_64& rng) {
    for (auto& [name, p] : named_params()) {
        if (p->shape.size() == 2) {
            p->init_uniform(rng, p->shape[0]);
        } else {
            std::fill(p->value.begin(), p->value.end(), 0.0);
        }
    }
}

std::vector<Parameter*> Networks::actor_critic_params() {
    return {&enc_w,     &enc_b,     &am_a.q_w, &am_a.q_b, &am_a.k_w, &am_a.k_b,
            &am_a.v_w,  &am_a.v_b,  &pol1_w,   &pol1_b,   &pol2_w,   &pol2_b,
            &val1_w,    &val1_b,    &val2_w,   &val2_b};
}

std::vector<Parameter*> Networks::world_params() {
    return {&aenc_w,  &aenc_b,  &am_w.q_w, &am_w.q_b, &am_w.k_w, &am_w.k_b,
            &am_w.v_w, &am_w.v_b, &wobs1_w, &wobs1_b,  &wobs2_w,  &wobs2_b,
            &wrew1_w, &wrew1_b, &wrew2_w,  &wrew2_b};
}

std::vector<Parameter*> Networks::all_params() {
    auto a = actor_critic_params();
    auto w = world_params();
    a.insert(a.end(), w.begin(), w.end());
    return a;
}

std::vector<std::pair<std::string, Parameter*>> Networks::named_params() {
    std::vector<std::pair<std::string, Parameter*>> out;
    for (auto* p : all_params()) out.emplace_back(p->name, p);
    return out;
}

Tensor encode(Tape* tape, Networks& nets, const Tensor& obs) {
    if (obs.size() != nets.cfg.obs_width)
        throw std::invalid_argument("encode: observation width mismatch");
    return tanh_t(tape, affine(tape, obs, nets.enc_w, nets.enc_b));
}

AttendResult attend(Tape* tape, AttentionParams& p, int d_k,
                    const Tensor& query_source, const std::vector<Tensor>& entries) {
    if (entries.empty()) throw std::invalid_argument("attend: empty entry list");
    Tensor q = affine(tape, query_source, p.q_w, p.q_b);
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
    std::vector<Tensor> scores;
    std::vector<Tensor> values;
    scores.reserve(entries.size());
    values.reserve(entries.size());
    for (const auto& e : entries) {
        Tensor k = affine(tape, e, p.k_w, p.k_b);
        values.push_back(affine(tape, e, p.v_w, p.v_b));
        scores.push_back(scale(tape, dot(tape, q, k), inv_sqrt_dk));
    }
    Tensor weights = softmax(tape, concat(tape, scores));
    Tensor ctx = smul(tape, pick(tape, weights, 0), values[0]);
    for (size_t j = 1; j < entries.size(); ++j)
        ctx = add(tape, ctx, smul(tape, pick(tape, weights, static_cast<int>(j)), values[j]));
    return {ctx, weights};
}

Tensor message(Tape* tape, const Tensor& peer_h, int action, int n_actions) {
    std::vector<double> slot(n_actions, 0.0);
    if (action >= 0) {
        if (action >= n_actions) throw std::invalid_argument("message: action index out of range");
        slot[action] = 1.0;
    }
    return concat(tape, {peer_h, Tensor::vec(slot)});
}

namespace {

// Shared front half of the policy and critic: attend over peer messages
// (or the agent's own zero-action message when alone) and concatenate the
// context with the agent's own hidden state.
Tensor head_input(Tape* tape, Networks& nets, const Tensor& h_self,
                  const std::vector<Tensor>& peer_h, const std::vector<int>& peer_actions) {
    if (peer_h.size() != peer_actions.size())
        throw std::invalid_argument("head_input: peer hidden/action count mismatch");
    if (h_self.size() != nets.cfg.hidden)
        throw std::invalid_argument("head_input: hidden state width mismatch");
    std::vector<Tensor> entries;
    if (peer_h.empty()) {
        entries.push_back(message(tape, h_self, -1, nets.cfg.n_actions));
    } else {
        entries.reserve(peer_h.size());
        for (size_t j = 0; j < peer_h.size(); ++j)
            entries.push_back(message(tape, peer_h[j], peer_actions[j], nets.cfg.n_actions));
    }
    AttendResult att = attend(tape, nets.am_a, nets.cfg.d_k, h_self, entries);
    return concat(tape, {h_self, att.context});
}

}  // namespace

PolicyOut policy_forward(Tape* tape, Networks& nets, const Tensor& h_self,
                         const std::vector<Tensor>& peer_h,
                         const std::vector<int>& peer_actions) {
    Tensor x = head_input(tape, nets, h_self, peer_h, peer_actions);
    Tensor hidden = tanh_t(tape, affine(tape, x, nets.pol1_w, nets.pol1_b));
    Tensor logits = affine(tape, hidden, nets.pol2_w, nets.pol2_b);
    return {logits, softmax(tape, logits)};
}

Tensor critic_forward(Tape* tape, Networks& nets, const Tensor& h_self,
                      const std::vector<Tensor>& peer_h,
                      const std::vector<int>& peer_actions) {
    Tensor x = head_input(tape, nets, h_self, peer_h, peer_actions);
    Tensor hidden = tanh_t(tape, affine(tape, x, nets.val1_w, nets.val1_b));
    return affine(tape, hidden, nets.val2_w, nets.val2_b);
}

WorldOut world_forward(Tape* tape, Networks& nets,
                       const std::vector<Tensor>& joint_h,
                       const std::vector<int>& joint_actions) {
    if (joint_h.empty()) throw std::invalid_argument("world_forward: no agents");
    if (joint_h.size() != joint_actions.size())
        throw std::invalid_argument("world_forward: hidden/action count mismatch");
    int n = static_cast<int>(joint_h.size());
    std::vector<Tensor> entries;
    entries.reserve(n);
    for (int j = 0; j < n; ++j) {
        if (joint_h[j].size() != nets.cfg.hidden)
            throw std::invalid_argument("world_forward: hidden state width mismatch");
        Tensor a_emb = tanh_t(
            tape, affine(tape, Tensor::vec(num::one_hot(joint_actions[j], nets.cfg.n_actions)),
                         nets.aenc_w, nets.aenc_b));
        entries.push_back(concat(tape, {joint_h[j], a_emb}));
    }
    WorldOut out;
    out.next_obs.reserve(n);
    Tensor feat_sum;
    for (int j = 0; j < n; ++j) {
        AttendResult att = attend(tape, nets.am_w, nets.cfg.d_k, joint_h[j], entries);
        Tensor feat = concat(tape, {joint_h[j], att.context});
        Tensor hid = tanh_t(tape, affine(tape, feat, nets.wobs1_w, nets.wobs1_b));
        out.next_obs.push_back(affine(tape, hid, nets.wobs2_w, nets.wobs2_b));
        feat_sum = j == 0 ? feat : add(tape, feat_sum, feat);
    }
    Tensor feat_mean = scale(tape, feat_sum, 1.0 / n);
    Tensor rhid = tanh_t(tape, affine(tape, feat_mean, nets.wrew1_w, nets.wrew1_b));
    out.reward = affine(tape, rhid, nets.wrew2_w, nets.wrew2_b);
    return out;
}

}  // namespace seqcomm::nn

#include "seqcomm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace seqcomm::train {

using num::Tape;
using num::Tensor;

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    // splitmix64 over a combined key
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string mode_name(OrderingMode m) {
    switch (m) {
        case OrderingMode::SeqComm: return "seqcomm";
        case OrderingMode::FixedOrder: return "fixed";
        case OrderingMode::RandomOrder: return "random";
        case OrderingMode::Simultaneous: return "simultaneous";
        case OrderingMode::NoComm: return "nocomm";
    }
    return "?";
}

OrderingMode mode_from_name(const std::string& s) {
    if (s == "seqcomm") return OrderingMode::SeqComm;
    if (s == "fixed" || s.rfind("fixed:", 0) == 0) return OrderingMode::FixedOrder;
    if (s == "random") return OrderingMode::RandomOrder;
    if (s == "simultaneous") return OrderingMode::Simultaneous;
    if (s == "nocomm") return OrderingMode::NoComm;
    throw std::invalid_argument("unknown ordering mode: " + s);
}

void PpoConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("config: gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
        throw std::invalid_argument("config: gae_lambda must be in [0, 1]");
    if (!(clip_eps > 0.0)) throw std::invalid_argument("config: clip_eps must be > 0");
    if (epochs < 1 || minibatch < 1 || rollout_len < 1 || n_envs < 1)
        throw std::invalid_argument("config: epochs/minibatch/rollout_len/n_envs must be >= 1");
    if (horizon < 1 || samples < 1) throw std::invalid_argument("config: H and F must be >= 1");
    if (lr < 0.0 || lr_world < 0.0) throw std::invalid_argument("config: negative learning rate");
    if (!(reward_scale > 0.0)) throw std::invalid_argument("config: reward_scale must be > 0");
    if (wm_batches < 0) throw std::invalid_argument("config: wm_batches must be >= 0");
    if (max_grad_norm < 0.0) throw std::invalid_argument("config: max_grad_norm must be >= 0");
    if (total_steps < 1) throw std::invalid_argument("config: total_steps must be >= 1");
    if (eval_episodes < 1 || eval_every_updates < 1)
        throw std::invalid_argument("config: eval settings must be >= 1");
}

double ppo_clip_objective(double ratio, double advantage, double epsilon) {
    if (!(ratio > 0.0)) throw std::invalid_argument("ppo_clip_objective: ratio must be > 0");
    double g = advantage >= 0.0 ? (1.0 + epsilon) * advantage : (1.0 - epsilon) * advantage;
    return std::min(ratio * advantage, g);
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 double gamma, double lambda, std::vector<double>& advantages_out,
                 std::vector<double>& returns_out) {
    if (values.size() != rewards.size() + 1)
        throw std::invalid_argument("compute_gae: values must carry one bootstrap entry extra");
    size_t T = rewards.size();
    advantages_out.assign(T, 0.0);
    returns_out.assign(T, 0.0);
    double gae = 0.0;
    for (size_t i = T; i-- > 0;) {
        double delta = rewards[i] + gamma * values[i + 1] - values[i];
        gae = delta + gamma * lambda * gae;
        advantages_out[i] = gae;
        returns_out[i] = gae + values[i];
    }
}

namespace {

// Squared-error term of one world-model sample; with a tape, gradients flow
// into the world-model parameters (hidden states enter as constants).
Tensor wm_sample_loss(Tape* tape, Networks& nets, const WmSample& s) {
    int n = static_cast<int>(s.obs.size());
    std::vector<Tensor> h;
    h.reserve(n);
    for (int i = 0; i < n; ++i)
        h.push_back(nn::encode(nullptr, nets, Tensor::vec(s.obs[i])));
    nn::WorldOut pred = nn::world_forward(tape, nets, h, s.actions);
    std::vector<Tensor> diffs;
    diffs.reserve(n + 1);
    for (int i = 0; i < n; ++i) {
        std::vector<double> neg_target = s.next_obs[i];
        for (auto& v : neg_target) v = -v;
        diffs.push_back(add(tape, pred.next_obs[i], Tensor::vec(neg_target)));
    }
    diffs.push_back(add(tape, pred.reward, Tensor::scalar(-s.reward)));
    return sum(tape, square(tape, concat(tape, diffs)));
}

}  // namespace

double world_model_loss(Networks& nets, const WmDataset& data, size_t begin, size_t end) {
    if (data.empty()) throw std::invalid_argument("world_model_loss: empty dataset");
    end = std::min(end, data.size());
    if (begin >= end) throw std::invalid_argument("world_model_loss: empty range");
    double acc = 0.0;
    for (size_t i = begin; i < end; ++i) acc += wm_sample_loss(nullptr, nets, data[i]).item();
    return acc / static_cast<double>(end - begin);
}

double world_model_epoch(Networks& nets, num::Adam& opt, const WmDataset& data, int minibatch,
                         std::mt19937_64& rng, int max_batches, double max_grad_norm) {
    if (data.empty()) throw std::invalid_argument("world_model_epoch: empty dataset");
    std::vector<size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    double loss_acc = 0.0;
    int batches = 0;
    for (size_t start = 0; start < idx.size(); start += minibatch) {
        if (max_batches > 0 && batches >= max_batches) break;
        size_t stop = std::min(idx.size(), start + minibatch);
        Tape tape;
        Tensor total;
        for (size_t i = start; i < stop; ++i) {
            Tensor l = wm_sample_loss(&tape, nets, data[idx[i]]);
            total = i == start ? l : add(&tape, total, l);
        }
        Tensor loss = scale(&tape, total, 1.0 / static_cast<double>(stop - start));
        opt.zero_grad();
        tape.backward(loss);
        num::clip_grad_norm(nets.world_params(), max_grad_norm);
        opt.step();
        loss_acc += loss.item();
        ++batches;
    }
    return loss_acc / batches;
}

std::string MetricsRecord::to_json() const {
    nlohmann::ordered_json j;
    j["run_id"] = run_id;
    j["seed"] = seed;
    j["env_steps"] = env_steps;
    j["mode"] = mode;
    j["eval_return"] = eval_return;
    j["policy_loss"] = policy_loss;
    j["value_loss"] = value_loss;
    j["world_loss"] = world_loss;
    j["msgs_hidden"] = comm.hidden_state_msgs;
    j["msgs_intention"] = comm.intention_value_msgs;
    j["msgs_action"] = comm.action_msgs;
    j["gamma"] = gamma;
    j["H"] = horizon;
    j["F"] = samples;
    j["order_hist"] = order_hist;
    j["wall_clock_s"] = wall_clock_s;
    return j.dump();
}

Trainer::Trainer(std::unique_ptr<Env> env_prototype, OrderingMode mode, OrderSequence fixed_order,
                 PpoConfig cfg, uint64_t seed, std::string run_id)
    : env_proto_(std::move(env_prototype)),
      mode_(mode),
      fixed_order_(std::move(fixed_order)),
      cfg_(cfg),
      seed_(seed),
      run_id_(std::move(run_id)) {
    cfg_.validate();
    int n = env_proto_->n_agents();
    if (mode_ == OrderingMode::FixedOrder && !proto::is_permutation(fixed_order_, n))
        throw std::invalid_argument("Trainer: fixed order must be a permutation of all agents");

    nn::NetConfig nc;
    nc.obs_width = env_proto_->obs_width();
    nc.n_actions = env_proto_->n_actions();
    nets_ = std::make_unique<Networks>(nc);
    std::mt19937_64 init_rng(mix_seed(seed_, 1));
    nets_->init(init_rng);
    opt_ac_ = std::make_unique<num::Adam>(nets_->actor_critic_params(),
                                          num::AdamConfig{.lr = cfg_.lr});
    opt_wm_ = std::make_unique<num::Adam>(nets_->world_params(),
                                          num::AdamConfig{.lr = cfg_.lr_world});

    update_rng_.seed(mix_seed(seed_, 4));
    envs_.reserve(cfg_.n_envs);
    for (int e = 0; e < cfg_.n_envs; ++e) {
        envs_.push_back(env_proto_->clone());
        env_rngs_.emplace_back(mix_seed(seed_, 2, static_cast<uint64_t>(e)));
        episode_counters_.push_back(0);
        cur_obs_.push_back(envs_[e]->reset(mix_seed(seed_, 3, static_cast<uint64_t>(e) << 32)));
    }
}

bool Trainer::priority_search_active() const {
    return mode_ == OrderingMode::SeqComm && updates_ >= cfg_.warmup_updates;
}

OrderSequence Trainer::choose_order(int env_idx, const std::vector<Tensor>& joint_h) {
    int n = env_proto_->n_agents();
    OrderSequence order(n);
    std::iota(order.begin(), order.end(), 0);
    switch (mode_) {
        case OrderingMode::FixedOrder:
            return fixed_order_;
        case OrderingMode::Simultaneous:
        case OrderingMode::NoComm:
            return order;
        case OrderingMode::RandomOrder:
            std::shuffle(order.begin(), order.end(), env_rngs_[env_idx]);
            return order;
        case OrderingMode::SeqComm: {
            if (!priority_search_active()) {
                std::shuffle(order.begin(), order.end(), env_rngs_[env_idx]);
                return order;
            }
            proto::RolloutModel model{*nets_, cfg_.gamma, cfg_.horizon, cfg_.samples, false};
            CommLog log;
            order = proto::determine_priority(model, joint_h, env_rngs_[env_idx], &log);
            comm_total_ += log;
            return order;
        }
    }
    return order;
}

namespace {

std::string order_key(const OrderSequence& order) {
    std::string key;
    for (size_t i = 0; i < order.size(); ++i) {
        if (i) key += '-';
        key += std::to_string(order[i]);
    }
    return key;
}

}  // namespace

void Trainer::collect_rollouts() {
    int n = env_proto_->n_agents();
    buffer_.clear();
    buffer_.steps.resize(cfg_.n_envs);
    bool sa = share_actions();
    bool sh = share_hidden();
    for (int e = 0; e < cfg_.n_envs; ++e) {
        auto& steps = buffer_.steps[e];
        steps.reserve(cfg_.rollout_len);
        for (int t = 0; t < cfg_.rollout_len; ++t) {
            StepRecord rec;
            rec.joint_obs = cur_obs_[e];
            std::vector<Tensor> h;
            h.reserve(n);
            for (int i = 0; i < n; ++i)
                h.push_back(nn::encode(nullptr, *nets_, Tensor::vec(cur_obs_[e][i])));
            rec.order = choose_order(e, h);
            ++order_hist_[order_key(rec.order)];
            proto::LaunchResult launch = proto::launching_step(
                *nets_, rec.order, h, proto::ActionMode::Sample, env_rngs_[e], sh, sa);
            comm_total_ += launch.log;
            // Hidden-state broadcasts when the priority search did not already
            // account for them (it logs n broadcasts plus the value messages).
            if (sh && !(mode_ == OrderingMode::SeqComm && priority_search_active()))
                comm_total_.hidden_state_msgs += n;
            rec.actions = launch.actions;
            rec.log_probs = launch.log_probs;

            // Per-agent value estimate conditioned on that agent's upper actions.
            rec.values.assign(n, 0.0);
            std::vector<int> known(n, -1);
            for (int level = 0; level < n; ++level) {
                int agent = rec.order[level];
                rec.values[agent] =
                    proto::agent_critic(*nets_, nullptr, agent, h, known, sh, sa).item();
                known[agent] = rec.actions[agent];
            }

            env::StepResult sr = envs_[e]->step(rec.actions);
            rec.reward = sr.reward;
            rec.done = sr.done;

            WmSample wm;
            wm.obs = rec.joint_obs;
            wm.actions = rec.actions;
            wm.next_obs = sr.observations;
            wm.reward = sr.reward;
            wm_data_.push_back(std::move(wm));

            if (sr.done) {
                ++episode_counters_[e];
                cur_obs_[e] = envs_[e]->reset(
                    mix_seed(seed_, 3, (static_cast<uint64_t>(e) << 32) |
                                           static_cast<uint64_t>(episode_counters_[e])));
            } else {
                cur_obs_[e] = sr.observations;
            }
            steps.push_back(std::move(rec));
            ++env_steps_;
        }
    }
    if (static_cast<long>(wm_data_.size()) > cfg_.wm_dataset_cap)
        wm_data_.erase(wm_data_.begin(),
                       wm_data_.begin() + (wm_data_.size() - cfg_.wm_dataset_cap));
}

void Trainer::finalize_advantages() {
    int n = env_proto_->n_agents();
    buffer_.advantages.assign(cfg_.n_envs, {});
    buffer_.returns.assign(cfg_.n_envs, {});
    for (int e = 0; e < cfg_.n_envs; ++e) {
        size_t T = buffer_.steps[e].size();
        buffer_.advantages[e].assign(T, std::vector<double>(n, 0.0));
        buffer_.returns[e].assign(T, std::vector<double>(n, 0.0));
        size_t seg_start = 0;
        while (seg_start < T) {
            size_t seg_end = seg_start;
            while (seg_end < T && !buffer_.steps[e][seg_end].done) ++seg_end;
            bool terminated = seg_end < T;
            if (terminated) ++seg_end;  // include the terminal step
            size_t len = seg_end - seg_start;
            for (int agent = 0; agent < n; ++agent) {
                std::vector<double> rewards(len), values(len + 1);
                for (size_t i = 0; i < len; ++i) {
                    rewards[i] = buffer_.steps[e][seg_start + i].reward * cfg_.reward_scale;
                    values[i] = buffer_.steps[e][seg_start + i].values[agent];
                }
                if (terminated) {
                    values[len] = 0.0;
                } else {
                    // Truncated rollout: bootstrap from the current state with
                    // no upper actions known.
                    std::vector<Tensor> h;
                    for (int i = 0; i < n; ++i)
                        h.push_back(nn::encode(nullptr, *nets_, Tensor::vec(cur_obs_[e][i])));
                    std::vector<int> none(n, -1);
                    values[len] = proto::agent_critic(*nets_, nullptr, agent, h, none,
                                                      share_hidden(), share_actions())
                                      .item();
                }
                std::vector<double> adv, ret;
                compute_gae(rewards, values, cfg_.gamma, cfg_.gae_lambda, adv, ret);
                for (size_t i = 0; i < len; ++i) {
                    buffer_.advantages[e][seg_start + i][agent] = adv[i];
                    buffer_.returns[e][seg_start + i][agent] = ret[i];
                }
            }
            seg_start = seg_end;
        }
    }
}

void Trainer::check_logprob_consistency(double tol) const {
    int n = env_proto_->n_agents();
    bool sa = mode_ == OrderingMode::SeqComm || mode_ == OrderingMode::FixedOrder ||
              mode_ == OrderingMode::RandomOrder;
    bool sh = mode_ != OrderingMode::NoComm;
    for (const auto& env_steps : buffer_.steps)
        for (const auto& rec : env_steps) {
            std::vector<Tensor> h;
            for (int i = 0; i < n; ++i)
                h.push_back(nn::encode(nullptr, *nets_, Tensor::vec(rec.joint_obs[i])));
            std::vector<int> known(n, -1);
            for (int level = 0; level < n; ++level) {
                int agent = rec.order[level];
                auto out = proto::agent_policy(*nets_, nullptr, agent, h, known, sh, sa);
                double lp = std::log(out.probs.data[rec.actions[agent]]);
                if (std::abs(lp - rec.log_probs[agent]) > tol)
                    throw std::logic_error("stored log-prob does not match recomputation");
                known[agent] = rec.actions[agent];
            }
        }
}

std::pair<double, double> Trainer::update_policy_value() {
    if (buffer_.empty()) throw std::invalid_argument("update_policy_value: empty buffer");
    int n = env_proto_->n_agents();
    finalize_advantages();
    check_logprob_consistency();

    struct Item {
        int e, t, agent;
        double adv, ret, logp_old;
        int upper_count;
    };
    std::vector<Item> items;
    double adv_mean = 0.0;
    for (int e = 0; e < cfg_.n_envs; ++e)
        for (size_t t = 0; t < buffer_.steps[e].size(); ++t) {
            const auto& rec = buffer_.steps[e][t];
            for (int level = 0; level < n; ++level) {
                int agent = rec.order[level];
                items.push_back({e, static_cast<int>(t), agent, buffer_.advantages[e][t][agent],
                                 buffer_.returns[e][t][agent], rec.log_probs[agent], level});
                adv_mean += buffer_.advantages[e][t][agent];
            }
        }
    adv_mean /= items.size();
    double adv_var = 0.0;
    for (const auto& it : items) adv_var += (it.adv - adv_mean) * (it.adv - adv_mean);
    double adv_std = std::sqrt(adv_var / items.size());
    for (auto& it : items) it.adv = (it.adv - adv_mean) / (adv_std + 1e-8);

    bool sa = share_actions();
    bool sh = share_hidden();
    double pol_loss_acc = 0.0, val_loss_acc = 0.0;
    long batches = 0;
    std::vector<size_t> idx(items.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), update_rng_);
        for (size_t start = 0; start < idx.size(); start += cfg_.minibatch) {
            size_t stop = std::min(idx.size(), start + static_cast<size_t>(cfg_.minibatch));
            Tape tape;
            Tensor total;
            double pol_fwd = 0.0, val_fwd = 0.0;
            for (size_t ii = start; ii < stop; ++ii) {
                const Item& it = items[idx[ii]];
                const StepRecord& rec = buffer_.steps[it.e][it.t];
                std::vector<Tensor> h;
                h.reserve(n);
                for (int i = 0; i < n; ++i)
                    h.push_back(nn::encode(&tape, *nets_, Tensor::vec(rec.joint_obs[i])));
                // Upper actions exactly as recorded at collection time.
                std::vector<int> known(n, -1);
                for (int level = 0; level < it.upper_count; ++level)
                    known[rec.order[level]] = rec.actions[rec.order[level]];

                auto pol = proto::agent_policy(*nets_, &tape, it.agent, h, known, sh, sa);
                Tensor logp = log_t(&tape, pick(&tape, pol.probs, rec.actions[it.agent]));
                Tensor ratio = exp_t(&tape, add(&tape, logp, Tensor::scalar(-it.logp_old)));
                double r0 = ratio.item();
                double g = it.adv >= 0.0 ? (1.0 + cfg_.clip_eps) * it.adv
                                         : (1.0 - cfg_.clip_eps) * it.adv;
                // min(ratio*A, g): gradient flows only through the unclipped branch.
                Tensor obj = r0 * it.adv <= g ? scale(&tape, ratio, it.adv) : Tensor::scalar(g);
                Tensor ent = scale(&tape, sum(&tape, mul(&tape, pol.probs,
                                                         log_t(&tape, pol.probs))), -1.0);
                Tensor vv = proto::agent_critic(*nets_, &tape, it.agent, h, known, sh, sa);
                Tensor vdiff = add(&tape, vv, Tensor::scalar(-it.ret));
                Tensor vloss = square(&tape, vdiff);
                Tensor sample_loss =
                    add(&tape, scale(&tape, obj, -1.0),
                        add(&tape, scale(&tape, vloss, cfg_.value_coef),
                            scale(&tape, ent, -cfg_.entropy_coef)));
                total = ii == start ? sample_loss : add(&tape, total, sample_loss);
                pol_fwd += -obj.item();
                val_fwd += vloss.item();
            }
            Tensor loss = scale(&tape, total, 1.0 / static_cast<double>(stop - start));
            opt_ac_->zero_grad();
            tape.backward(loss);
            num::clip_grad_norm(nets_->actor_critic_params(), cfg_.max_grad_norm);
            opt_ac_->step();
            pol_loss_acc += pol_fwd / static_cast<double>(stop - start);
            val_loss_acc += val_fwd / static_cast<double>(stop - start);
            ++batches;
        }
    }
    buffer_.clear();  // strictly on-policy
    ++updates_;
    return {pol_loss_acc / batches, val_loss_acc / batches};
}

double Trainer::update_world_model() {
    if (wm_data_.empty()) throw std::invalid_argument("update_world_model: empty dataset");
    double loss = 0.0;
    for (int e = 0; e < cfg_.wm_epochs; ++e)
        loss = world_model_epoch(*nets_, *opt_wm_, wm_data_, cfg_.wm_minibatch, update_rng_,
                                 cfg_.wm_batches, cfg_.max_grad_norm);
    last_world_loss_ = loss;
    return loss;
}

double Trainer::evaluate() {
    int n = env_proto_->n_agents();
    bool sa = share_actions();
    bool sh = share_hidden();
    double total = 0.0;
    for (int k = 0; k < cfg_.eval_episodes; ++k) {
        auto e = env_proto_->clone();
        auto obs = e->reset(mix_seed(seed_, 0xE5, static_cast<uint64_t>(k)));
        std::mt19937_64 rng(mix_seed(seed_, 0xF0, static_cast<uint64_t>(k)));
        double ep_ret = 0.0;
        for (int t = 0; t < e->episode_len(); ++t) {
            std::vector<Tensor> h;
            h.reserve(n);
            for (int i = 0; i < n; ++i) h.push_back(nn::encode(nullptr, *nets_, Tensor::vec(obs[i])));
            OrderSequence order(n);
            std::iota(order.begin(), order.end(), 0);
            if (mode_ == OrderingMode::FixedOrder) {
                order = fixed_order_;
            } else if (mode_ == OrderingMode::RandomOrder) {
                std::shuffle(order.begin(), order.end(), rng);
            } else if (mode_ == OrderingMode::SeqComm) {
                proto::RolloutModel model{*nets_, cfg_.gamma, cfg_.horizon, cfg_.samples, false};
                order = proto::determine_priority(model, h, rng);
            }
            auto launch = proto::launching_step(*nets_, order, h, proto::ActionMode::Greedy, rng,
                                                sh, sa);
            auto sr = e->step(launch.actions);
            ep_ret += sr.reward;
            obs = sr.observations;
            if (sr.done) break;
        }
        total += ep_ret;
    }
    return total / cfg_.eval_episodes;
}

TrainResult Trainer::run(const std::function<void(const MetricsRecord&)>& on_metrics) {
    auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    auto emit = [&](double pol_loss, double val_loss) {
        double ret = evaluate();
        result.eval_steps.push_back(env_steps_);
        result.eval_returns.push_back(ret);
        if (on_metrics) {
            MetricsRecord rec;
            rec.run_id = run_id_;
            rec.seed = seed_;
            rec.env_steps = env_steps_;
            rec.mode = mode_name(mode_);
            rec.eval_return = ret;
            rec.policy_loss = pol_loss;
            rec.value_loss = val_loss;
            rec.world_loss = last_world_loss_;
            rec.comm = comm_total_;
            rec.order_hist = order_hist_;
            rec.gamma = cfg_.gamma;
            rec.horizon = cfg_.horizon;
            rec.samples = cfg_.samples;
            rec.wall_clock_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            on_metrics(rec);
        }
    };
    emit(0.0, 0.0);
    double pol_loss = 0.0, val_loss = 0.0;
    while (env_steps_ < cfg_.total_steps) {
        collect_rollouts();
        update_world_model();
        auto [pl, vl] = update_policy_value();
        pol_loss = pl;
        val_loss = vl;
        if (updates_ % cfg_.eval_every_updates == 0) emit(pol_loss, val_loss);
    }
    if (result.eval_steps.empty() || result.eval_steps.back() != env_steps_)
        emit(pol_loss, val_loss);
    result.comm_total = comm_total_;
    result.order_hist = order_hist_;
    return result;
}

}  // namespace seqcomm::train

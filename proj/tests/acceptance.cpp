// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "seqcomm/analysis.hpp"
#include "seqcomm/env.hpp"
#include "seqcomm/protocol.hpp"
#include "seqcomm/trainer.hpp"

using namespace seqcomm;
using train::OrderingMode;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---------------------------------------------------------------------------
// Matrix-game training (criteria 1, 2, 9)

train::PpoConfig matrix_cfg() {
    train::PpoConfig cfg;
    cfg.total_steps = 4000;
    cfg.n_envs = 8;
    cfg.rollout_len = 8;
    cfg.minibatch = 64;
    cfg.lr = 0.003;
    cfg.entropy_coef = 2.0;
    cfg.eval_every_updates = 10;
    return cfg;
}

struct MatrixRun {
    double final_return = 0.0;
    std::vector<long> eval_steps;
    std::vector<double> eval_returns;
    double seconds = 0.0;
};

MatrixRun run_matrix(OrderingMode mode, uint64_t seed, proto::OrderSequence fixed = {}) {
    double t0 = now_s();
    train::Trainer t(std::make_unique<env::MatrixGame>(), mode, std::move(fixed), matrix_cfg(),
                     seed);
    auto res = t.run();
    MatrixRun out;
    out.final_return = res.eval_returns.back();
    out.eval_steps = res.eval_steps;
    out.eval_returns = res.eval_returns;
    out.seconds = now_s() - t0;
    return out;
}

// ---------------------------------------------------------------------------
// Particle-task training (criterion 3)

train::PpoConfig particle_cfg() {
    train::PpoConfig cfg;
    cfg.total_steps = 32000;
    cfg.n_envs = 8;
    cfg.rollout_len = 40;
    cfg.minibatch = 256;
    cfg.lr = 3e-4;
    cfg.epochs = 4;
    cfg.entropy_coef = 0.01;
    cfg.reward_scale = 0.1;
    cfg.max_grad_norm = 0.5;
    cfg.eval_every_updates = 5;
    cfg.warmup_updates = 5;
    cfg.wm_batches = 8;
    cfg.wm_dataset_cap = 4000;
    cfg.horizon = 10;  // H
    cfg.samples = 2;   // F
    cfg.gamma = 0.95;
    return cfg;
}

double final10_mean(const std::vector<double>& rets) {
    size_t k = std::min<size_t>(10, rets.size());
    double acc = 0.0;
    for (size_t i = rets.size() - k; i < rets.size(); ++i) acc += rets[i];
    return acc / k;
}

// ---------------------------------------------------------------------------
// Gradient checks (criterion 6)

nn::Networks tiny_nets(uint64_t seed) {
    nn::NetConfig c;
    c.obs_width = 6;
    c.n_actions = 3;
    c.hidden = 8;
    c.d_k = 4;
    c.ctx = 8;
    c.mlp_hidden = 10;
    c.act_embed = 4;
    nn::Networks nets(c);
    std::mt19937_64 rng(seed);
    nets.init(rng);
    return nets;
}

nn::Tensor random_vec(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return nn::Tensor::vec(v);
}

// Checks sampled parameter coordinates of one scalar loss against central
// finite differences. Returns the worst relative error seen.
double fd_check(nn::Networks& nets, const std::function<double(num::Tape*)>& loss,
                std::mt19937_64& rng, int coords_per_param) {
    for (auto* p : nets.all_params()) p->zero_grad();
    num::Tape tape;
    loss(&tape);  // records and runs backward
    const double step = 1e-5;
    double worst = 0.0;
    for (auto* p : nets.all_params()) {
        for (int c = 0; c < coords_per_param; ++c) {
            int i = static_cast<int>(rng() % p->size());
            double keep = p->value[i];
            p->value[i] = keep + step;
            double lp = loss(nullptr);
            p->value[i] = keep - step;
            double lm = loss(nullptr);
            p->value[i] = keep;
            double fd = (lp - lm) / (2.0 * step);
            double denom = std::max({std::abs(fd), std::abs(p->grad[i]), 1e-3});
            worst = std::max(worst, std::abs(fd - p->grad[i]) / denom);
        }
    }
    return worst;
}

bool gradient_suite() {
    std::mt19937_64 rng(606);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        auto nets = tiny_nets(1000 + inst);
        nn::Tensor obs0 = random_vec(6, rng);
        nn::Tensor obs1 = random_vec(6, rng);
        // policy head
        worst = std::max(worst, fd_check(
            nets,
            [&](num::Tape* tape) {
                nn::Tensor h = nn::encode(tape, nets, obs0);
                nn::Tensor peer = nn::encode(tape, nets, obs1);
                auto out = nn::policy_forward(tape, nets, h, {peer}, {1});
                nn::Tensor l =
                    num::scale(tape, num::log_t(tape, num::pick(tape, out.probs, 0)), -1.0);
                if (tape) tape->backward(l);
                return l.item();
            },
            rng, 1));
        // value head
        worst = std::max(worst, fd_check(
            nets,
            [&](num::Tape* tape) {
                nn::Tensor h = nn::encode(tape, nets, obs0);
                nn::Tensor peer = nn::encode(tape, nets, obs1);
                nn::Tensor v = nn::critic_forward(tape, nets, h, {peer}, {-1});
                nn::Tensor l = num::square(tape, v);
                if (tape) tape->backward(l);
                return l.item();
            },
            rng, 1));
        // world-model heads
        worst = std::max(worst, fd_check(
            nets,
            [&](num::Tape* tape) {
                nn::Tensor h0 = nn::encode(tape, nets, obs0);
                nn::Tensor h1 = nn::encode(tape, nets, obs1);
                auto out = nn::world_forward(tape, nets, {h0, h1}, {2, 0});
                std::vector<nn::Tensor> parts = out.next_obs;
                parts.push_back(out.reward);
                nn::Tensor l =
                    num::sum(tape, num::square(tape, num::concat(tape, parts)));
                if (tape) tape->backward(l);
                return l.item();
            },
            rng, 1));
    }
    std::printf("         worst relative gradient error: %.3g\n", worst);
    return worst <= 1e-4;
}

// ---------------------------------------------------------------------------

struct Criterion {
    std::string label;
    bool pass = false;
};

}  // namespace

int main() {
    std::vector<Criterion> results(9);

    // --- Criteria 1, 2: matrix-game order effect -----------------------------
    {
        int fixed_hits = 0, sim_hits = 0;
        double fixed_mean = 0.0, sim_mean = 0.0, seq_mean = 0.0;
        double worst_seed_s = 0.0;
        std::vector<MatrixRun> fixed_runs;
        for (uint64_t seed = 1; seed <= 10; ++seed) {
            auto f = run_matrix(OrderingMode::FixedOrder, seed, {0, 1});  // A decides first
            auto s = run_matrix(OrderingMode::Simultaneous, seed);
            auto q = run_matrix(OrderingMode::SeqComm, seed);
            fixed_hits += f.final_return >= 11.5 ? 1 : 0;
            sim_hits += s.final_return <= 9.0 ? 1 : 0;
            fixed_mean += f.final_return;
            sim_mean += s.final_return;
            seq_mean += q.final_return;
            worst_seed_s = std::max({worst_seed_s, f.seconds, s.seconds, q.seconds});
            fixed_runs.push_back(std::move(f));
        }
        fixed_mean /= 10.0;
        sim_mean /= 10.0;
        seq_mean /= 10.0;
        std::printf("         matrix: fixed >=11.5 in %d/10, simultaneous <=9.0 in %d/10, "
                    "means fixed=%.2f sim=%.2f seqcomm=%.2f, worst seed %.1fs\n",
                    fixed_hits, sim_hits, fixed_mean, sim_mean, seq_mean, worst_seed_s);
        results[0] = {"matrix-game order effect (FixedOrder high, Simultaneous trapped)",
                      fixed_hits >= 7 && sim_hits >= 7 && worst_seed_s <= 120.0};
        results[1] = {"dynamic ordering helps (SeqComm mean >= Simultaneous mean)",
                      seq_mean >= sim_mean};

        // --- Criterion 9: monotonicity after the first 20% of training -------
        double frac_acc = 0.0;
        for (const auto& run : fixed_runs) {
            std::vector<double> tail;
            for (size_t i = 0; i < run.eval_steps.size(); ++i)
                if (run.eval_steps[i] >= 0.2 * matrix_cfg().total_steps)
                    tail.push_back(run.eval_returns[i]);
            frac_acc += analysis::monotonicity_report(tail).fraction;
        }
        frac_acc /= fixed_runs.size();
        std::printf("         monotonicity fraction after 20%% of training: %.3f\n", frac_acc);
        results[8] = {"evaluation returns mostly nondecreasing after early training",
                      frac_acc >= 0.8};
    }

    // --- Criterion 3: ordering ablation on cooperative navigation ------------
    {
        env::ParticleSpec spec;
        spec.n_agents = 3;
        spec.episode_len = 20;
        struct ModeResult {
            double mean = 0.0;
            double seconds = 0.0;
        };
        auto run_mode = [&](OrderingMode mode) {
            ModeResult mr;
            double t0 = now_s();
            for (uint64_t seed = 1; seed <= 5; ++seed) {
                train::Trainer t(std::make_unique<env::ParticleEnv>(spec), mode, {},
                                 particle_cfg(), seed);
                auto res = t.run();
                mr.mean += final10_mean(res.eval_returns);
            }
            mr.mean /= 5.0;
            mr.seconds = now_s() - t0;
            return mr;
        };
        auto seq = run_mode(OrderingMode::SeqComm);
        auto rnd = run_mode(OrderingMode::RandomOrder);
        auto noc = run_mode(OrderingMode::NoComm);
        std::printf("         navigation final-10 means: seqcomm=%.2f random=%.2f nocomm=%.2f "
                    "(mode times %.0fs/%.0fs/%.0fs)\n",
                    seq.mean, rnd.mean, noc.mean, seq.seconds, rnd.seconds, noc.seconds);
        results[2] = {"navigation ablation (SeqComm >= RandomOrder and >= NoComm)",
                      seq.mean >= rnd.mean && seq.mean >= noc.mean &&
                          std::max({seq.seconds, rnd.seconds, noc.seconds}) <= 2700.0};
    }

    // --- Criterion 4: world-model learnability --------------------------------
    {
        env::ParticleSpec spec;
        spec.n_agents = 3;
        auto env_p = std::make_unique<env::ParticleEnv>(spec);
        std::mt19937_64 rng(404);
        train::WmDataset data;
        auto obs = env_p->reset(rng());
        while (data.size() < 20000) {
            train::WmSample s;
            s.obs = obs;
            for (int i = 0; i < 3; ++i) s.actions.push_back(static_cast<int>(rng() % 5));
            auto sr = env_p->step(s.actions);
            s.next_obs = sr.observations;
            s.reward = sr.reward;
            data.push_back(std::move(s));
            obs = sr.done ? env_p->reset(rng()) : sr.observations;
        }
        std::shuffle(data.begin(), data.end(), rng);
        train::WmDataset tr(data.begin(), data.begin() + 18000);
        train::WmDataset te(data.begin() + 18000, data.end());

        nn::NetConfig nc;
        nc.obs_width = env_p->obs_width();
        nc.n_actions = 5;
        nn::Networks nets(nc);
        std::mt19937_64 init_rng(1);
        nets.init(init_rng);
        num::Adam opt(nets.world_params(), num::AdamConfig{.lr = 1e-3});

        double initial = train::world_model_loss(nets, te);
        double held_out = initial;
        for (int epoch = 0; epoch < 5 && held_out > 0.5 * initial; ++epoch) {
            train::world_model_epoch(nets, opt, tr, 256, rng);
            held_out = train::world_model_loss(nets, te);
        }
        std::printf("         held-out world-model loss: %.4f -> %.4f (%.1f%%)\n", initial,
                    held_out, 100.0 * held_out / initial);
        results[3] = {"world model halves the held-out regression loss",
                      held_out <= 0.5 * initial};
    }

    // --- Criterion 5: oracle equivalences -------------------------------------
    {
        bool ok = true;
        std::mt19937_64 rng(505);
        std::uniform_real_distribution<double> ur(-10.0, 10.0), ug(0.01, 1.0);
        for (int c = 0; c < 1000 && ok; ++c) {
            int H = 1 + static_cast<int>(rng() % 30);
            double gamma = ug(rng);
            std::vector<double> r(H);
            for (auto& v : r) v = ur(rng);
            double expect = 0.0;
            for (int i = 1; i <= H; ++i) expect += std::pow(gamma, i - 1) * r[i - 1];
            expect /= H;
            ok = std::abs(proto::trajectory_value(r, gamma, H) - expect) <= 1e-9;
        }
        std::uniform_real_distribution<double> ue(0.0, 1.0), urm(0.1, 10.0), ugg(0.05, 0.99);
        for (int c = 0; c < 1000 && ok; ++c) {
            analysis::BoundInputs in;
            in.gamma = ugg(rng);
            in.r_max = urm(rng);
            in.epsilon_m = ue(rng);
            double sum_pi = 0.0;
            int levels = 1 + static_cast<int>(rng() % 6);
            for (int i = 0; i < levels; ++i) {
                in.epsilon_pi.push_back(ue(rng));
                sum_pi += in.epsilon_pi.back();
            }
            double om = 1.0 - in.gamma;
            double expect =
                2.0 * in.gamma * in.r_max * (in.epsilon_m + 2.0 * sum_pi) / (om * om) +
                4.0 * in.r_max * sum_pi / om;
            ok = std::abs(analysis::theorem_bound(in) - expect) <=
                 1e-12 * std::max(1.0, expect);
        }
        ok = ok && analysis::tv_distance({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == 0.0 &&
             analysis::tv_distance({1.0, 0.0}, {0.0, 1.0}) == 1.0 &&
             analysis::tv_distance({1.0, 0.0}, {0.5, 0.5}) == 0.5;
        results[4] = {"oracle equivalences (trajectory value, bound, TV distance)", ok};
    }

    // --- Criterion 6: gradient suite -------------------------------------------
    results[5] = {"finite-difference gradient checks on every head", gradient_suite()};

    // --- Criterion 7: protocol accounting ---------------------------------------
    {
        bool ok = true;
        for (int n = 2; n <= 8; ++n) {
            auto neg = proto::count_messages(n, proto::Phase::Negotiation);
            auto launch = proto::count_messages(n, proto::Phase::Launching);
            long values = 0;
            for (int k = 1; k <= n - 1; ++k) values += n - k + 1;
            ok = ok && neg.hidden_state_msgs == n && neg.intention_value_msgs == values &&
                 launch.action_msgs == n * (n - 1) / 2;
        }
        results[6] = {"protocol message accounting for n in 2..8", ok};
    }

    // --- Criterion 8: invariance suite ------------------------------------------
    {
        bool ok = true;
        std::mt19937_64 rng(808);
        std::uniform_real_distribution<double> u(-20.0, 20.0);
        // softmax normalization and shift invariance
        for (int c = 0; c < 200 && ok; ++c) {
            int n = 1 + static_cast<int>(rng() % 7);
            std::vector<double> logits(n);
            for (auto& v : logits) v = u(rng);
            auto p = num::softmax(nullptr, nn::Tensor::vec(logits));
            double s = 0.0;
            for (double v : p.data) s += v;
            ok = std::abs(s - 1.0) <= 1e-9;
            int best = proto::argmax_index(logits);
            for (auto& v : logits) v += 7.25;
            ok = ok && proto::argmax_index(logits) == best;
        }
        // attention weight normalization
        auto nets = tiny_nets(88);
        for (int c = 0; c < 100 && ok; ++c) {
            int m = 1 + static_cast<int>(rng() % 4);
            std::vector<nn::Tensor> entries;
            for (int j = 0; j < m; ++j) entries.push_back(random_vec(8 + 3, rng));
            auto res = nn::attend(nullptr, nets.am_a, 4, random_vec(8, rng), entries);
            double s = 0.0;
            for (double w : res.weights.data) s += w;
            ok = std::abs(s - 1.0) <= 1e-9;
        }
        // priority search always yields a permutation
        for (int c = 0; c < 20 && ok; ++c) {
            auto pn = tiny_nets(200 + c);
            std::vector<nn::Tensor> h;
            int n = 2 + static_cast<int>(rng() % 3);
            for (int i = 0; i < n; ++i) h.push_back(random_vec(8, rng));
            proto::RolloutModel model{pn, 0.95, 3, 2};
            std::mt19937_64 r(c);
            ok = proto::is_permutation(proto::determine_priority(model, h, r), n);
        }
        // fixed-seed training reruns are bit-identical
        if (ok) {
            train::PpoConfig cfg = matrix_cfg();
            cfg.total_steps = 512;
            train::Trainer a(std::make_unique<env::MatrixGame>(), OrderingMode::SeqComm, {},
                             cfg, 99);
            train::Trainer b(std::make_unique<env::MatrixGame>(), OrderingMode::SeqComm, {},
                             cfg, 99);
            auto ra = a.run();
            auto rb = b.run();
            ok = ra.eval_steps == rb.eval_steps && ra.eval_returns == rb.eval_returns &&
                 ra.order_hist == rb.order_hist;
        }
        results[7] = {"invariance suite (normalization, shift, permutation, determinism)", ok};
    }

    // --- Report ---------------------------------------------------------------
    bool all = true;
    for (int i = 0; i < 9; ++i) {
        std::printf("criterion %d: %s - %s\n", i + 1, results[i].pass ? "PASS" : "FAIL",
                    results[i].label.c_str());
        all = all && results[i].pass;
    }
    return all ? 0 : 1;
}

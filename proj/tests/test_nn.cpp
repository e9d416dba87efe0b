#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "seqcomm/nets.hpp"

using namespace seqcomm;
using nn::NetConfig;
using nn::Networks;
using nn::Tensor;

namespace {

NetConfig matrix_cfg() {
    NetConfig c;
    c.obs_width = 2;
    c.n_actions = 3;
    return c;
}

NetConfig particle_cfg(int n_agents = 3) {
    NetConfig c;
    c.obs_width = 4 + 2 * n_agents;
    c.n_actions = 5;
    return c;
}

// Small configuration so finite-difference sweeps stay fast.
NetConfig tiny_cfg() {
    NetConfig c;
    c.obs_width = 6;
    c.n_actions = 3;
    c.hidden = 8;
    c.d_k = 4;
    c.ctx = 8;
    c.mlp_hidden = 10;
    c.act_embed = 4;
    return c;
}

Tensor random_vec(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return Tensor::vec(v);
}

void check_grads_fd(Networks& nets, const std::function<double(num::Tape*)>& loss,
                    std::mt19937_64& rng, int probes_per_param = 2) {
    for (auto* p : nets.all_params()) p->zero_grad();
    num::Tape tape;
    loss(&tape);  // the loss callback runs backward() when given a tape
    const double step = 1e-5;
    for (auto* p : nets.all_params()) {
        for (int probe = 0; probe < probes_per_param; ++probe) {
            int i = static_cast<int>(rng() % p->size());
            double keep = p->value[i];
            p->value[i] = keep + step;
            double lp = loss(nullptr);
            p->value[i] = keep - step;
            double lm = loss(nullptr);
            p->value[i] = keep;
            double fd = (lp - lm) / (2.0 * step);
            double denom = std::max({std::abs(fd), std::abs(p->grad[i]), 1e-3});
            CHECK(std::abs(fd - p->grad[i]) / denom <= 1e-4);
        }
    }
}

}  // namespace

TEST_CASE("encode") {
    Networks nets(matrix_cfg());
    std::mt19937_64 rng(1);
    nets.init(rng);
    Tensor obs = Tensor::vec({1.0, 0.0});

    SUBCASE("width is the configured hidden size") {
        CHECK(nn::encode(nullptr, nets, obs).size() == 48);
    }
    SUBCASE("zero weights map to a zero hidden state") {
        std::fill(nets.enc_w.value.begin(), nets.enc_w.value.end(), 0.0);
        std::fill(nets.enc_b.value.begin(), nets.enc_b.value.end(), 0.0);
        for (double v : nn::encode(nullptr, nets, obs).data) CHECK(v == 0.0);
    }
    SUBCASE("deterministic") {
        auto a = nn::encode(nullptr, nets, obs);
        auto b = nn::encode(nullptr, nets, obs);
        for (int i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
    }
    SUBCASE("width mismatch rejected") {
        CHECK_THROWS_AS(nn::encode(nullptr, nets, Tensor::vec({1.0, 0.0, 0.0})),
                        std::invalid_argument);
    }
}

TEST_CASE("attend") {
    SUBCASE("single entry gets weight one and its value projection as context") {
        nn::AttentionParams p;
        p.q_w = num::Parameter("q.w", {1, 4});
        p.q_b = num::Parameter("q.b", {4});
        p.k_w = num::Parameter("k.w", {1, 4});
        p.k_b = num::Parameter("k.b", {4});
        p.v_w = num::Parameter("v.w", {1, 2});
        p.v_b = num::Parameter("v.b", {2});
        std::mt19937_64 rng(3);
        for (auto* q : {&p.q_w, &p.k_w, &p.v_w}) q->init_uniform(rng, 2);
        p.v_b.value = {0.5, -0.25};
        Tensor entry = Tensor::vec({0.7});
        auto res = nn::attend(nullptr, p, 4, Tensor::vec({1.0}), {entry});
        CHECK(res.weights.size() == 1);
        CHECK(res.weights.data[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(res.context.data[0] ==
              doctest::Approx(0.7 * p.v_w.value[0] + 0.5).epsilon(1e-12));
        CHECK(res.context.data[1] ==
              doctest::Approx(0.7 * p.v_w.value[1] - 0.25).epsilon(1e-12));
    }
    SUBCASE("identical entries get uniform weights") {
        Networks nets(matrix_cfg());
        std::mt19937_64 rng(4);
        nets.init(rng);
        Tensor h = random_vec(48, rng);
        Tensor e = random_vec(48 + 3, rng);
        auto res = nn::attend(nullptr, nets.am_a, nets.cfg.d_k, h, {e, e, e, e});
        for (double w : res.weights.data) CHECK(w == doctest::Approx(0.25).epsilon(1e-10));
    }
    SUBCASE("hand-set projections give weights two-thirds and one-third") {
        nn::AttentionParams p;
        p.q_w = num::Parameter("q.w", {1, 4});
        p.q_b = num::Parameter("q.b", {4});
        p.k_w = num::Parameter("k.w", {1, 4});
        p.k_b = num::Parameter("k.b", {4});
        p.v_w = num::Parameter("v.w", {1, 2});
        p.v_b = num::Parameter("v.b", {2});
        p.q_w.value = {1.0, 0.0, 0.0, 0.0};
        // dot products: entry [1] -> ln2 * sqrt(d_k), entry [0] -> 0
        p.k_w.value = {std::log(2.0) * 2.0, 0.0, 0.0, 0.0};
        p.v_w.value = {1.0, 0.0};
        p.v_b.value = {0.0, 5.0};
        auto res = nn::attend(nullptr, p, 4, Tensor::vec({1.0}),
                              {Tensor::vec({1.0}), Tensor::vec({0.0})});
        CHECK(res.weights.data[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(res.weights.data[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(res.context.data[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(res.context.data[1] == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("weights sum to one on random inputs") {
        Networks nets(particle_cfg());
        std::mt19937_64 rng(5);
        nets.init(rng);
        for (int c = 0; c < 50; ++c) {
            int m = 1 + static_cast<int>(rng() % 5);
            std::vector<Tensor> entries;
            for (int j = 0; j < m; ++j) entries.push_back(random_vec(48 + 5, rng));
            auto res = nn::attend(nullptr, nets.am_a, nets.cfg.d_k, random_vec(48, rng), entries);
            double s = 0.0;
            for (double w : res.weights.data) {
                CHECK(w >= 0.0);
                s += w;
            }
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
    SUBCASE("empty entry list rejected") {
        Networks nets(matrix_cfg());
        std::mt19937_64 rng(6);
        nets.init(rng);
        CHECK_THROWS_AS(nn::attend(nullptr, nets.am_a, nets.cfg.d_k, random_vec(48, rng), {}),
                        std::invalid_argument);
    }
}

TEST_CASE("message layout") {
    Tensor h = Tensor::vec({0.1, 0.2});
    auto known = nn::message(nullptr, h, 1, 3);
    CHECK(known.data == std::vector<double>{0.1, 0.2, 0.0, 1.0, 0.0});
    auto unknown = nn::message(nullptr, h, -1, 3);
    CHECK(unknown.data == std::vector<double>{0.1, 0.2, 0.0, 0.0, 0.0});
    CHECK_THROWS_AS(nn::message(nullptr, h, 3, 3), std::invalid_argument);
}

TEST_CASE("policy head") {
    std::mt19937_64 rng(7);
    SUBCASE("matrix configuration yields 3 action probabilities") {
        Networks nets(matrix_cfg());
        nets.init(rng);
        auto out = nn::policy_forward(nullptr, nets, random_vec(48, rng), {}, {});
        CHECK(out.probs.size() == 3);
        double s = 0.0;
        for (double v : out.probs.data) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    SUBCASE("particle configuration yields 5 action probabilities") {
        Networks nets(particle_cfg());
        nets.init(rng);
        auto out = nn::policy_forward(nullptr, nets, random_vec(48, rng),
                                      {random_vec(48, rng)}, {2});
        CHECK(out.probs.size() == 5);
    }
    SUBCASE("changing one upper action changes the logits on most random nets") {
        int changed = 0;
        for (int trial = 0; trial < 20; ++trial) {
            Networks nets(matrix_cfg());
            std::mt19937_64 trial_rng(100 + trial);
            nets.init(trial_rng);
            Tensor h = random_vec(48, trial_rng);
            Tensor peer = random_vec(48, trial_rng);
            auto a = nn::policy_forward(nullptr, nets, h, {peer}, {0});
            auto b = nn::policy_forward(nullptr, nets, h, {peer}, {2});
            bool differs = false;
            for (int i = 0; i < a.logits.size(); ++i)
                if (a.logits.data[i] != b.logits.data[i]) differs = true;
            changed += differs ? 1 : 0;
        }
        CHECK(changed >= 19);
    }
}

TEST_CASE("world model head") {
    std::mt19937_64 rng(8);
    SUBCASE("n=3 with obs width 10 predicts widths (30, 1)") {
        Networks nets(particle_cfg(3));
        nets.init(rng);
        std::vector<Tensor> h = {random_vec(48, rng), random_vec(48, rng), random_vec(48, rng)};
        auto out = nn::world_forward(nullptr, nets, h, {0, 1, 2});
        REQUIRE(out.next_obs.size() == 3);
        int total = 0;
        for (const auto& o : out.next_obs) total += o.size();
        CHECK(total == 30);
        CHECK(out.reward.size() == 1);
    }
    SUBCASE("deterministic") {
        Networks nets(particle_cfg(3));
        nets.init(rng);
        std::vector<Tensor> h = {random_vec(48, rng), random_vec(48, rng), random_vec(48, rng)};
        auto a = nn::world_forward(nullptr, nets, h, {1, 1, 4});
        auto b = nn::world_forward(nullptr, nets, h, {1, 1, 4});
        CHECK(a.reward.item() == b.reward.item());
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < a.next_obs[i].size(); ++j)
                CHECK(a.next_obs[i].data[j] == b.next_obs[i].data[j]);
    }
    SUBCASE("agent count is not baked into the parameters") {
        Networks nets(particle_cfg(3));
        nets.init(rng);
        std::vector<Tensor> h5, h3;
        for (int i = 0; i < 5; ++i) h5.push_back(random_vec(48, rng));
        for (int i = 0; i < 3; ++i) h3.push_back(random_vec(48, rng));
        auto out5 = nn::world_forward(nullptr, nets, h5, {0, 1, 2, 3, 4});
        auto out3 = nn::world_forward(nullptr, nets, h3, {0, 1, 2});
        CHECK(out5.next_obs.size() == 5);
        CHECK(out3.next_obs.size() == 3);
    }
    SUBCASE("hidden/action count mismatch rejected") {
        Networks nets(particle_cfg(3));
        nets.init(rng);
        std::vector<Tensor> h = {random_vec(48, rng), random_vec(48, rng)};
        CHECK_THROWS_AS(nn::world_forward(nullptr, nets, h, {0, 1, 2}), std::invalid_argument);
    }
}

TEST_CASE("per-head gradients match finite differences") {
    std::mt19937_64 rng(9);
    for (int inst = 0; inst < 5; ++inst) {
        Networks nets(tiny_cfg());
        nets.init(rng);
        Tensor obs0 = random_vec(6, rng);
        Tensor obs1 = random_vec(6, rng);

        // policy head: negative log-likelihood of action 0
        check_grads_fd(
            nets,
            [&](num::Tape* tape) {
                Tensor h = nn::encode(tape, nets, obs0);
                Tensor peer = nn::encode(tape, nets, obs1);
                auto out = nn::policy_forward(tape, nets, h, {peer}, {1});
                Tensor l = num::scale(tape, num::log_t(tape, num::pick(tape, out.probs, 0)), -1.0);
                if (tape) tape->backward(l);
                return l.item();
            },
            rng);

        // critic head: squared value
        for (auto* p : nets.all_params()) p->zero_grad();
        check_grads_fd(
            nets,
            [&](num::Tape* tape) {
                Tensor h = nn::encode(tape, nets, obs0);
                Tensor peer = nn::encode(tape, nets, obs1);
                Tensor v = nn::critic_forward(tape, nets, h, {peer}, {-1});
                Tensor l = num::square(tape, v);
                if (tape) tape->backward(l);
                return l.item();
            },
            rng);

        // world model head: sum of squared outputs
        for (auto* p : nets.all_params()) p->zero_grad();
        check_grads_fd(
            nets,
            [&](num::Tape* tape) {
                Tensor h0 = nn::encode(tape, nets, obs0);
                Tensor h1 = nn::encode(tape, nets, obs1);
                auto out = nn::world_forward(tape, nets, {h0, h1}, {2, 0});
                std::vector<Tensor> parts = out.next_obs;
                parts.push_back(out.reward);
                Tensor l = num::sum(tape, num::square(tape, num::concat(tape, parts)));
                if (tape) tape->backward(l);
                return l.item();
            },
            rng);
    }
}

TEST_CASE("parameter sharing: one parameter set serves every agent") {
    Networks nets(particle_cfg(3));
    std::mt19937_64 rng(10);
    nets.init(rng);
    // the same parameters produce outputs for arbitrarily many agents
    auto named = nets.named_params();
    CHECK(named.size() == 32);
    for (auto& [name, p] : named) CHECK(p->size() > 0);
}

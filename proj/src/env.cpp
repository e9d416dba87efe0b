#include "seqcomm/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace seqcomm::env {

const std::array<std::array<double, 3>, 3> MatrixGame::kPayoff = {{
    {{12.0, 6.0, 6.0}},
    {{-6.0, 8.0, 0.0}},
    {{-6.0, 0.0, 8.0}},
}};

std::vector<std::vector<double>> MatrixGame::reset(uint64_t) {
    t_ = 0;
    // Observations carry only the agent's own role id.
    return {{1.0, 0.0}, {0.0, 1.0}};
}

StepResult MatrixGame::step(const std::vector<int>& joint_action) {
    if (joint_action.size() != 2) throw std::invalid_argument("MatrixGame::step: need 2 actions");
    for (int a : joint_action)
        if (a < 0 || a >= 3) throw std::invalid_argument("MatrixGame::step: action out of range");
    if (t_ >= 1) throw std::invalid_argument("MatrixGame::step: episode already finished");
    ++t_;
    StepResult res;
    res.reward = kPayoff[joint_action[0]][joint_action[1]];
    res.done = true;
    res.observations = {{1.0, 0.0}, {0.0, 1.0}};
    return res;
}

ParticleEnv::ParticleEnv(const ParticleSpec& spec) : spec_(spec) {
    if (spec_.n_agents < 1) throw std::invalid_argument("ParticleEnv: need at least one agent");
    pos_.assign(spec_.n_agents, {0.0, 0.0});
    vel_.assign(spec_.n_agents, {0.0, 0.0});
    landmarks_.assign(spec_.n_agents, {0.0, 0.0});
}

std::vector<std::vector<double>> ParticleEnv::reset(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-spec_.spawn_bound, spec_.spawn_bound);
    for (auto& p : pos_) {
        p[0] = dist(rng);
        p[1] = dist(rng);
    }
    for (auto& v : vel_) v = {0.0, 0.0};
    for (auto& l : landmarks_) {
        l[0] = dist(rng);
        l[1] = dist(rng);
    }
    t_ = 0;
    std::vector<std::vector<double>> obs;
    obs.reserve(spec_.n_agents);
    for (int i = 0; i < spec_.n_agents; ++i) obs.push_back(observation(i));
    return obs;
}

StepResult ParticleEnv::step(const std::vector<int>& joint_action) {
    if (static_cast<int>(joint_action.size()) != spec_.n_agents)
        throw std::invalid_argument("ParticleEnv::step: one action per agent required");
    static const std::array<std::array<double, 2>, 5> kMoves = {{
        {{0.0, 0.0}}, {{0.0, 1.0}}, {{0.0, -1.0}}, {{-1.0, 0.0}}, {{1.0, 0.0}},
    }};
    for (int a : joint_action)
        if (a < 0 || a >= 5) throw std::invalid_argument("ParticleEnv::step: action out of range");
    if (t_ >= spec_.episode_len)
        throw std::invalid_argument("ParticleEnv::step: episode already finished");
    for (int i = 0; i < spec_.n_agents; ++i) {
        double dx = kMoves[joint_action[i]][0] * spec_.step_size;
        double dy = kMoves[joint_action[i]][1] * spec_.step_size;
        double nx = std::clamp(pos_[i][0] + dx, -1.0, 1.0);
        double ny = std::clamp(pos_[i][1] + dy, -1.0, 1.0);
        vel_[i] = {nx - pos_[i][0], ny - pos_[i][1]};
        pos_[i] = {nx, ny};
    }
    ++t_;
    StepResult res;
    res.reward = team_reward();
    res.done = t_ >= spec_.episode_len;
    res.observations.reserve(spec_.n_agents);
    for (int i = 0; i < spec_.n_agents; ++i) res.observations.push_back(observation(i));
    return res;
}

double ParticleEnv::team_reward() const {
    double total = 0.0;
    for (const auto& l : landmarks_) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : pos_) {
            double d = std::hypot(l[0] - p[0], l[1] - p[1]);
            best = std::min(best, d);
        }
        total -= best;
    }
    double collide_dist = 2.0 * spec_.agent_radius;
    for (int i = 0; i < spec_.n_agents; ++i)
        for (int j = i + 1; j < spec_.n_agents; ++j) {
            double d = std::hypot(pos_[i][0] - pos_[j][0], pos_[i][1] - pos_[j][1]);
            if (d < collide_dist) total += spec_.collision_reward;
        }
    return total;
}

std::vector<double> ParticleEnv::observation(int agent) const {
    std::vector<double> o;
    o.reserve(obs_width());
    o.push_back(pos_[agent][0]);
    o.push_back(pos_[agent][1]);
    o.push_back(vel_[agent][0]);
    o.push_back(vel_[agent][1]);
    for (const auto& l : landmarks_) {
        o.push_back(l[0] - pos_[agent][0]);
        o.push_back(l[1] - pos_[agent][1]);
    }
    return o;
}

void ParticleEnv::set_agent_position(int agent, double x, double y) {
    pos_.at(agent) = {x, y};
}

void ParticleEnv::set_landmark(int idx, double x, double y) {
    landmarks_.at(idx) = {x, y};
}

double team_reward(const Env& e) {
    if (const auto* p = dynamic_cast<const ParticleEnv*>(&e)) return p->team_reward();
    throw std::logic_error("team_reward: unsupported for this environment");
}

}  // namespace seqcomm::env

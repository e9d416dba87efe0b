#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace seqcomm::env {

struct StepResult {
    std::vector<std::vector<double>> observations;
    double reward = 0.0;
    bool done = false;
};

// Shared environment surface for the one-step matrix game and the particle
// navigation task. Observations are strictly local: an agent's observation
// never contains another agent's position.
class Env {
public:
    virtual ~Env() = default;
    virtual int n_agents() const = 0;
    virtual int n_actions() const = 0;
    virtual int obs_width() const = 0;
    virtual int episode_len() const = 0;
    virtual std::vector<std::vector<double>> reset(uint64_t seed) = 0;
    virtual StepResult step(const std::vector<int>& joint_action) = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
};

// One-step 3x3 cooperative game with a 12-payoff global optimum flanked by
// two 8-payoff local optima. Each agent observes only its own role id.
class MatrixGame final : public Env {
public:
    static const std::array<std::array<double, 3>, 3> kPayoff;

    int n_agents() const override { return 2; }
    int n_actions() const override { return 3; }
    int obs_width() const override { return 2; }
    int episode_len() const override { return 1; }
    std::vector<std::vector<double>> reset(uint64_t seed) override;
    StepResult step(const std::vector<int>& joint_action) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<MatrixGame>(*this); }

private:
    int t_ = 0;
};

struct ParticleSpec {
    int n_agents = 3;               // n_landmarks == n_agents
    double agent_radius = 0.15;
    double landmark_radius = 0.05;
    double step_size = 0.1;         // displacement per move action
    int episode_len = 20;
    double collision_reward = -1.0;
    double spawn_bound = 0.9;       // initial positions uniform in [-0.9, 0.9]^2
};

// Simplified cooperative navigation: n agents cover n landmarks under a
// shared reward of minus the summed landmark-to-nearest-agent distances plus
// a collision penalty. Movement is constant-step displacement clamped to
// [-1, 1]^2; collisions penalize but do not block.
class ParticleEnv final : public Env {
public:
    explicit ParticleEnv(const ParticleSpec& spec);

    int n_agents() const override { return spec_.n_agents; }
    int n_actions() const override { return 5; }  // stay, up, down, left, right
    int obs_width() const override { return 4 + 2 * spec_.n_agents; }
    int episode_len() const override { return spec_.episode_len; }
    std::vector<std::vector<double>> reset(uint64_t seed) override;
    StepResult step(const std::vector<int>& joint_action) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<ParticleEnv>(*this); }

    // -sum_i d_i + C * collision_reward over the current positions.
    double team_reward() const;

    const std::vector<std::array<double, 2>>& agent_positions() const { return pos_; }
    const std::vector<std::array<double, 2>>& landmarks() const { return landmarks_; }
    void set_agent_position(int agent, double x, double y);
    void set_landmark(int idx, double x, double y);

private:
    std::vector<double> observation(int agent) const;

    ParticleSpec spec_;
    std::vector<std::array<double, 2>> pos_;
    std::vector<std::array<double, 2>> vel_;
    std::vector<std::array<double, 2>> landmarks_;
    int t_ = 0;
};

// Team reward of the current state; only the particle task defines one
// outside of step(). Throws std::logic_error for other environments.
double team_reward(const Env& e);

}  // namespace seqcomm::env

#pragma once

#include <vector>

#include "seqcomm/nets.hpp"
#include "seqcomm/protocol.hpp"

namespace seqcomm::analysis {

// Inputs to the model-vs-true-return gap: a transition TV-error bound, one
// policy TV bound per decision level, the discount, and the reward ceiling.
struct BoundInputs {
    double epsilon_m = 0.0;
    std::vector<double> epsilon_pi;  // one entry per level
    double gamma = 0.95;
    double r_max = 1.0;
    bool epsilon_m_is_proxy = false;  // true when derived from MSE, not TV
};

// C = 2*gamma*r_max*(eps_m + 2*sum(eps_pi)) / (1-gamma)^2
//   + 4*r_max*sum(eps_pi) / (1-gamma).
double theorem_bound(const BoundInputs& in);

// Half L1 distance between two discrete distributions.
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

// One recorded transition used to probe policy/model divergence.
struct ProbeSample {
    std::vector<std::vector<double>> joint_obs;
    std::vector<int> joint_actions;
    proto::OrderSequence order;
    std::vector<std::vector<double>> next_joint_obs;
    double reward = 0.0;
};

// eps_pi per level = max over probe states of the TV distance between the
// old and new level-k action distributions (conditioned on the recorded
// upper actions); eps_m = the new world model's mean squared prediction
// error, reported as a labeled proxy rather than a true TV bound.
BoundInputs estimate_divergences(nn::Networks& old_nets, nn::Networks& new_nets,
                                 const std::vector<ProbeSample>& probe, double gamma,
                                 double r_max);

struct MonotonicityReport {
    std::vector<bool> nondecreasing;  // one flag per consecutive pair
    double fraction = 0.0;
};

MonotonicityReport monotonicity_report(const std::vector<double>& returns);

}  // namespace seqcomm::analysis

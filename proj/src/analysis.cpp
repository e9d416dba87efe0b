#include "seqcomm/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace seqcomm::analysis {

using nn::Tensor;

double theorem_bound(const BoundInputs& in) {
    if (!(in.gamma > 0.0 && in.gamma < 1.0))
        throw std::invalid_argument("theorem_bound: gamma must be in (0, 1)");
    if (in.epsilon_m < 0.0 || in.r_max <= 0.0)
        throw std::invalid_argument("theorem_bound: nonnegative eps_m and positive r_max required");
    double sum_pi = 0.0;
    for (double e : in.epsilon_pi) {
        if (e < 0.0) throw std::invalid_argument("theorem_bound: negative eps_pi");
        sum_pi += e;
    }
    double one_minus = 1.0 - in.gamma;
    return 2.0 * in.gamma * in.r_max * (in.epsilon_m + 2.0 * sum_pi) / (one_minus * one_minus) +
           4.0 * in.r_max * sum_pi / one_minus;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty())
        throw std::invalid_argument("tv_distance: distributions must match and be nonempty");
    double sp = 0.0, sq = 0.0, acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0)
            throw std::invalid_argument("tv_distance: negative probability");
        sp += p[i];
        sq += q[i];
        acc += std::abs(p[i] - q[i]);
    }
    if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6)
        throw std::invalid_argument("tv_distance: inputs must sum to 1");
    return 0.5 * acc;
}

BoundInputs estimate_divergences(nn::Networks& old_nets, nn::Networks& new_nets,
                                 const std::vector<ProbeSample>& probe, double gamma,
                                 double r_max) {
    if (probe.empty()) throw std::invalid_argument("estimate_divergences: empty probe batch");
    int n = static_cast<int>(probe.front().joint_obs.size());
    BoundInputs out;
    out.gamma = gamma;
    out.r_max = r_max;
    out.epsilon_pi.assign(n, 0.0);
    out.epsilon_m_is_proxy = true;

    double mse_acc = 0.0;
    long mse_count = 0;
    for (const auto& s : probe) {
        std::vector<Tensor> h_old, h_new;
        h_old.reserve(n);
        h_new.reserve(n);
        for (int i = 0; i < n; ++i) {
            Tensor obs = Tensor::vec(s.joint_obs[i]);
            h_old.push_back(nn::encode(nullptr, old_nets, obs));
            h_new.push_back(nn::encode(nullptr, new_nets, obs));
        }
        // Walk the recorded order; the level-k distributions condition on the
        // recorded upper-level actions.
        std::vector<int> known(n, -1);
        for (int level = 0; level < n; ++level) {
            int agent = s.order[level];
            auto p_old = proto::agent_policy(old_nets, nullptr, agent, h_old, known, true, true);
            auto p_new = proto::agent_policy(new_nets, nullptr, agent, h_new, known, true, true);
            double tv = tv_distance(p_old.probs.data, p_new.probs.data);
            out.epsilon_pi[level] = std::max(out.epsilon_pi[level], tv);
            known[agent] = s.joint_actions[agent];
        }
        nn::WorldOut pred = nn::world_forward(nullptr, new_nets, h_new, s.joint_actions);
        for (int i = 0; i < n; ++i)
            for (size_t d = 0; d < s.next_joint_obs[i].size(); ++d) {
                double e = pred.next_obs[i].data[d] - s.next_joint_obs[i][d];
                mse_acc += e * e;
                ++mse_count;
            }
        double er = pred.reward.item() - s.reward;
        mse_acc += er * er;
        ++mse_count;
    }
    out.epsilon_m = mse_acc / mse_count;
    return out;
}

MonotonicityReport monotonicity_report(const std::vector<double>& returns) {
    if (returns.empty()) throw std::invalid_argument("monotonicity_report: empty series");
    MonotonicityReport rep;
    if (returns.size() == 1) {
        rep.fraction = 1.0;
        return rep;
    }
    int good = 0;
    for (size_t i = 1; i < returns.size(); ++i) {
        bool ok = returns[i] >= returns[i - 1];
        rep.nondecreasing.push_back(ok);
        if (ok) ++good;
    }
    rep.fraction = static_cast<double>(good) / rep.nondecreasing.size();
    return rep;
}

}  // namespace seqcomm::analysis

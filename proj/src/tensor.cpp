#include "seqcomm/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace seqcomm::num {

void Parameter::init_uniform(std::mt19937_64& rng, int fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : value) v = dist(rng);
}

void Tape::backward(const Tensor& loss) {
    if (!loss.is_scalar()) throw std::invalid_argument("backward: loss must be a scalar");
    if (loss.node < 0 || loss.node >= num_nodes())
        throw std::invalid_argument("backward: loss is not on this tape");
    grads_.assign(nodes_.size(), {});
    for (size_t i = 0; i < nodes_.size(); ++i) grads_[i].assign(nodes_[i].out_size, 0.0);
    grads_[loss.node][0] = 1.0;
    for (int i = loss.node; i >= 0; --i) {
        bool any = false;
        for (double g : grads_[i])
            if (g != 0.0) { any = true; break; }
        if (any) nodes_[i].back(grads_[i], *this);
    }
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor affine(Tape* tape, const Tensor& x, Parameter& w, Parameter& b) {
    if (w.shape.size() != 2) throw std::invalid_argument("affine: weight must be rank 2");
    int k = w.shape[0], n = w.shape[1];
    if (x.size() != k) throw std::invalid_argument("affine: input width mismatch");
    if (b.size() != n) throw std::invalid_argument("affine: bias width mismatch");
    Tensor out({n}, std::vector<double>(n));
    const double* wd = w.value.data();
    for (int j = 0; j < n; ++j) out.data[j] = b.value[j];
    for (int i = 0; i < k; ++i) {
        double xi = x.data[i];
        const double* wrow = wd + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) out.data[j] += xi * wrow[j];
    }
    if (tape) {
        std::vector<double> xv = x.data;
        int xnode = x.node;
        Parameter* wp = &w;
        Parameter* bp = &b;
        out.node = tape->add_node(n, [xv, xnode, wp, bp, k, n](const std::vector<double>& g, Tape& t) {
            for (int i = 0; i < k; ++i) {
                double* grow = wp->grad.data() + static_cast<size_t>(i) * n;
                double xi = xv[i];
                for (int j = 0; j < n; ++j) grow[j] += xi * g[j];
            }
            for (int j = 0; j < n; ++j) bp->grad[j] += g[j];
            if (xnode >= 0) {
                auto& gx = t.grad_buf(xnode);
                const double* wd2 = wp->value.data();
                for (int i = 0; i < k; ++i) {
                    const double* wrow = wd2 + static_cast<size_t>(i) * n;
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += wrow[j] * g[j];
                    gx[i] += acc;
                }
            }
        });
    }
    return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape, a.data);
    for (int i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    if (tape && (a.node >= 0 || b.node >= 0)) {
        int an = a.node, bn = b.node;
        out.node = tape->add_node(out.size(), [an, bn](const std::vector<double>& g, Tape& t) {
            if (an >= 0) {
                auto& ga = t.grad_buf(an);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bn >= 0) {
                auto& gb = t.grad_buf(bn);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& a, double c) {
    Tensor out(a.shape, a.data);
    for (auto& v : out.data) v *= c;
    if (tape && a.node >= 0) {
        int an = a.node;
        out.node = tape->add_node(out.size(), [an, c](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }
    return out;
}

Tensor cmul(Tape* tape, const Tensor& a, const std::vector<double>& c) {
    if (static_cast<int>(c.size()) != a.size())
        throw std::invalid_argument("cmul: size mismatch");
    Tensor out(a.shape, a.data);
    for (int i = 0; i < out.size(); ++i) out.data[i] *= c[i];
    if (tape && a.node >= 0) {
        int an = a.node;
        std::vector<double> cc = c;
        out.node = tape->add_node(out.size(), [an, cc](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += cc[i] * g[i];
        });
    }
    return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape, a.data);
    for (int i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    if (tape && (a.node >= 0 || b.node >= 0)) {
        int an = a.node, bn = b.node;
        std::vector<double> av = a.data, bv = b.data;
        out.node = tape->add_node(out.size(), [an, bn, av, bv](const std::vector<double>& g, Tape& t) {
            if (an >= 0) {
                auto& ga = t.grad_buf(an);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += bv[i] * g[i];
            }
            if (bn >= 0) {
                auto& gb = t.grad_buf(bn);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += av[i] * g[i];
            }
        });
    }
    return out;
}

Tensor smul(Tape* tape, const Tensor& s, const Tensor& v) {
    if (!s.is_scalar()) throw std::invalid_argument("smul: first argument must be scalar");
    Tensor out(v.shape, v.data);
    double sv = s.data[0];
    for (auto& x : out.data) x *= sv;
    if (tape && (s.node >= 0 || v.node >= 0)) {
        int sn = s.node, vn = v.node;
        std::vector<double> vv = v.data;
        out.node = tape->add_node(out.size(), [sn, vn, sv, vv](const std::vector<double>& g, Tape& t) {
            if (sn >= 0) {
                double acc = 0.0;
                for (size_t i = 0; i < g.size(); ++i) acc += vv[i] * g[i];
                t.grad_buf(sn)[0] += acc;
            }
            if (vn >= 0) {
                auto& gv = t.grad_buf(vn);
                for (size_t i = 0; i < g.size(); ++i) gv[i] += sv * g[i];
            }
        });
    }
    return out;
}

Tensor dot(Tape* tape, const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
    Tensor out({1}, {acc});
    if (tape && (a.node >= 0 || b.node >= 0)) {
        int an = a.node, bn = b.node;
        std::vector<double> av = a.data, bv = b.data;
        out.node = tape->add_node(1, [an, bn, av, bv](const std::vector<double>& g, Tape& t) {
            double g0 = g[0];
            if (an >= 0) {
                auto& ga = t.grad_buf(an);
                for (size_t i = 0; i < bv.size(); ++i) ga[i] += bv[i] * g0;
            }
            if (bn >= 0) {
                auto& gb = t.grad_buf(bn);
                for (size_t i = 0; i < av.size(); ++i) gb[i] += av[i] * g0;
            }
        });
    }
    return out;
}

Tensor tanh_t(Tape* tape, const Tensor& a) {
    Tensor out(a.shape, a.data);
    for (auto& v : out.data) v = std::tanh(v);
    if (tape && a.node >= 0) {
        int an = a.node;
        std::vector<double> y = out.data;
        out.node = tape->add_node(out.size(), [an, y](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += (1.0 - y[i] * y[i]) * g[i];
        });
    }
    return out;
}

Tensor exp_t(Tape* tape, const Tensor& a) {
    Tensor out(a.shape, a.data);
    for (auto& v : out.data) v = std::exp(v);
    if (tape && a.node >= 0) {
        int an = a.node;
        std::vector<double> y = out.data;
        out.node = tape->add_node(out.size(), [an, y](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * g[i];
        });
    }
    return out;
}

Tensor log_t(Tape* tape, const Tensor& a) {
    Tensor out(a.shape, a.data);
    for (auto& v : out.data) v = std::log(v);
    if (tape && a.node >= 0) {
        int an = a.node;
        std::vector<double> x = a.data;
        out.node = tape->add_node(out.size(), [an, x](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
        });
    }
    return out;
}

Tensor square(Tape* tape, const Tensor& a) {
    Tensor out(a.shape, a.data);
    for (auto& v : out.data) v *= v;
    if (tape && a.node >= 0) {
        int an = a.node;
        std::vector<double> x = a.data;
        out.node = tape->add_node(out.size(), [an, x](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
        });
    }
    return out;
}

Tensor softmax(Tape* tape, const Tensor& logits) {
    if (logits.size() == 0) throw std::invalid_argument("softmax: empty input");
    double mx = logits.data[0];
    for (double v : logits.data) mx = std::max(mx, v);
    Tensor out(logits.shape, logits.data);
    double z = 0.0;
    for (auto& v : out.data) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto& v : out.data) v /= z;
    if (tape && logits.node >= 0) {
        int an = logits.node;
        std::vector<double> p = out.data;
        out.node = tape->add_node(out.size(), [an, p](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            double gdotp = 0.0;
            for (size_t i = 0; i < g.size(); ++i) gdotp += g[i] * p[i];
            for (size_t i = 0; i < g.size(); ++i) ga[i] += p[i] * (g[i] - gdotp);
        });
    }
    return out;
}

Tensor sum(Tape* tape, const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v;
    Tensor out({1}, {acc});
    if (tape && a.node >= 0) {
        int an = a.node;
        int n = a.size();
        out.node = tape->add_node(1, [an, n](const std::vector<double>& g, Tape& t) {
            auto& ga = t.grad_buf(an);
            for (int i = 0; i < n; ++i) ga[i] += g[0];
        });
    }
    return out;
}

Tensor mean(Tape* tape, const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("mean: empty input");
    return scale(tape, sum(tape, a), 1.0 / a.size());
}

Tensor concat(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no parts");
    int total = 0;
    bool any_node = false;
    for (const auto& p : parts) {
        total += p.size();
        any_node = any_node || p.node >= 0;
    }
    Tensor out({total}, std::vector<double>(total));
    int off = 0;
    for (const auto& p : parts) {
        std::copy(p.data.begin(), p.data.end(), out.data.begin() + off);
        off += p.size();
    }
    if (tape && any_node) {
        std::vector<std::pair<int, int>> spans;  // (node, size)
        spans.reserve(parts.size());
        for (const auto& p : parts) spans.emplace_back(p.node, p.size());
        out.node = tape->add_node(total, [spans](const std::vector<double>& g, Tape& t) {
            int off2 = 0;
            for (auto [node, sz] : spans) {
                if (node >= 0) {
                    auto& gp = t.grad_buf(node);
                    for (int i = 0; i < sz; ++i) gp[i] += g[off2 + i];
                }
                off2 += sz;
            }
        });
    }
    return out;
}

Tensor pick(Tape* tape, const Tensor& a, int idx) {
    if (idx < 0 || idx >= a.size()) throw std::invalid_argument("pick: index out of range");
    Tensor out({1}, {a.data[idx]});
    if (tape && a.node >= 0) {
        int an = a.node;
        out.node = tape->add_node(1, [an, idx](const std::vector<double>& g, Tape& t) {
            t.grad_buf(an)[idx] += g[0];
        });
    }
    return out;
}

std::vector<double> one_hot(int idx, int width) {
    if (idx < 0 || idx >= width) throw std::invalid_argument("one_hot: index out of range");
    std::vector<double> v(width, 0.0);
    v[idx] = 1.0;
    return v;
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter& p = *params_[pi];
        if (static_cast<int>(p.grad.size()) != p.size())
            throw std::invalid_argument("Adam::step: grad shape mismatch");
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (int i = 0; i < p.size(); ++i) {
            double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
    double sq = 0.0;
    for (const auto* p : params)
        for (double g : p->grad) sq += g * g;
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double f = max_norm / norm;
        for (auto* p : params)
            for (double& g : p->grad) g *= f;
    }
    return norm;
}

}  // namespace seqcomm::num

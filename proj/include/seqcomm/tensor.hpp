#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqcomm::num {

// Dense row-major tensor of rank 1 or 2. `node >= 0` links the value to a
// Tape node so gradients can flow back through it; node == -1 means constant.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    int node = -1;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d, int n = -1)
        : shape(std::move(s)), data(std::move(d)), node(n) {}

    static Tensor vec(std::vector<double> d) {
        int n = static_cast<int>(d.size());
        return Tensor({n}, std::move(d));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    int size() const { return static_cast<int>(data.size()); }
    bool is_scalar() const { return data.size() == 1; }
    double item() const {
        if (!is_scalar()) throw std::invalid_argument("Tensor::item: not a scalar");
        return data[0];
    }
};

// A learnable tensor living outside any tape. Ops that read parameters
// backprop straight into `grad`.
struct Parameter {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;

    Parameter() = default;
    Parameter(std::string n, std::vector<int> s)
        : name(std::move(n)), shape(std::move(s)) {
        int sz = 1;
        for (int d : shape) sz *= d;
        value.assign(sz, 0.0);
        grad.assign(sz, 0.0);
    }

    int size() const { return static_cast<int>(value.size()); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
    // Uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    void init_uniform(std::mt19937_64& rng, int fan_in);
};

// Record of the primitive ops of one forward computation, in topological
// order. backward() walks it once, in reverse.
class Tape {
public:
    using BackFn = std::function<void(const std::vector<double>& grad_out, Tape& tape)>;

    int add_node(int out_size, BackFn back) {
        nodes_.push_back({std::move(back), out_size});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<double>& grad_buf(int node) { return grads_[node]; }

    // Seeds d(loss)/d(loss) = 1 and propagates to every reachable parameter
    // and node. Parameter grads accumulate (caller zeroes them beforehand).
    void backward(const Tensor& loss);

    int num_nodes() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        BackFn back;
        int out_size;
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
};

// --- primitives ------------------------------------------------------------
// Every op accepts tape == nullptr for a recording-free fast path.

Tensor affine(Tape* tape, const Tensor& x, Parameter& w, Parameter& b);  // x[k] * w[k,n] + b[n]
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double c);
Tensor cmul(Tape* tape, const Tensor& a, const std::vector<double>& c);  // elementwise, c constant
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);                // elementwise
Tensor smul(Tape* tape, const Tensor& s, const Tensor& v);               // scalar s times v
Tensor dot(Tape* tape, const Tensor& a, const Tensor& b);
Tensor tanh_t(Tape* tape, const Tensor& a);
Tensor exp_t(Tape* tape, const Tensor& a);
Tensor log_t(Tape* tape, const Tensor& a);
Tensor square(Tape* tape, const Tensor& a);
Tensor softmax(Tape* tape, const Tensor& logits);
Tensor sum(Tape* tape, const Tensor& a);
Tensor mean(Tape* tape, const Tensor& a);
Tensor concat(Tape* tape, const std::vector<Tensor>& parts);
Tensor pick(Tape* tape, const Tensor& a, int idx);

std::vector<double> one_hot(int idx, int width);

// Rescales all grads so their global L2 norm is at most max_norm; returns the
// norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

// --- optimizer ---------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg);

    // One bias-corrected Adam step from the parameters' current grads.
    void step();
    void zero_grad();
    int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Parameter*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    int64_t t_ = 0;
};

}  // namespace seqcomm::num

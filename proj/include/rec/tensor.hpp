#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rec/common.hpp"

namespace rec {

// Dense row-major float32 tensor. Gradients live in `grad`, lazily allocated.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
    // set when this tensor is the output of a recorded op (gradient must flow
    // through it even if requires_grad is false)
    bool from_op = false;

    Tensor() = default;
    Tensor(std::vector<int> s, bool rg = false) : shape(std::move(s)), requires_grad(rg) {
        data.assign(numel(), 0.0f);
    }

    size_t numel() const {
        size_t n = 1;
        for (int d : shape) {
            check(d > 0, "tensor dimension must be positive");
            n *= size_t(d);
        }
        return n;
    }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    bool is_scalar() const { return numel() == 1; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    }
    void zero_grad() { grad.assign(data.size(), 0.0f); }
    bool wants_grad() const { return requires_grad || from_op; }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<int> shape, const std::vector<float>& values,
                      bool requires_grad = false);
TensorPtr make_scalar(float v, bool requires_grad = false);

// Tape of op records in execution (= topological) order. One Graph per
// forward/backward pass; no shared mutable state between graphs.
class Graph {
  public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    struct OpRecord {
        const char* kind;
        std::vector<TensorPtr> inputs;
        TensorPtr output;
        std::function<void()> backward;
    };

    void record(const char* kind, std::vector<TensorPtr> inputs, TensorPtr output,
                std::function<void()> backward);

    // Seeds d(loss)/d(loss) = 1 and walks the tape in reverse. Gradients
    // accumulate additively into every tensor with wants_grad().
    void backward(const TensorPtr& loss);

    size_t size() const { return tape_.size(); }
    void clear() { tape_.clear(); }

  private:
    bool recording_;
    std::vector<OpRecord> tape_;
};

// ---- ops ----------------------------------------------------------------

TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b);
// x: [n, d] (or any shape whose trailing axis is d), bias: [d]
TensorPtr add_bias(Graph& g, const TensorPtr& x, const TensorPtr& bias);
TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Graph& g, const TensorPtr& a, float c);
TensorPtr matmul(Graph& g, const TensorPtr& a, const TensorPtr& b);  // [m,k]x[k,n]
TensorPtr transpose(Graph& g, const TensorPtr& a);                   // 2-D
TensorPtr slice_cols(Graph& g, const TensorPtr& x, int start, int n);
TensorPtr concat_cols(Graph& g, const std::vector<TensorPtr>& xs);
TensorPtr concat_rows(Graph& g, const std::vector<TensorPtr>& xs);
TensorPtr gather_rows(Graph& g, const TensorPtr& x, const std::vector<int>& idx);
TensorPtr softmax(Graph& g, const TensorPtr& x, int axis);
TensorPtr layer_norm(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, float eps = 1e-5f);
TensorPtr gelu(Graph& g, const TensorPtr& x);
TensorPtr l2_normalize_rows(Graph& g, const TensorPtr& x, float eps = 1e-12f);
TensorPtr dropout(Graph& g, const TensorPtr& x, float rate, uint64_t seed);
TensorPtr sum_all(Graph& g, const TensorPtr& x);
TensorPtr mean_all(Graph& g, const TensorPtr& x);
// logits: [B, C]; mean over batch of -log softmax(logits)[target]
TensorPtr cross_entropy_logits(Graph& g, const TensorPtr& logits,
                               const std::vector<int>& targets);

// ---- optimizer ----------------------------------------------------------

struct AdamHyper {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

class AdamState {
  public:
    AdamState(std::vector<TensorPtr> params, AdamHyper hyper);

    // bias-corrected Adam update from the gradients currently held in the
    // parameters; increments the step counter by exactly 1
    void step();
    void zero_grad();
    // scales all gradients so their global L2 norm is at most max_norm
    void clip_global_norm(float max_norm);

    int64_t t() const { return t_; }
    const std::vector<TensorPtr>& params() const { return params_; }
    const std::vector<float>& m(size_t i) const { return m_[i]; }
    const std::vector<float>& v(size_t i) const { return v_[i]; }

  private:
    std::vector<TensorPtr> params_;
    std::vector<std::vector<float>> m_, v_;
    AdamHyper hyper_;
    int64_t t_ = 0;
};

void fill_uniform(Tensor& t, Rng& rng, float lo, float hi);
void fill_normal(Tensor& t, Rng& rng, float stddev);

}  // namespace rec

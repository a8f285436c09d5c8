#include "rec/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>

namespace rec {

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

std::string hash_hex(uint64_t h) {
    static const char* hex = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = hex[h & 0xf];
        h >>= 4;
    }
    return s;
}

uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(bool(in), "cannot open file for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a(buf, size_t(in.gcount()), h);
    }
    return h;
}

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

TensorPtr make_tensor(std::vector<int> shape, const std::vector<float>& values,
                      bool requires_grad) {
    auto t = make_tensor(std::move(shape), requires_grad);
    check(values.size() == t->data.size(), "value count does not match shape");
    t->data = values;
    return t;
}

TensorPtr make_scalar(float v, bool requires_grad) {
    return make_tensor({1}, {v}, requires_grad);
}

void fill_uniform(Tensor& t, Rng& rng, float lo, float hi) {
    for (float& x : t.data) x = lo + (hi - lo) * rng.uniformf();
}

void fill_normal(Tensor& t, Rng& rng, float stddev) {
    for (float& x : t.data) x = stddev * rng.normal();
}

void Graph::record(const char* kind, std::vector<TensorPtr> inputs, TensorPtr output,
                   std::function<void()> backward) {
    if (!recording_) return;
    bool any = false;
    for (const auto& in : inputs) any = any || in->wants_grad();
    if (!any) return;
    output->from_op = true;
    output->ensure_grad();
    for (const auto& in : inputs)
        if (in->wants_grad()) in->ensure_grad();
    tape_.push_back({kind, std::move(inputs), std::move(output), std::move(backward)});
}

void Graph::backward(const TensorPtr& loss) {
    check(loss->is_scalar(), "backward requires a scalar loss");
    check(loss->wants_grad(), "loss is not connected to the graph");
    loss->ensure_grad();
    loss->grad[0] += 1.0f;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) it->backward();
}

// ---- helpers ------------------------------------------------------------

static TensorPtr out_like(const std::vector<int>& shape) { return make_tensor(shape); }

// ---- elementwise --------------------------------------------------------

TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b) {
    check(a->shape == b->shape, "add: shape mismatch");
    auto out = out_like(a->shape);
    const size_t n = a->data.size();
    for (size_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
    g.record("add", {a, b}, out, [a, b, out, n] {
        if (a->wants_grad())
            for (size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i];
        if (b->wants_grad())
            for (size_t i = 0; i < n; ++i) b->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr add_bias(Graph& g, const TensorPtr& x, const TensorPtr& bias) {
    check(!x->shape.empty() && bias->shape.size() == 1, "add_bias: expects trailing-axis bias");
    const int d = x->shape.back();
    check(bias->shape[0] == d, "add_bias: bias length must match trailing axis");
    auto out = out_like(x->shape);
    const size_t n = x->data.size();
    for (size_t i = 0; i < n; ++i) out->data[i] = x->data[i] + bias->data[i % size_t(d)];
    g.record("add_bias", {x, bias}, out, [x, bias, out, n, d] {
        if (x->wants_grad())
            for (size_t i = 0; i < n; ++i) x->grad[i] += out->grad[i];
        if (bias->wants_grad())
            for (size_t i = 0; i < n; ++i) bias->grad[i % size_t(d)] += out->grad[i];
    });
    return out;
}

TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b) {
    check(a->shape == b->shape, "mul: shape mismatch");
    auto out = out_like(a->shape);
    const size_t n = a->data.size();
    for (size_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
    g.record("mul", {a, b}, out, [a, b, out, n] {
        if (a->wants_grad())
            for (size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->data[i];
        if (b->wants_grad())
            for (size_t i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->data[i];
    });
    return out;
}

TensorPtr scale(Graph& g, const TensorPtr& a, float c) {
    auto out = out_like(a->shape);
    const size_t n = a->data.size();
    for (size_t i = 0; i < n; ++i) out->data[i] = a->data[i] * c;
    g.record("scale", {a}, out, [a, out, n, c] {
        for (size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i] * c;
    });
    return out;
}

// ---- linear algebra -----------------------------------------------------

TensorPtr matmul(Graph& g, const TensorPtr& a, const TensorPtr& b) {
    check(a->shape.size() == 2 && b->shape.size() == 2, "matmul: 2-D operands required");
    const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
    check(b->shape[0] == k, "matmul: inner dimensions disagree");
    auto out = out_like({m, n});
    CMapM A(a->data.data(), m, k), B(b->data.data(), k, n);
    MapM O(out->data.data(), m, n);
    O.noalias() = A * B;
    g.record("matmul", {a, b}, out, [a, b, out, m, k, n] {
        CMapM A(a->data.data(), m, k), B(b->data.data(), k, n);
        CMapM dO(out->grad.data(), m, n);
        if (a->wants_grad()) {
            MapM dA(a->grad.data(), m, k);
            dA.noalias() += dO * B.transpose();
        }
        if (b->wants_grad()) {
            MapM dB(b->grad.data(), k, n);
            dB.noalias() += A.transpose() * dO;
        }
    });
    return out;
}

TensorPtr transpose(Graph& g, const TensorPtr& a) {
    check(a->shape.size() == 2, "transpose: 2-D operand required");
    const int m = a->shape[0], n = a->shape[1];
    auto out = out_like({n, m});
    CMapM A(a->data.data(), m, n);
    MapM O(out->data.data(), n, m);
    O = A.transpose();
    g.record("transpose", {a}, out, [a, out, m, n] {
        MapM dA(a->grad.data(), m, n);
        CMapM dO(out->grad.data(), n, m);
        dA += dO.transpose();
    });
    return out;
}

TensorPtr slice_cols(Graph& g, const TensorPtr& x, int start, int n) {
    check(x->shape.size() == 2, "slice_cols: 2-D operand required");
    const int rows = x->shape[0], cols = x->shape[1];
    check(start >= 0 && n > 0 && start + n <= cols, "slice_cols: range out of bounds");
    auto out = out_like({rows, n});
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < n; ++c) out->data[size_t(r) * n + c] = x->data[size_t(r) * cols + start + c];
    g.record("slice_cols", {x}, out, [x, out, rows, cols, start, n] {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < n; ++c)
                x->grad[size_t(r) * cols + start + c] += out->grad[size_t(r) * n + c];
    });
    return out;
}

TensorPtr concat_cols(Graph& g, const std::vector<TensorPtr>& xs) {
    check(!xs.empty(), "concat_cols: empty input");
    const int rows = xs[0]->shape[0];
    int total = 0;
    for (const auto& x : xs) {
        check(x->shape.size() == 2 && x->shape[0] == rows, "concat_cols: row mismatch");
        total += x->shape[1];
    }
    auto out = out_like({rows, total});
    int off = 0;
    for (const auto& x : xs) {
        const int c = x->shape[1];
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < c; ++j)
                out->data[size_t(r) * total + off + j] = x->data[size_t(r) * c + j];
        off += c;
    }
    g.record("concat_cols", xs, out, [xs, out, rows, total] {
        int off = 0;
        for (const auto& x : xs) {
            const int c = x->shape[1];
            if (x->wants_grad())
                for (int r = 0; r < rows; ++r)
                    for (int j = 0; j < c; ++j)
                        x->grad[size_t(r) * c + j] += out->grad[size_t(r) * total + off + j];
            off += c;
        }
    });
    return out;
}

TensorPtr concat_rows(Graph& g, const std::vector<TensorPtr>& xs) {
    check(!xs.empty(), "concat_rows: empty input");
    const int cols = xs[0]->cols();
    int total = 0;
    for (const auto& x : xs) {
        check(x->cols() == cols, "concat_rows: column mismatch");
        total += x->rows();
    }
    auto out = out_like({total, cols});
    size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->data.begin(), x->data.end(), out->data.begin() + long(off));
        off += x->data.size();
    }
    g.record("concat_rows", xs, out, [xs, out] {
        size_t off = 0;
        for (const auto& x : xs) {
            if (x->wants_grad())
                for (size_t i = 0; i < x->data.size(); ++i) x->grad[i] += out->grad[off + i];
            off += x->data.size();
        }
    });
    return out;
}

TensorPtr gather_rows(Graph& g, const TensorPtr& x, const std::vector<int>& idx) {
    check(x->shape.size() == 2, "gather_rows: 2-D operand required");
    check(!idx.empty(), "gather_rows: empty index list");
    const int rows = x->shape[0], cols = x->shape[1];
    for (int i : idx) check(i >= 0 && i < rows, "gather_rows: index out of range");
    auto out = out_like({int(idx.size()), cols});
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy_n(x->data.begin() + size_t(idx[r]) * cols, cols, out->data.begin() + r * cols);
    g.record("gather_rows", {x}, out, [x, out, idx, cols] {
        for (size_t r = 0; r < idx.size(); ++r)
            for (int c = 0; c < cols; ++c)
                x->grad[size_t(idx[r]) * cols + c] += out->grad[r * size_t(cols) + c];
    });
    return out;
}

// ---- nonlinearities -----------------------------------------------------

TensorPtr softmax(Graph& g, const TensorPtr& x, int axis) {
    const int rank = int(x->shape.size());
    check(axis >= 0 && axis < rank, "softmax: invalid axis");
    const int len = x->shape[axis];
    check(len > 0, "softmax: zero-length axis");
    size_t inner = 1, outer = 1;
    for (int i = axis + 1; i < rank; ++i) inner *= size_t(x->shape[i]);
    for (int i = 0; i < axis; ++i) outer *= size_t(x->shape[i]);
    auto out = out_like(x->shape);
    for (size_t o = 0; o < outer; ++o)
        for (size_t in = 0; in < inner; ++in) {
            const size_t base = o * size_t(len) * inner + in;
            float mx = x->data[base];
            for (int i = 1; i < len; ++i) mx = std::max(mx, x->data[base + size_t(i) * inner]);
            float sum = 0.0f;
            for (int i = 0; i < len; ++i) {
                float e = std::exp(x->data[base + size_t(i) * inner] - mx);
                out->data[base + size_t(i) * inner] = e;
                sum += e;
            }
            for (int i = 0; i < len; ++i) out->data[base + size_t(i) * inner] /= sum;
        }
    g.record("softmax", {x}, out, [x, out, len, inner, outer] {
        for (size_t o = 0; o < outer; ++o)
            for (size_t in = 0; in < inner; ++in) {
                const size_t base = o * size_t(len) * inner + in;
                float dot = 0.0f;
                for (int i = 0; i < len; ++i) {
                    size_t k = base + size_t(i) * inner;
                    dot += out->grad[k] * out->data[k];
                }
                for (int i = 0; i < len; ++i) {
                    size_t k = base + size_t(i) * inner;
                    x->grad[k] += out->data[k] * (out->grad[k] - dot);
                }
            }
    });
    return out;
}

TensorPtr layer_norm(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, float eps) {
    check(!x->shape.empty(), "layer_norm: scalar input");
    const int d = x->shape.back();
    check(d > 0, "layer_norm: zero-length axis");
    check(gamma->shape.size() == 1 && gamma->shape[0] == d, "layer_norm: gamma length mismatch");
    check(beta->shape.size() == 1 && beta->shape[0] == d, "layer_norm: beta length mismatch");
    const size_t rows = x->data.size() / size_t(d);
    auto out = out_like(x->shape);
    // cache per-row (mean, inv_std) and xhat for the backward pass
    auto xhat = std::make_shared<std::vector<float>>(x->data.size());
    auto istd = std::make_shared<std::vector<float>>(rows);
    for (size_t r = 0; r < rows; ++r) {
        const float* xr = x->data.data() + r * d;
        float mean = 0.0f;
        for (int i = 0; i < d; ++i) mean += xr[i];
        mean /= float(d);
        float var = 0.0f;
        for (int i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
        var /= float(d);
        float is = 1.0f / std::sqrt(var + eps);
        (*istd)[r] = is;
        for (int i = 0; i < d; ++i) {
            float xh = (xr[i] - mean) * is;
            (*xhat)[r * d + i] = xh;
            out->data[r * d + i] = xh * gamma->data[i] + beta->data[i];
        }
    }
    g.record("layer_norm", {x, gamma, beta}, out, [x, gamma, beta, out, xhat, istd, rows, d] {
        for (size_t r = 0; r < rows; ++r) {
            const float* dy = out->grad.data() + r * d;
            const float* xh = xhat->data() + r * d;
            if (gamma->wants_grad())
                for (int i = 0; i < d; ++i) gamma->grad[i] += dy[i] * xh[i];
            if (beta->wants_grad())
                for (int i = 0; i < d; ++i) beta->grad[i] += dy[i];
            if (x->wants_grad()) {
                float m1 = 0.0f, m2 = 0.0f;
                for (int i = 0; i < d; ++i) {
                    float dxh = dy[i] * gamma->data[i];
                    m1 += dxh;
                    m2 += dxh * xh[i];
                }
                m1 /= float(d);
                m2 /= float(d);
                for (int i = 0; i < d; ++i) {
                    float dxh = dy[i] * gamma->data[i];
                    x->grad[r * d + i] += (*istd)[r] * (dxh - m1 - xh[i] * m2);
                }
            }
        }
    });
    return out;
}

TensorPtr gelu(Graph& g, const TensorPtr& x) {
    auto out = out_like(x->shape);
    const size_t n = x->data.size();
    constexpr float kInvSqrt2 = 0.70710678f;
    for (size_t i = 0; i < n; ++i) {
        float v = x->data[i];
        out->data[i] = 0.5f * v * (1.0f + std::erf(v * kInvSqrt2));
    }
    g.record("gelu", {x}, out, [x, out, n] {
        constexpr float kInvSqrt2 = 0.70710678f;
        constexpr float kInvSqrt2Pi = 0.3989422804f;
        for (size_t i = 0; i < n; ++i) {
            float v = x->data[i];
            float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
            float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
            x->grad[i] += out->grad[i] * (cdf + v * pdf);
        }
    });
    return out;
}

TensorPtr l2_normalize_rows(Graph& g, const TensorPtr& x, float eps) {
    check(x->shape.size() == 2, "l2_normalize_rows: 2-D operand required");
    const int rows = x->shape[0], d = x->shape[1];
    auto out = out_like(x->shape);
    auto inv = std::make_shared<std::vector<float>>(rows);
    for (int r = 0; r < rows; ++r) {
        const float* xr = x->data.data() + size_t(r) * d;
        float s = eps;
        for (int i = 0; i < d; ++i) s += xr[i] * xr[i];
        float iv = 1.0f / std::sqrt(s);
        (*inv)[r] = iv;
        for (int i = 0; i < d; ++i) out->data[size_t(r) * d + i] = xr[i] * iv;
    }
    g.record("l2_normalize_rows", {x}, out, [x, out, inv, rows, d] {
        for (int r = 0; r < rows; ++r) {
            const float* y = out->data.data() + size_t(r) * d;
            const float* dy = out->grad.data() + size_t(r) * d;
            float dot = 0.0f;
            for (int i = 0; i < d; ++i) dot += y[i] * dy[i];
            for (int i = 0; i < d; ++i)
                x->grad[size_t(r) * d + i] += (*inv)[r] * (dy[i] - y[i] * dot);
        }
    });
    return out;
}

TensorPtr dropout(Graph& g, const TensorPtr& x, float rate, uint64_t seed) {
    check(rate >= 0.0f && rate < 1.0f, "dropout: rate must be in [0,1)");
    if (rate == 0.0f || !g.recording()) return x;  // disabled in evaluation mode
    auto out = out_like(x->shape);
    const size_t n = x->data.size();
    auto mask = std::make_shared<std::vector<float>>(n);
    Rng rng(seed);
    const float keep = 1.0f - rate;
    for (size_t i = 0; i < n; ++i) {
        float m = rng.uniformf() < rate ? 0.0f : 1.0f / keep;
        (*mask)[i] = m;
        out->data[i] = x->data[i] * m;
    }
    g.record("dropout", {x}, out, [x, out, mask, n] {
        for (size_t i = 0; i < n; ++i) x->grad[i] += out->grad[i] * (*mask)[i];
    });
    return out;
}

// ---- reductions & loss --------------------------------------------------

TensorPtr sum_all(Graph& g, const TensorPtr& x) {
    auto out = make_tensor({1});
    double s = 0.0;
    for (float v : x->data) s += v;
    out->data[0] = float(s);
    g.record("sum_all", {x}, out, [x, out] {
        for (float& gr : x->grad) gr += out->grad[0];
    });
    return out;
}

TensorPtr mean_all(Graph& g, const TensorPtr& x) {
    return scale(g, sum_all(g, x), 1.0f / float(x->numel()));
}

TensorPtr cross_entropy_logits(Graph& g, const TensorPtr& logits,
                               const std::vector<int>& targets) {
    check(logits->shape.size() == 2, "cross_entropy_logits: logits must be [B, C]");
    const int B = logits->shape[0], C = logits->shape[1];
    check(int(targets.size()) == B, "cross_entropy_logits: target count mismatch");
    for (int t : targets) check(t >= 0 && t < C, "cross_entropy_logits: target out of range");
    auto out = make_tensor({1});
    auto probs = std::make_shared<std::vector<float>>(size_t(B) * C);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const float* row = logits->data.data() + size_t(b) * C;
        float mx = row[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(double(row[c]) - mx);
        double lse = mx + std::log(sum);
        loss += lse - row[targets[b]];
        for (int c = 0; c < C; ++c)
            (*probs)[size_t(b) * C + c] = float(std::exp(double(row[c]) - lse));
    }
    out->data[0] = float(loss / B);
    g.record("cross_entropy_logits", {logits}, out, [logits, out, probs, targets, B, C] {
        const float go = out->grad[0] / float(B);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                float p = (*probs)[size_t(b) * C + c];
                logits->grad[size_t(b) * C + c] += go * (p - (c == targets[b] ? 1.0f : 0.0f));
            }
    });
    return out;
}

// ---- Adam ---------------------------------------------------------------

AdamState::AdamState(std::vector<TensorPtr> params, AdamHyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
    for (const auto& p : params_) {
        p->ensure_grad();
        m_.emplace_back(p->data.size(), 0.0f);
        v_.emplace_back(p->data.size(), 0.0f);
    }
}

void AdamState::zero_grad() {
    for (const auto& p : params_) p->zero_grad();
}

void AdamState::clip_global_norm(float max_norm) {
    double sq = 0.0;
    for (const auto& p : params_)
        for (float gval : p->grad) sq += double(gval) * gval;
    const float norm = float(std::sqrt(sq));
    if (norm <= max_norm || norm == 0.0f) return;
    const float s = max_norm / norm;
    for (const auto& p : params_)
        for (float& gval : p->grad) gval *= s;
}

void AdamState::step() {
    ++t_;
    const float bc1 = 1.0f - std::pow(hyper_.beta1, float(t_));
    const float bc2 = 1.0f - std::pow(hyper_.beta2, float(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        check(p.grad.size() == p.data.size(), "adam_step: gradient/parameter shape mismatch");
        for (size_t j = 0; j < p.data.size(); ++j) {
            float gval = p.grad[j];
            m_[i][j] = hyper_.beta1 * m_[i][j] + (1.0f - hyper_.beta1) * gval;
            v_[i][j] = hyper_.beta2 * v_[i][j] + (1.0f - hyper_.beta2) * gval * gval;
            float mhat = m_[i][j] / bc1;
            float vhat = v_[i][j] / bc2;
            p.data[j] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
        }
    }
}

}  // namespace rec

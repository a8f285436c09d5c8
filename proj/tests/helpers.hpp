#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "rec/tensor.hpp"

namespace recx {

using rec::Graph;
using rec::Rng;
using rec::TensorPtr;

// loss() must rebuild the whole forward pass from the current parameter data
using LossFn = std::function<float()>;

// central finite difference of loss along +/- h*dir applied to param
inline double fd_directional(const TensorPtr& param, const std::vector<float>& dir, float h,
                             const LossFn& loss) {
    std::vector<float> saved = param->data;
    for (size_t i = 0; i < saved.size(); ++i) param->data[i] = saved[i] + h * dir[i];
    double fp = loss();
    for (size_t i = 0; i < saved.size(); ++i) param->data[i] = saved[i] - h * dir[i];
    double fm = loss();
    param->data = saved;
    return (fp - fm) / (2.0 * double(h));
}

// analytic directional derivative from gradients already in param->grad
inline double grad_dot(const TensorPtr& param, const std::vector<float>& dir) {
    double s = 0.0;
    for (size_t i = 0; i < dir.size(); ++i) s += double(param->grad[i]) * dir[i];
    return s;
}

inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1.0});
}

// checks d(loss)/d(param) against central differences along random unit
// directions; returns the worst relative error over n_dirs directions
inline double check_grad(const TensorPtr& param, const LossFn& loss_with_backward,
                         const LossFn& loss_plain, uint64_t seed, int n_dirs = 3,
                         float h = 1e-2f) {
    double worst = 0.0;
    Rng rng(seed);
    for (int k = 0; k < n_dirs; ++k) {
        std::vector<float> dir(param->data.size());
        double norm = 0.0;
        for (auto& d : dir) {
            d = rng.normal();
            norm += double(d) * d;
        }
        norm = std::sqrt(norm);
        for (auto& d : dir) d = float(d / norm);

        param->ensure_grad();
        param->zero_grad();
        loss_with_backward();
        const double analytic = grad_dot(param, dir);
        const double numeric = fd_directional(param, dir, h, loss_plain);
        worst = std::max(worst, rel_err(analytic, numeric));
    }
    return worst;
}

inline std::vector<float> random_vec(size_t n, uint64_t seed, float scale = 1.0f) {
    std::vector<float> v(n);
    Rng rng(seed);
    for (auto& x : v) x = rng.normal() * scale;
    return v;
}

// temp directory that cleans up after the test
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("reclab-test-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace recx

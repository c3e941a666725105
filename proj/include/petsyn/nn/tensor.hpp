#ifndef PETSYN_NN_TENSOR_HPP
#define PETSYN_NN_TENSOR_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "petsyn/common.hpp"

namespace petsyn::nn {

// Dense [C, D, H, W] tensor, W fastest. Batches are handled by the training
// loops as explicit gradient accumulation, so there is no batch axis here.
template <typename T>
struct Tensor {
    int c = 0, d = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int c_, int d_, int h_, int w_)
        : c(c_), d(d_), h(h_), w(w_),
          v(static_cast<size_t>(c_) * d_ * h_ * w_, T(0)) {}

    size_t size() const { return v.size(); }
    size_t spatial_size() const { return static_cast<size_t>(d) * h * w; }
    std::array<int, 3> spatial() const { return {d, h, w}; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    T* channel(int ci) { return v.data() + static_cast<size_t>(ci) * spatial_size(); }
    const T* channel(int ci) const {
        return v.data() + static_cast<size_t>(ci) * spatial_size();
    }

    T& at(int ci, int di, int hi, int wi) {
        return v[((static_cast<size_t>(ci) * d + di) * h + hi) * static_cast<size_t>(w) + wi];
    }
    T at(int ci, int di, int hi, int wi) const {
        return v[((static_cast<size_t>(ci) * d + di) * h + hi) * static_cast<size_t>(w) + wi];
    }

    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    bool same_shape(const Tensor& o) const {
        return c == o.c && d == o.d && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(c) + "," + std::to_string(d) + "," + std::to_string(h) +
               "," + std::to_string(w) + ")";
    }
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.spatial() != b.spatial())
        throw ValidationError("concat_channels: spatial shapes differ: " + a.shape_str() +
                              " vs " + b.shape_str());
    Tensor<T> out(a.c + b.c, a.d, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int c_first) {
    Tensor<T> a(c_first, x.d, x.h, x.w);
    Tensor<T> b(x.c - c_first, x.d, x.h, x.w);
    std::copy(x.v.begin(), x.v.begin() + a.v.size(), a.v.begin());
    std::copy(x.v.begin() + a.v.size(), x.v.end(), b.v.begin());
    return {std::move(a), std::move(b)};
}

// Trainable parameter with gradient and Adam state.
template <typename T>
struct Parameter {
    std::string name;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<double> adam_m;
    std::vector<double> adam_v;

    void resize(const std::string& n, size_t count) {
        name = n;
        value.assign(count, T(0));
        grad.assign(count, T(0));
        adam_m.assign(count, 0.0);
        adam_v.assign(count, 0.0);
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Parameter<T>*>& params) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (Parameter<T>* p : params) {
            for (size_t i = 0; i < p->value.size(); ++i) {
                double g = static_cast<double>(p->grad[i]);
                p->adam_m[i] = beta1_ * p->adam_m[i] + (1.0 - beta1_) * g;
                p->adam_v[i] = beta2_ * p->adam_v[i] + (1.0 - beta2_) * g * g;
                double mhat = p->adam_m[i] / bc1;
                double vhat = p->adam_v[i] / bc2;
                p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) -
                                             lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    int64_t steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
    for (auto* p : params) p->zero_grad();
}

} // namespace petsyn::nn

#endif

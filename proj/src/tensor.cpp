#include "chase/tensor.hpp"

#include <cmath>

namespace chase {

std::int64_t shape_numel(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
        if (d < 0) throw ShapeError("negative dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("data length does not match shape");
}

Tensor Tensor::zeros(std::vector<int> s) {
    std::int64_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int> s, double v) {
    std::int64_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

int Tensor::rows() const {
    if (shape.size() != 2) throw ShapeError("rows() requires a 2-d tensor");
    return shape[0];
}

int Tensor::cols() const {
    if (shape.size() != 2) throw ShapeError("cols() requires a 2-d tensor");
    return shape[1];
}

void Tensor::fill(double v) {
    for (auto& x : data) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

Tensor& ParamSet::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_[name] = entries_.size();
    Tensor grad = Tensor::zeros(init.shape);
    entries_.push_back(Entry{name, std::move(init), std::move(grad)});
    return entries_.back().value;
}

Tensor& ParamSet::value(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second].value;
}

const Tensor& ParamSet::value(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second].value;
}

Tensor& ParamSet::grad(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second].grad;
}

const Tensor& ParamSet::grad(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second].grad;
}

void ParamSet::zero_grads() {
    for (auto& e : entries_) e.grad.fill(0.0);
}

std::int64_t ParamSet::coordinate_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
}

double& ParamSet::coord(std::int64_t flat) {
    for (auto& e : entries_) {
        if (flat < e.value.numel()) return e.value.data[static_cast<std::size_t>(flat)];
        flat -= e.value.numel();
    }
    throw ShapeError("coordinate index out of range");
}

double ParamSet::grad_coord(std::int64_t flat) const {
    for (const auto& e : entries_) {
        if (flat < e.grad.numel()) return e.grad.data[static_cast<std::size_t>(flat)];
        flat -= e.grad.numel();
    }
    throw ShapeError("coordinate index out of range");
}

AdamOptimizer::AdamOptimizer(const ParamSet& params, double lr, double beta1,
                             double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& e : params.entries()) {
        m_.push_back(Tensor::zeros(e.value.shape));
        v_.push_back(Tensor::zeros(e.value.shape));
    }
}

void AdamOptimizer::step(ParamSet& params) {
    if (m_.size() != params.size())
        throw ShapeError("optimizer state does not match parameter set");
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& e = params.entries()[p];
        if (!e.value.same_shape(m_[p])) throw ShapeError("moment shape mismatch: " + e.name);
        double* w = e.value.ptr();
        double* g = e.grad.ptr();
        double* m = m_[p].ptr();
        double* v = v_[p].ptr();
        std::int64_t n = e.value.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            g[i] = 0.0;
        }
    }
}

}  // namespace chase

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace chase {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major 64-bit float tensor.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> s);
    static Tensor full(std::vector<int> s, double v);

    std::int64_t numel() const;
    int rows() const;  // 2-d views
    int cols() const;

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    void fill(double v);
    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::int64_t shape_numel(const std::vector<int>& s);

// Named parameter tensors with paired gradient accumulators.
// Iteration order is insertion order, which keeps optimizer state and
// serialization deterministic.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    // Returns the stored value tensor. Throws ConfigError on duplicate names.
    Tensor& add(const std::string& name, Tensor init);

    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    void zero_grads();
    std::size_t size() const { return entries_.size(); }
    std::int64_t coordinate_count() const;

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    // Flat coordinate access across all parameters, used by the
    // finite-difference checker and the optimizer.
    double& coord(std::int64_t flat);
    double grad_coord(std::int64_t flat) const;

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Bias-corrected adaptive moment optimizer state over one ParamSet.
class AdamOptimizer {
public:
    explicit AdamOptimizer(const ParamSet& params, double lr = 1e-3,
                           double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

    // Applies one update from the accumulated gradients, then zeroes them.
    void step(ParamSet& params);

    std::int64_t step_count() const { return step_; }
    double lr() const { return lr_; }

private:
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::int64_t step_ = 0;
    double lr_, beta1_, beta2_, eps_;
};

}  // namespace chase

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "msfum/rng.hpp"

namespace msfum {

// Two scalar widths back the same code: 32-bit "standard" for training and
// inference, 64-bit "checking" for finite-difference gradient verification.
// A graph is homogeneous in its scalar type by construction.
enum class Precision { standard, checking };

template <typename T>
struct precision_of;
template <>
struct precision_of<float> {
    static constexpr Precision value = Precision::standard;
};
template <>
struct precision_of<double> {
    static constexpr Precision value = Precision::checking;
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

[[noreturn]] void contract_fail(const std::string& msg);

inline void check(bool cond, const std::string& msg) {
    if (!cond) contract_fail(msg);
}

// Thread-local switch: when disabled, ops compute values but record no tape
// nodes. Used for inference and for finite-difference probes.
class GradMode {
public:
    static bool enabled();
    static void set_enabled(bool on);
};

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <typename T>
struct TensorImpl;

// During backward, each node's backward_fn receives d(loss)/d(node) and
// routes each parent's share through the sink, which hands out a
// zero-initialised buffer per node on first use.
template <typename T>
using GradSink = std::function<std::vector<T>&(TensorImpl<T>*)>;

template <typename T>
using BackwardFn = std::function<void(const std::vector<T>&, const GradSink<T>&)>;

template <typename T>
struct TensorImpl {
    std::vector<int64_t> shape;
    std::vector<T> value;
    bool requires_grad = false;
    std::vector<T> grad;  // sized numel iff requires_grad, else empty

    // tape
    std::vector<std::shared_ptr<TensorImpl<T>>> parents;
    BackwardFn<T> backward_fn;
};

// Shared-handle tensor: copies alias the same storage and tape node.
template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<int64_t> shape, T fill, bool requires_grad = false);
    static Tensor from_data(std::vector<int64_t> shape, std::vector<T> data,
                            bool requires_grad = false);
    static Tensor scalar(T v);
    static Tensor uniform(std::vector<int64_t> shape, Rng& rng, double lo, double hi,
                          bool requires_grad = false);

    // Builds an op output. Records the tape edge only when grad mode is on
    // and some parent requires grad; otherwise returns a plain leaf.
    static Tensor make_node(std::vector<int64_t> shape, std::vector<T> value,
                            std::vector<Tensor> parents, BackwardFn<T> fn);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int64_t>& shape() const { return impl_->shape; }
    int64_t rank() const { return static_cast<int64_t>(impl_->shape.size()); }
    int64_t dim(int64_t i) const;
    int64_t numel() const { return static_cast<int64_t>(impl_->value.size()); }

    std::vector<T>& data() { return impl_->value; }
    const std::vector<T>& data() const { return impl_->value; }
    T* ptr() { return impl_->value.data(); }
    const T* ptr() const { return impl_->value.data(); }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on);
    std::vector<T>& grad();
    const std::vector<T>& grad() const;
    void zero_grad();

    T item() const;
    int64_t offset(std::initializer_list<int64_t> idx) const;
    T at(std::initializer_list<int64_t> idx) const { return impl_->value[offset(idx)]; }
    T& at_mut(std::initializer_list<int64_t> idx) { return impl_->value[offset(idx)]; }

    // Value copy detached from the tape.
    Tensor detached() const;

    TensorImpl<T>* node() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

// Reverse-mode sweep from a scalar loss. Accumulates d(loss)/d(t) into the
// grad buffer of every requires_grad tensor reachable from the loss;
// calling it again on the same graph accumulates again.
template <typename T>
void backward(const Tensor<T>& loss);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
bool all_finite(const Tensor<T>& t);

}  // namespace msfum

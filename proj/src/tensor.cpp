#include "msfum/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace msfum {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

void contract_fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(prev_); }

template <typename T>
Tensor<T> Tensor<T>::zeros(std::vector<int64_t> shape, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    check(n >= 0, "tensor shape must be non-negative: " + shape_str(shape));
    return from_data(std::move(shape), std::vector<T>(static_cast<size_t>(n), T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(std::vector<int64_t> shape, T fill, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<T>(static_cast<size_t>(n), fill), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(std::vector<int64_t> shape, std::vector<T> data, bool requires_grad) {
    check(shape_numel(shape) == static_cast<int64_t>(data.size()),
          "tensor data size " + std::to_string(data.size()) + " does not match shape " +
              shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = std::move(shape);
    t.impl_->value = std::move(data);
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v) {
    return from_data({1}, {v});
}

template <typename T>
Tensor<T> Tensor<T>::uniform(std::vector<int64_t> shape, Rng& rng, double lo, double hi,
                             bool requires_grad) {
    const int64_t n = shape_numel(shape);
    std::vector<T> data(static_cast<size_t>(n));
    for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
    return from_data(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::make_node(std::vector<int64_t> shape, std::vector<T> value,
                               std::vector<Tensor> parents, BackwardFn<T> fn) {
    bool track = GradMode::enabled();
    if (track) {
        bool any = false;
        for (const auto& p : parents) any = any || p.requires_grad();
        track = any;
    }
    Tensor out = from_data(std::move(shape), std::move(value));
    if (track) {
        out.set_requires_grad(true);
        out.impl_->parents.reserve(parents.size());
        for (auto& p : parents) out.impl_->parents.push_back(p.impl());
        out.impl_->backward_fn = std::move(fn);
    }
    return out;
}

template <typename T>
int64_t Tensor<T>::dim(int64_t i) const {
    const int64_t r = rank();
    if (i < 0) i += r;
    check(i >= 0 && i < r, "axis " + std::to_string(i) + " out of range for " + shape_str(shape()));
    return impl_->shape[static_cast<size_t>(i)];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    if (on) {
        impl_->grad.assign(impl_->value.size(), T(0));
    } else {
        impl_->grad.clear();
    }
}

template <typename T>
std::vector<T>& Tensor<T>::grad() {
    check(impl_->requires_grad, "grad requested on a tensor that does not require grad");
    return impl_->grad;
}

template <typename T>
const std::vector<T>& Tensor<T>::grad() const {
    check(impl_->requires_grad, "grad requested on a tensor that does not require grad");
    return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
    if (impl_->requires_grad) impl_->grad.assign(impl_->value.size(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
    check(numel() == 1, "item() requires a single-element tensor, got " + shape_str(shape()));
    return impl_->value[0];
}

template <typename T>
int64_t Tensor<T>::offset(std::initializer_list<int64_t> idx) const {
    check(static_cast<int64_t>(idx.size()) == rank(),
          "index rank mismatch for " + shape_str(shape()));
    int64_t flat = 0;
    size_t k = 0;
    for (int64_t i : idx) {
        const int64_t extent = impl_->shape[k];
        check(i >= 0 && i < extent, "index out of bounds on axis " + std::to_string(k));
        flat = flat * extent + i;
        ++k;
    }
    return flat;
}

template <typename T>
Tensor<T> Tensor<T>::detached() const {
    return from_data(impl_->shape, impl_->value);
}

template <typename T>
void backward(const Tensor<T>& loss) {
    check(loss.defined() && loss.numel() == 1,
          "backward requires a scalar loss, got " +
              (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    TensorImpl<T>* root = loss.node();
    if (!root->requires_grad) return;  // nothing on the tape

    // Topological order with consumers ahead of producers: reverse of an
    // iterative DFS post-order following parent edges.
    std::vector<TensorImpl<T>*> post;
    std::unordered_set<TensorImpl<T>*> seen;
    struct Frame {
        TensorImpl<T>* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    seen.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorImpl<T>* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            post.push_back(f.node);
            stack.pop_back();
        }
    }

    std::unordered_map<TensorImpl<T>*, std::vector<T>> flow;
    flow[root] = {T(1)};
    auto sink = [&flow](TensorImpl<T>* n) -> std::vector<T>& {
        auto it = flow.find(n);
        if (it == flow.end()) {
            it = flow.emplace(n, std::vector<T>(n->value.size(), T(0))).first;
        }
        return it->second;
    };

    for (auto rit = post.rbegin(); rit != post.rend(); ++rit) {
        TensorImpl<T>* n = *rit;
        auto it = flow.find(n);
        if (it == flow.end()) continue;  // not reached by any grad path
        if (n->backward_fn) n->backward_fn(it->second, sink);
        if (n->requires_grad) {
            auto& g = n->grad;
            const auto& f = it->second;
            for (size_t i = 0; i < g.size(); ++i) g[i] += f[i];
        }
        flow.erase(it);
    }
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (T v : t.data()) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);
template bool all_finite<float>(const Tensor<float>&);
template bool all_finite<double>(const Tensor<double>&);

}  // namespace msfum

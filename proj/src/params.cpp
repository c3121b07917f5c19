#include "msfum/params.hpp"

#include <cmath>

namespace msfum {

template <typename T>
Tensor<T> ParamStore<T>::add(const std::string& name, std::vector<int64_t> shape,
                             std::vector<T> values) {
    check(!has(name), "ParamStore: duplicate parameter name '" + name + "'");
    Tensor<T> t = Tensor<T>::from_data(std::move(shape), std::move(values), true);
    index_[name] = entries_.size();
    entries_.emplace_back(name, t);
    return t;
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
    return entries_[it->second].second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
    return entries_[it->second].second;
}

template <typename T>
int64_t ParamStore<T>::total_scalars() const {
    int64_t n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
}

template <typename T>
void ParamStore<T>::zero_grads() {
    for (auto& [name, t] : entries_) t.zero_grad();
}

template <typename T>
std::vector<T> fanin_uniform(Rng& rng, int64_t count, int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> v(static_cast<size_t>(count));
    for (auto& e : v) e = static_cast<T>(rng.uniform(-bound, bound));
    return v;
}

template class ParamStore<float>;
template class ParamStore<double>;
template std::vector<float> fanin_uniform<float>(Rng&, int64_t, int64_t);
template std::vector<double> fanin_uniform<double>(Rng&, int64_t, int64_t);

}  // namespace msfum

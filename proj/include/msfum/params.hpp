#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "msfum/rng.hpp"
#include "msfum/tensor.hpp"

namespace msfum {

// Named parameter registry. Iteration follows registration order, which is
// fixed by construction order, so serialization and optimizer state are
// deterministic.
template <typename T>
class ParamStore {
public:
    Tensor<T> add(const std::string& name, std::vector<int64_t> shape, std::vector<T> values);

    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Tensor<T>& get(const std::string& name);
    const Tensor<T>& get(const std::string& name) const;

    const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
    int64_t tensor_count() const { return static_cast<int64_t>(entries_.size()); }
    int64_t total_scalars() const;
    void zero_grads();

private:
    std::vector<std::pair<std::string, Tensor<T>>> entries_;
    std::unordered_map<std::string, size_t> index_;
};

// U(-1/sqrt(fan_in), 1/sqrt(fan_in))
template <typename T>
std::vector<T> fanin_uniform(Rng& rng, int64_t count, int64_t fan_in);

}  // namespace msfum

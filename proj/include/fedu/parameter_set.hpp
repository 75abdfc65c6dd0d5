#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fedu/tensor.hpp"

namespace fedu {

// Ordered, named collection of parameter tensors. Order is the iteration,
// aggregation, and serialization order, so it is part of the contract.
class ParameterSet {
public:
    void add(std::string name, Tensor tensor);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const std::string& name(std::size_t i) const { return entries_[i].first; }
    const Tensor& tensor(std::size_t i) const { return entries_[i].second; }
    Tensor& tensor(std::size_t i) { return entries_[i].second; }

    bool has(const std::string& name) const;
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);

    Index total_size() const;

    // Same entry count, names, and shapes, in the same order.
    bool congruent_with(const ParameterSet& other) const;
    // ContractError naming the first offending entry when not congruent.
    static void require_congruent(const ParameterSet& a, const ParameterSet& b,
                                  const std::string& context);

    // Deep copy; `requires_grad` overrides the flag on every copied tensor
    // when provided.
    ParameterSet clone() const;
    ParameterSet clone(bool requires_grad) const;

    // Congruence-checked elementwise value overwrite; graph metadata of the
    // destination tensors is untouched.
    void copy_values_from(const ParameterSet& source);

    // Values of all entries concatenated in set order.
    Vector flatten_values() const;

    void clear_grads();

    // Checkpoint file: little-endian, header (format version u32, entry count
    // u32), then per entry: name length u32, UTF-8 name bytes, rank u32, dims
    // u64 each, values f64 row-major. Bit-exact round-trip.
    void save(const std::string& path) const;
    static ParameterSet load(const std::string& path);

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

}  // namespace fedu

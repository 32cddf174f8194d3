#ifndef EGCN_PARAM_STORE_HPP
#define EGCN_PARAM_STORE_HPP

#include <map>
#include <string>
#include <vector>

#include "egcn/tensor.hpp"

namespace egcn {

/// Named trainable tensors with their gradient accumulators and optimizer
/// state slots. Iteration order is the sorted name order, so every consumer
/// (Adam, serialization, gradient checks) sees parameters deterministically.
class param_store {
public:
    struct entry {
        tensor value;
        tensor grad;
        std::map<std::string, tensor> slots; // optimizer state, keyed by slot name
    };

    /// Registers a parameter; names must be unique.
    void add(const std::string& name, tensor init);

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }

    tensor& value(const std::string& name) { return find(name).value; }
    const tensor& value(const std::string& name) const { return find(name).value; }
    tensor& grad(const std::string& name) { return find(name).grad; }
    const tensor& grad(const std::string& name) const { return find(name).grad; }

    /// Optimizer slot, created zero-filled on first access.
    tensor& slot(const std::string& name, const std::string& slot_name);

    void zero_grads();

    /// grad[name] += g (shapes must match).
    void accumulate_grad(const std::string& name, const tensor& g);

    std::vector<std::string> names() const;
    std::size_t size() const { return entries_.size(); }

private:
    entry& find(const std::string& name);
    const entry& find(const std::string& name) const;

    std::map<std::string, entry> entries_;
};

} // namespace egcn

#endif // EGCN_PARAM_STORE_HPP

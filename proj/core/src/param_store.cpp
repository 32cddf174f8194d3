#include "egcn/param_store.hpp"

namespace egcn {

void param_store::add(const std::string& name, tensor init) {
    if (entries_.count(name)) {
        throw structural_error("param_store: duplicate parameter name '" + name + "'");
    }
    entry e;
    e.grad = tensor(init.shape());
    e.value = std::move(init);
    entries_.emplace(name, std::move(e));
}

param_store::entry& param_store::find(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw structural_error("param_store: unknown parameter '" + name + "'");
    }
    return it->second;
}

const param_store::entry& param_store::find(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw structural_error("param_store: unknown parameter '" + name + "'");
    }
    return it->second;
}

tensor& param_store::slot(const std::string& name, const std::string& slot_name) {
    entry& e = find(name);
    auto it = e.slots.find(slot_name);
    if (it == e.slots.end()) {
        it = e.slots.emplace(slot_name, tensor(e.value.shape())).first;
    }
    return it->second;
}

void param_store::zero_grads() {
    for (auto& [name, e] : entries_) {
        e.grad = tensor(e.value.shape());
    }
}

void param_store::accumulate_grad(const std::string& name, const tensor& g) {
    entry& e = find(name);
    if (!e.grad.same_shape(g)) {
        throw structural_error("param_store: gradient shape " + g.shape_str() +
                               " does not match parameter '" + name + "' " + e.value.shape_str());
    }
    for (index_t i = 0; i < g.size(); ++i) e.grad[i] += g[i];
}

std::vector<std::string> param_store::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

} // namespace egcn

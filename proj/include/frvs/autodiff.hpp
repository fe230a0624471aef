#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <unordered_set>

#include "frvs/tensor.hpp"

namespace frvs {

// Reverse-mode autodiff node. The graph is built eagerly by the ops in
// ops.hpp / warp.hpp; backward() walks it once in reverse topological order.
template <typename T>
struct NodeT : std::enable_shared_from_this<NodeT<T>> {
    TensorT<T> value;
    TensorT<T> grad;  // lazily allocated; empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT<T>>> parents;
    std::function<void(NodeT<T>&)> backward_fn;  // reads this->grad, accumulates into parents

    NodeT() = default;
    explicit NodeT(TensorT<T> v, bool req = false) : value(std::move(v)), requires_grad(req) {}

    bool needs_grad() const { return requires_grad || !parents.empty(); }

    TensorT<T>& ensure_grad() {
        if (grad.data.empty()) grad = TensorT<T>::zeros(value.shape);
        return grad;
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), T(0));
    }
};

template <typename T>
using NodePtrT = std::shared_ptr<NodeT<T>>;

template <typename T>
NodePtrT<T> make_leaf(TensorT<T> v, bool requires_grad = false) {
    return std::make_shared<NodeT<T>>(std::move(v), requires_grad);
}

template <typename T>
NodePtrT<T> make_const(TensorT<T> v) {
    return make_leaf<T>(std::move(v), false);
}

// Accumulates d(root)/d(ancestor) into every needs_grad ancestor.
// Repeated calls without zeroing accumulate.
template <typename T>
void backward(const NodePtrT<T>& root) {
    require(root->value.is_scalar(), "backward: root must be scalar, got " + root->value.shape_str());

    // iterative post-order DFS
    std::vector<NodeT<T>*> topo;
    std::unordered_set<NodeT<T>*> visited;
    std::vector<std::pair<NodeT<T>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodeT<T>* p = node->parents[idx++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    // interior grads are per-call scratch; only leaves accumulate across calls
    for (NodeT<T>* n : topo)
        if (!n->parents.empty()) n->zero_grad();
    root->ensure_grad();
    root->grad.data[0] += T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        NodeT<T>* n = *it;
        if (n->backward_fn && !n->grad.data.empty()) n->backward_fn(*n);
    }
}

// Ordered map from parameter name to node; iteration is lexicographic.
template <typename T>
struct ParameterStoreT {
    std::map<std::string, NodePtrT<T>> params;

    NodePtrT<T> add(const std::string& name, TensorT<T> value) {
        require(!params.count(name), "parameter name not unique: " + name);
        auto n = make_leaf<T>(std::move(value), true);
        params.emplace(name, n);
        return n;
    }
    NodePtrT<T> at(const std::string& name) const {
        auto it = params.find(name);
        require(it != params.end(), "unknown parameter: " + name);
        return it->second;
    }
    bool contains(const std::string& name) const { return params.count(name) != 0; }
    std::size_t size() const { return params.size(); }

    void zero_grad() {
        for (auto& [name, n] : params) n->zero_grad();
    }

    template <typename U>
    ParameterStoreT<U> cast() const {
        ParameterStoreT<U> out;
        for (auto& [name, n] : params) out.add(name, n->value.template cast<U>());
        return out;
    }
};

using Node = NodeT<float>;
using NodePtr = NodePtrT<float>;
using ParameterStore = ParameterStoreT<float>;

}  // namespace frvs

#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "gms/common.hpp"
#include "gms/rng.hpp"

namespace gms {

template <typename T>
class Tensor;
template <typename T>
class BackwardCtx;
template <typename T>
class GradMap;

namespace detail {

inline thread_local bool g_grad_enabled = true;

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    bool requires_grad = false;
    bool consumed = false;  // a backward pass already ran through this node
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(const std::vector<T>&, BackwardCtx<T>&)> backward;

    bool is_leaf() const { return !backward; }
};

}  // namespace detail

inline bool grad_enabled() { return detail::g_grad_enabled; }

// Disables graph recording in scope (used by evaluation paths).
class NoGradGuard {
  public:
    NoGradGuard() : prev_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
    ~NoGradGuard() { detail::g_grad_enabled = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// Dense row-major tensor. Values are immutable once produced by an op;
// leaf tensors (parameters, inputs) may be mutated through data() between
// graph lifetimes. Copies share the underlying node.
template <typename T>
class Tensor {
  public:
    using Node = detail::TensorNode<T>;

    Tensor() = default;

    static Tensor zeros(Shape shape) {
        return from_data(std::move(shape), {});
    }

    static Tensor full(Shape shape, T v) {
        size_t n = shape_numel(shape);
        auto node = std::make_shared<Node>();
        node->shape = std::move(shape);
        node->value.assign(n, v);
        return Tensor(std::move(node));
    }

    static Tensor scalar(T v) { return full({1}, v); }

    static Tensor from_data(Shape shape, std::vector<T> data) {
        size_t n = shape_numel(shape);
        if (!data.empty() && data.size() != n)
            throw DimensionError(strfmt("tensor: data length %zu does not match shape %s",
                                        data.size(), shape_str(shape).c_str()));
        auto node = std::make_shared<Node>();
        node->shape = std::move(shape);
        if (data.empty())
            node->value.assign(n, T(0));
        else
            node->value = std::move(data);
        return Tensor(std::move(node));
    }

    static Tensor uniform(Shape shape, T lo, T hi, Rng& rng) {
        Tensor t = zeros(std::move(shape));
        for (T& v : t.node_->value) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    static Tensor randn(Shape shape, Rng& rng) {
        Tensor t = zeros(std::move(shape));
        for (T& v : t.node_->value) v = static_cast<T>(rng.normal());
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    size_t numel() const { return node_->value.size(); }

    const T* data() const { return node_->value.data(); }
    // Mutation is only valid on leaves between graph lifetimes (optimizer,
    // finite-difference probes).
    T* data() { return node_->value.data(); }
    const std::vector<T>& values() const { return node_->value; }

    T item() const {
        if (numel() != 1)
            throw UsageError(strfmt("item(): tensor has %zu elements, expected 1", numel()));
        return node_->value[0];
    }

    T at(std::initializer_list<int> idx) const {
        const Shape& s = node_->shape;
        if (idx.size() != s.size())
            throw DimensionError(strfmt("at(): %zu indices for rank-%zu tensor", idx.size(), s.size()));
        size_t flat = 0, axis = 0;
        for (int i : idx) {
            flat = flat * static_cast<size_t>(s[axis]) + static_cast<size_t>(i);
            ++axis;
        }
        return node_->value[flat];
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        if (b && !node_->is_leaf())
            throw UsageError("set_requires_grad: only valid on leaf tensors");
        node_->requires_grad = b;
        return *this;
    }

    bool is_leaf() const { return node_->is_leaf(); }

    // Stable identity for gradient maps and optimizer registration.
    const void* id() const { return node_.get(); }

    Tensor clone() const {
        Tensor t = from_data(node_->shape, node_->value);
        return t;
    }

    bool same_values(const Tensor& other) const {
        return node_->shape == other.node_->shape && node_->value == other.node_->value;
    }

  private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    std::shared_ptr<Node> node_;

    template <typename U>
    friend GradMap<U> backward(const Tensor<U>& loss);
    template <typename U>
    friend class GradMap;
    template <typename U>
    friend class BackwardCtx;

    friend Node* detail_node(const Tensor& t) { return t.node_.get(); }
    friend std::shared_ptr<Node> detail_node_ptr(const Tensor& t) { return t.node_; }

  public:
    // Used by op implementations to attach autodiff linkage to an output.
    // `fn` receives the output gradient and a context for accumulating into
    // the parents' gradient buffers. Never capture the output Tensor itself
    // inside `fn`; capture a raw pointer to its value vector instead.
    static void attach(Tensor& out, std::vector<Tensor> inputs,
                       std::function<void(const std::vector<T>&, BackwardCtx<T>&)> fn) {
        out.node_->requires_grad = true;
        out.node_->parents.reserve(inputs.size());
        for (auto& in : inputs) out.node_->parents.push_back(in.node_);
        out.node_->backward = std::move(fn);
    }

    static bool should_record(std::initializer_list<const Tensor*> inputs) {
        if (!grad_enabled()) return false;
        for (const Tensor* t : inputs)
            if ((*t).node_ && (*t).node_->requires_grad) return true;
        return false;
    }
};

// Gradient accumulation context handed to op backward functions.
template <typename T>
class BackwardCtx {
  public:
    // Returns the accumulation buffer for parent `i`, or nullptr when that
    // parent does not require gradients (frozen tensors stay untouched).
    std::vector<T>* grad(size_t i) {
        auto& parent = (*parents_)[i];
        if (!parent->requires_grad) return nullptr;
        auto it = bufs_->find(parent.get());
        if (it == bufs_->end()) {
            it = bufs_->emplace(parent.get(), std::vector<T>(shape_numel(parent->shape), T(0))).first;
        }
        return &it->second;
    }

  private:
    template <typename U>
    friend GradMap<U> backward(const Tensor<U>& loss);

    using NodeVec = std::vector<std::shared_ptr<detail::TensorNode<T>>>;
    BackwardCtx(const NodeVec* parents, std::unordered_map<detail::TensorNode<T>*, std::vector<T>>* bufs)
        : parents_(parents), bufs_(bufs) {}

    const NodeVec* parents_;
    std::unordered_map<detail::TensorNode<T>*, std::vector<T>>* bufs_;
};

// Result of backward(): gradients of the loss w.r.t. every requires_grad
// leaf reached by the graph, keyed by tensor identity.
template <typename T>
class GradMap {
  public:
    bool has(const Tensor<T>& t) const { return grads_.count(t.node_.get()) > 0; }

    Tensor<T> grad(const Tensor<T>& t) const {
        auto it = grads_.find(t.node_.get());
        if (it == grads_.end())
            throw UsageError("grad: no gradient recorded for this tensor");
        return Tensor<T>::from_data(t.shape(), it->second);
    }

    const std::vector<T>& grad_values(const Tensor<T>& t) const {
        auto it = grads_.find(t.node_.get());
        if (it == grads_.end())
            throw UsageError("grad: no gradient recorded for this tensor");
        return it->second;
    }

    size_t size() const { return grads_.size(); }

  private:
    template <typename U>
    friend GradMap<U> backward(const Tensor<U>& loss);
    std::unordered_map<const void*, std::vector<T>> grads_;
};

// Reverse-mode sweep. Visits each reachable node exactly once in reverse
// topological order, accumulates fan-out gradients additively, then consumes
// the graph (interior links are released; a second backward on the same
// graph raises StateError).
template <typename T>
GradMap<T> backward(const Tensor<T>& loss) {
    using Node = detail::TensorNode<T>;
    if (!loss.defined()) throw UsageError("backward: undefined loss tensor");
    Node* root = loss.node_.get();
    if (loss.numel() != 1)
        throw UsageError(strfmt("backward: loss must be scalar, got %zu elements", loss.numel()));
    if (root->consumed)
        throw StateError("backward: graph already consumed by a previous backward");
    if (!root->requires_grad)
        throw UsageError("backward: loss is not connected to any requires_grad tensor");

    // Iterative postorder DFS over requires_grad ancestors.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Node* cur = stack.back().node;
        size_t idx = stack.back().next_parent;
        Node* child = nullptr;
        while (idx < cur->parents.size()) {
            Node* p = cur->parents[idx].get();
            ++idx;
            if (p->requires_grad && !visited.count(p)) {
                child = p;
                break;
            }
        }
        stack.back().next_parent = idx;
        if (child) {
            visited.insert(child);
            stack.push_back({child, 0});
        } else if (idx >= cur->parents.size()) {
            order.push_back(cur);
            stack.pop_back();
        }
    }

    std::unordered_map<Node*, std::vector<T>> bufs;
    bufs.emplace(root, std::vector<T>(1, T(1)));

    GradMap<T> out;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        auto bit = bufs.find(n);
        if (bit == bufs.end()) continue;  // received no gradient (disconnected)
        if (n->is_leaf()) {
            out.grads_.emplace(n, std::move(bit->second));
            bufs.erase(bit);
            continue;
        }
        // move the gradient out first: the ctx inserts into `bufs`, which can
        // rehash and invalidate iterators
        std::vector<T> gout = std::move(bit->second);
        bufs.erase(bit);
        {
            BackwardCtx<T> ctx(&n->parents, &bufs);
            n->backward(gout, ctx);
        }
        n->consumed = true;
        n->backward = nullptr;
        n->parents.clear();
    }
    return out;
}

}  // namespace gms

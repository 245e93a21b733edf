#ifndef ASTN_TENSOR_HPP
#define ASTN_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace astn {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int e : s) n *= static_cast<std::size_t>(e);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string r = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + "]";
}

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

/// One value in the autodiff tape. Children hold shared_ptrs to parents,
/// so a graph stays alive exactly as long as some downstream tensor does.
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad; // empty until first accumulation
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<NodePtr> parents;
    // Accumulates this node's grad into its parents' grads.
    std::function<void(TensorNode&)> backprop;

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(Shape s, bool requires_grad = false) {
        auto n = std::make_shared<TensorNode>();
        n->data.assign(shape_numel(s), 0.0);
        n->shape = std::move(s);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }
    static Tensor from(Shape s, std::vector<double> v, bool requires_grad = false) {
        if (shape_numel(s) != v.size())
            throw std::invalid_argument("tensor data size " + std::to_string(v.size()) +
                                        " does not match shape " + shape_str(s));
        auto n = std::make_shared<TensorNode>();
        n->shape = std::move(s);
        n->data = std::move(v);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }
    static Tensor scalar(double v) { return from({1}, {v}); }

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->size(); }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& mutable_data() { return node_->data; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }

    double item() const {
        if (node_->data.size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
        return node_->data[0];
    }
    void zero_grad() {
        node_->grad.clear();
        node_->backward_done = false;
    }

    NodePtr node() const { return node_; }

  private:
    NodePtr node_;
};

namespace detail {

inline NodePtr make_node(Shape s, std::size_t n, std::vector<NodePtr> parents) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(s);
    node->data.assign(n, 0.0);
    for (auto& p : parents)
        if (p->requires_grad) node->requires_grad = true;
    node->parents = std::move(parents);
    return node;
}

} // namespace detail

/// Reverse-mode sweep from a scalar loss. Visits each node once, in reverse
/// topological order. Calling it twice on the same loss is an error.
inline void backward(const Tensor& loss) {
    NodePtr root = loss.node();
    if (root->data.size() != 1) throw std::invalid_argument("backward() requires a scalar loss");
    if (root->backward_done)
        throw std::logic_error("backward() already called on this loss; reset grads first");
    root->backward_done = true;

    // Iterative post-order DFS over grad-requiring nodes.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    if (root->requires_grad || root->backprop) {
        stack.emplace_back(root.get(), 0);
        seen.insert(root.get());
    }
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            TensorNode* p = n->parents[i++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backprop && n->grad.size() == n->data.size()) n->backprop(*n);
    }
}

// ---------------------------------------------------------------------------
// Elementwise ops. Broadcasting is restricted to a leading axis of extent 1.
// ---------------------------------------------------------------------------

namespace detail {

struct BroadcastPlan {
    Shape out_shape;
    bool a_bcast = false; // a is replicated along the leading axis
    bool b_bcast = false;
    std::size_t inner = 0; // elements per leading slice
    std::size_t reps = 0;  // leading extent of the output
};

inline BroadcastPlan broadcast_plan(const Shape& a, const Shape& b, const char* opname) {
    BroadcastPlan p;
    auto fail = [&] {
        throw std::invalid_argument(std::string(opname) + ": incompatible shapes " + shape_str(a) +
                                    " and " + shape_str(b));
    };
    if (a == b) {
        p.out_shape = a;
        p.inner = shape_numel(a);
        p.reps = 1;
        return p;
    }
    if (a.size() != b.size() || a.empty()) fail();
    for (std::size_t i = 1; i < a.size(); ++i)
        if (a[i] != b[i]) fail();
    if (a[0] == 1 && b[0] > 1) {
        p.a_bcast = true;
        p.out_shape = b;
        p.reps = static_cast<std::size_t>(b[0]);
    } else if (b[0] == 1 && a[0] > 1) {
        p.b_bcast = true;
        p.out_shape = a;
        p.reps = static_cast<std::size_t>(a[0]);
    } else {
        fail();
    }
    p.inner = shape_numel(p.out_shape) / p.reps;
    return p;
}

template <class Fwd, class BwdA, class BwdB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, BwdA dfa, BwdB dfb) {
    auto plan = broadcast_plan(a.shape(), b.shape(), name);
    std::size_t n = plan.inner * plan.reps;
    auto node = make_node(plan.out_shape, n, {a.node(), b.node()});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t r = 0; r < plan.reps; ++r) {
        for (std::size_t i = 0; i < plan.inner; ++i) {
            std::size_t o = r * plan.inner + i;
            node->data[o] = fwd(pa[plan.a_bcast ? i : o], pb[plan.b_bcast ? i : o]);
        }
    }
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backprop = [an, bn, plan, dfa, dfb](TensorNode& self) {
            const double* pa = an->data.data();
            const double* pb = bn->data.data();
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (std::size_t r = 0; r < plan.reps; ++r) {
                for (std::size_t i = 0; i < plan.inner; ++i) {
                    std::size_t o = r * plan.inner + i;
                    double g = self.grad[o];
                    double av = pa[plan.a_bcast ? i : o];
                    double bv = pb[plan.b_bcast ? i : o];
                    if (an->requires_grad) an->grad[plan.a_bcast ? i : o] += g * dfa(av, bv);
                    if (bn->requires_grad) bn->grad[plan.b_bcast ? i : o] += g * dfb(av, bv);
                }
            }
        };
    }
    return Tensor(node);
}

template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd dfa) {
    auto node = make_node(a.shape(), a.size(), {a.node()});
    for (std::size_t i = 0; i < a.size(); ++i) node->data[i] = fwd(a.data()[i]);
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an, dfa](TensorNode& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.data.size(); ++i)
                an->grad[i] += self.grad[i] * dfa(an->data[i], self.data[i]);
        };
    }
    return Tensor(node);
}

} // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}
inline Tensor relu(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}
/// Leaky rectifier with a small negative slope. The plain relu starves thin
/// layers of gradient once their pre-activations go negative on every
/// training sample; the leak keeps such units recoverable.
inline Tensor leaky_relu(const Tensor& a, double slope = 0.01) {
    return detail::unary_op(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}
inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}
inline Tensor scale(const Tensor& a, double c) {
    return detail::unary_op(
        a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Tensor sum(const Tensor& a) {
    auto node = detail::make_node({1}, 1, {a.node()});
    double s = 0.0;
    for (double v : a.data()) s += v;
    node->data[0] = s;
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an](TensorNode& self) {
            an->ensure_grad();
            for (double& g : an->grad) g += self.grad[0];
        };
    }
    return Tensor(node);
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

/// Mean of squared differences over all elements.
inline Tensor mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("mse: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    auto node = detail::make_node({1}, 1, {pred.node(), target.node()});
    std::size_t n = pred.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = pred.data()[i] - target.data()[i];
        s += d * d;
    }
    node->data[0] = s / static_cast<double>(n);
    if (node->requires_grad) {
        auto pn = pred.node();
        auto tn = target.node();
        node->backprop = [pn, tn, n](TensorNode& self) {
            double g = self.grad[0] * 2.0 / static_cast<double>(n);
            if (pn->requires_grad) pn->ensure_grad();
            if (tn->requires_grad) tn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                double d = pn->data[i] - tn->data[i];
                if (pn->requires_grad) pn->grad[i] += g * d;
                if (tn->requires_grad) tn->grad[i] -= g * d;
            }
        };
    }
    return Tensor(node);
}

/// Concatenation along axis 0; trailing dimensions must agree.
inline Tensor concat0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat0: empty input");
    Shape s0 = parts[0].shape();
    std::size_t inner = shape_numel(s0) / static_cast<std::size_t>(s0[0]);
    int lead = 0;
    std::vector<NodePtr> parents;
    for (const auto& t : parts) {
        const Shape& s = t.shape();
        if (s.size() != s0.size() || !std::equal(s.begin() + 1, s.end(), s0.begin() + 1))
            throw std::invalid_argument("concat0: incompatible shapes " + shape_str(s0) + " and " +
                                        shape_str(s));
        lead += s[0];
        parents.push_back(t.node());
    }
    Shape out = s0;
    out[0] = lead;
    auto node = detail::make_node(out, static_cast<std::size_t>(lead) * inner, parents);
    std::size_t off = 0;
    for (const auto& t : parts) {
        std::copy(t.data().begin(), t.data().end(), node->data.begin() + off);
        off += t.size();
    }
    if (node->requires_grad) {
        node->backprop = [](TensorNode& self) {
            std::size_t off = 0;
            for (auto& p : self.parents) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->data.size(); ++i)
                        p->grad[i] += self.grad[off + i];
                }
                off += p->data.size();
            }
        };
    }
    return Tensor(node);
}

/// Same data, new shape. Copies; the tape stays simple.
inline Tensor reshape(const Tensor& a, Shape s) {
    if (shape_numel(s) != a.size())
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(a.shape()) +
                                    " -> " + shape_str(s));
    auto node = detail::make_node(std::move(s), a.size(), {a.node()});
    node->data = a.data();
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an](TensorNode& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        };
    }
    return Tensor(node);
}

/// y = W x + b with W: [out,in], x: [in], b: [out].
inline Tensor linear(const Tensor& w, const Tensor& x, const Tensor& b) {
    if (w.shape().size() != 2 || x.shape().size() != 1 || b.shape().size() != 1 ||
        w.shape()[1] != x.shape()[0] || w.shape()[0] != b.shape()[0])
        throw std::invalid_argument("linear: shape mismatch W" + shape_str(w.shape()) + " x" +
                                    shape_str(x.shape()) + " b" + shape_str(b.shape()));
    int out = w.shape()[0], in = w.shape()[1];
    auto node = detail::make_node({out}, static_cast<std::size_t>(out), {w.node(), x.node(), b.node()});
    const double* pw = w.data().data();
    const double* px = x.data().data();
    for (int o = 0; o < out; ++o) {
        double s = b.data()[static_cast<std::size_t>(o)];
        const double* row = pw + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) s += row[i] * px[i];
        node->data[static_cast<std::size_t>(o)] = s;
    }
    if (node->requires_grad) {
        auto wn = w.node();
        auto xn = x.node();
        auto bn = b.node();
        node->backprop = [wn, xn, bn, out, in](TensorNode& self) {
            if (wn->requires_grad) wn->ensure_grad();
            if (xn->requires_grad) xn->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (int o = 0; o < out; ++o) {
                double g = self.grad[static_cast<std::size_t>(o)];
                if (g == 0.0) continue;
                if (bn->requires_grad) bn->grad[static_cast<std::size_t>(o)] += g;
                const double* row = wn->data.data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) {
                    if (wn->requires_grad)
                        wn->grad[static_cast<std::size_t>(o) * in + i] += g * xn->data[i];
                    if (xn->requires_grad) xn->grad[i] += g * row[i];
                }
            }
        };
    }
    return Tensor(node);
}

/// Mean over the spatial axes of a [C,H,W] map -> [C].
inline Tensor spatial_mean(const Tensor& a) {
    if (a.shape().size() != 3)
        throw std::invalid_argument("spatial_mean: expected [C,H,W], got " + shape_str(a.shape()));
    int c = a.shape()[0];
    std::size_t hw = static_cast<std::size_t>(a.shape()[1]) * a.shape()[2];
    auto node = detail::make_node({c}, static_cast<std::size_t>(c), {a.node()});
    for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        const double* p = a.data().data() + ch * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
        node->data[static_cast<std::size_t>(ch)] = s / static_cast<double>(hw);
    }
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an, c, hw](TensorNode& self) {
            an->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double g = self.grad[static_cast<std::size_t>(ch)] / static_cast<double>(hw);
                double* p = an->grad.data() + ch * hw;
                for (std::size_t i = 0; i < hw; ++i) p[i] += g;
            }
        };
    }
    return Tensor(node);
}

} // namespace astn

#endif

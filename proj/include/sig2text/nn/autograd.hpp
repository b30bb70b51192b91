#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "sig2text/nn/tensor.hpp"

namespace sig2text::nn {

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;
    bool requires_grad = false;
    std::string name;

    Tensor<T>& ensure_grad() {
        if (grad.data.size() != value.data.size()) {
            grad.shape = value.shape;
            grad.data.assign(value.data.size(), T(0));
        }
        return grad;
    }
    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

namespace detail {
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <class T>
Var<T> constant(Tensor<T> value, std::string name = {}) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->name = std::move(name);
    return n;
}

template <class T>
Var<T> parameter(Tensor<T> value, std::string name) {
    auto n = constant(std::move(value), std::move(name));
    n->requires_grad = true;
    return n;
}

namespace detail {

// Builds an op node. The callback receives (out, parents) as raw pointers so
// no ownership cycle forms through the closure.
template <class T, class Fn>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, Fn&& backward) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& p : parents) needs = needs || p->requires_grad;
    }
    if (needs) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        Node<T>* self = n.get();
        n->backward_fn = [self, fn = std::forward<Fn>(backward)]() { fn(*self); };
    }
    return n;
}

inline void check(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

}  // namespace detail

/// Runs reverse-mode accumulation from a scalar root. Leaf gradients add to
/// whatever they already hold.
template <class T>
void backward(const Var<T>& root, T seed = T(1)) {
    if (root->value.size() != 1) throw Error(ErrorCode::ShapeMismatch, "backward needs a scalar root");
    if (!root->requires_grad) return;
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad().data[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn();
        }
    }
    // Interior gradients are not needed after the sweep.
    for (Node<T>* n : order) {
        if (n->backward_fn) {
            n->grad.data.clear();
            n->grad.data.shrink_to_fit();
        }
    }
}

/// Y = X W + b with X (n x k), W (k x m), b (1 x m) or null.
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto& X = x->value;
    const auto& W = w->value;
    detail::check(X.cols() == W.rows(), "linear: " + shape_string(X) + " x " + shape_string(W));
    if (b) detail::check(b->value.size() == W.cols(), "linear: bias size");
    Tensor<T> y(X.rows(), W.cols());
    auto Y = as_matrix(y);
    Y.noalias() = as_matrix(X) * as_matrix(W);
    if (b) Y.rowwise() += as_matrix(b->value).row(0);
    std::vector<Var<T>> parents{x, w};
    if (b) parents.push_back(b);
    return detail::make_op<T>(std::move(y), std::move(parents), [](Node<T>& out) {
        auto dY = as_matrix(out.grad);
        Node<T>& xn = *out.parents[0];
        Node<T>& wn = *out.parents[1];
        if (xn.requires_grad) as_matrix(xn.ensure_grad()).noalias() += dY * as_matrix(wn.value).transpose();
        if (wn.requires_grad) as_matrix(wn.ensure_grad()).noalias() += as_matrix(xn.value).transpose() * dY;
        if (out.parents.size() > 2 && out.parents[2]->requires_grad) {
            as_matrix(out.parents[2]->ensure_grad()).row(0) += dY.colwise().sum();
        }
    });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    detail::check(a->value.size() == b->value.size(), "add: size mismatch");
    Tensor<T> y = a->value;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += b->value.data[i];
    return detail::make_op<T>(std::move(y), {a, b}, [](Node<T>& out) {
        for (auto& p : out.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad().data;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad.data[i];
        }
    });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
    Tensor<T> y = a->value;
    for (auto& v : y.data) v *= s;
    return detail::make_op<T>(std::move(y), {a}, [s](Node<T>& out) {
        auto& g = out.parents[0]->ensure_grad().data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * out.grad.data[i];
    });
}

/// Adds row (r mod period) of the table p to row r of x.
template <class T>
Var<T> add_positional(const Var<T>& x, const Var<T>& p, std::size_t period) {
    const auto& X = x->value;
    detail::check(period > 0 && X.rows() % period == 0, "add_positional: rows not a multiple of period");
    detail::check(p->value.rows() >= period && p->value.cols() == X.cols(), "add_positional: table too small");
    Tensor<T> y = X;
    const std::size_t d = X.cols();
    for (std::size_t r = 0; r < X.rows(); ++r) {
        const T* pr = p->value.row(r % period);
        T* yr = y.row(r);
        for (std::size_t c = 0; c < d; ++c) yr[c] += pr[c];
    }
    return detail::make_op<T>(std::move(y), {x, p}, [period](Node<T>& out) {
        Node<T>& xn = *out.parents[0];
        Node<T>& pn = *out.parents[1];
        if (xn.requires_grad) {
            auto& g = xn.ensure_grad().data;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad.data[i];
        }
        if (pn.requires_grad) {
            auto& g = pn.ensure_grad();
            const std::size_t d = out.grad.cols();
            for (std::size_t r = 0; r < out.grad.rows(); ++r) {
                T* gr = g.row(r % period);
                const T* src = out.grad.row(r);
                for (std::size_t c = 0; c < d; ++c) gr[c] += src[c];
            }
        }
    });
}

template <class T>
Var<T> embedding(const Var<T>& table, const std::vector<int>& ids) {
    const std::size_t d = table->value.cols();
    const std::size_t v = table->value.rows();
    Tensor<T> y(ids.size(), d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            throw Error(ErrorCode::OutOfRange, "embedding: id " + std::to_string(ids[i]));
        std::copy_n(table->value.row(static_cast<std::size_t>(ids[i])), d, y.row(i));
    }
    return detail::make_op<T>(std::move(y), {table}, [ids](Node<T>& out) {
        auto& g = out.parents[0]->ensure_grad();
        const std::size_t d = g.cols();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            T* gr = g.row(static_cast<std::size_t>(ids[i]));
            const T* src = out.grad.row(i);
            for (std::size_t c = 0; c < d; ++c) gr[c] += src[c];
        }
    });
}

template <class T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> y = a->value;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    return detail::make_op<T>(std::move(y), {a}, [](Node<T>& out) {
        Node<T>& an = *out.parents[0];
        auto& g = an.ensure_grad().data;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (an.value.data[i] > T(0)) g[i] += out.grad.data[i];
        }
    });
}

/// Inverted dropout. Identity when p is zero.
template <class T>
Var<T> dropout(const Var<T>& a, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw Error(ErrorCode::InvalidArgument, "dropout probability must be below 1");
    std::bernoulli_distribution keep(1.0 - p);
    const T s = T(1.0 / (1.0 - p));
    std::vector<T> mask(a->value.size());
    for (auto& m : mask) m = keep(rng) ? s : T(0);
    Tensor<T> y = a->value;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= mask[i];
    return detail::make_op<T>(std::move(y), {a}, [mask = std::move(mask)](Node<T>& out) {
        auto& g = out.parents[0]->ensure_grad().data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += mask[i] * out.grad.data[i];
    });
}

/// Row-wise layer normalization with affine gamma, beta (each 1 x d).
template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
    const auto& X = x->value;
    const std::size_t n = X.rows(), d = X.cols();
    detail::check(gamma->value.size() == d && beta->value.size() == d, "layer_norm: affine size");
    Tensor<T> y(n, d);
    auto xhat = std::make_shared<Tensor<T>>(n, d);
    auto inv_std = std::make_shared<std::vector<T>>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const T* xr = X.row(r);
        T mean = 0;
        for (std::size_t c = 0; c < d; ++c) mean += xr[c];
        mean /= T(d);
        T var = 0;
        for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= T(d);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        T* hr = xhat->row(r);
        T* yr = y.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            hr[c] = (xr[c] - mean) * is;
            yr[c] = gamma->value.data[c] * hr[c] + beta->value.data[c];
        }
    }
    return detail::make_op<T>(std::move(y), {x, gamma, beta}, [xhat, inv_std](Node<T>& out) {
        Node<T>& xn = *out.parents[0];
        Node<T>& gn = *out.parents[1];
        Node<T>& bn = *out.parents[2];
        const std::size_t n = out.grad.rows(), d = out.grad.cols();
        if (gn.requires_grad || bn.requires_grad) {
            auto& gg = gn.ensure_grad().data;
            auto& gb = bn.ensure_grad().data;
            for (std::size_t r = 0; r < n; ++r) {
                const T* dy = out.grad.row(r);
                const T* hr = xhat->row(r);
                for (std::size_t c = 0; c < d; ++c) {
                    gg[c] += dy[c] * hr[c];
                    gb[c] += dy[c];
                }
            }
        }
        if (!xn.requires_grad) return;
        auto& gx = xn.ensure_grad();
        std::vector<T> dh(d);
        for (std::size_t r = 0; r < n; ++r) {
            const T* dy = out.grad.row(r);
            const T* hr = xhat->row(r);
            T m1 = 0, m2 = 0;
            for (std::size_t c = 0; c < d; ++c) {
                dh[c] = dy[c] * gn.value.data[c];
                m1 += dh[c];
                m2 += dh[c] * hr[c];
            }
            m1 /= T(d);
            m2 /= T(d);
            T* g = gx.row(r);
            const T is = (*inv_std)[r];
            for (std::size_t c = 0; c < d; ++c) g[c] += is * (dh[c] - m1 - hr[c] * m2);
        }
    });
}

/// Shape of a batched multi-head attention call. Rows of q are laid out as
/// batch-major blocks of q_len, rows of k and v as blocks of k_len.
struct AttentionShape {
    std::size_t batch = 1;
    std::size_t q_len = 1;
    std::size_t k_len = 1;
    std::size_t heads = 1;
    bool causal = false;
};

/// Scaled dot-product attention over all heads. If probe is non-null the
/// attention probabilities are appended to it as a (batch*heads*q_len x k_len)
/// tensor.
template <class T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, AttentionShape s,
                 std::vector<Tensor<T>>* probe = nullptr) {
    const std::size_t d = q->value.cols();
    detail::check(s.heads > 0 && d % s.heads == 0, "attention: d_model not divisible by heads");
    detail::check(q->value.rows() == s.batch * s.q_len, "attention: query rows");
    detail::check(k->value.rows() == s.batch * s.k_len && v->value.rows() == s.batch * s.k_len,
                  "attention: key/value rows");
    detail::check(k->value.cols() == d && v->value.cols() == d, "attention: width");
    if (s.causal) detail::check(s.q_len <= s.k_len, "attention: causal mask needs q_len <= k_len");
    const std::size_t dh = d / s.heads;
    const T inv_sqrt = T(1) / std::sqrt(T(dh));
    using Stride = Eigen::OuterStride<>;
    using CMap = Eigen::Map<const RowMatrix<T>, 0, Stride>;
    using MMap = Eigen::Map<RowMatrix<T>, 0, Stride>;
    const auto Tq = static_cast<Eigen::Index>(s.q_len);
    const auto Tk = static_cast<Eigen::Index>(s.k_len);
    const auto Dh = static_cast<Eigen::Index>(dh);
    const Stride stride(static_cast<Eigen::Index>(d));
    // Causal offset lets a shorter query block align with the tail of the keys.
    const std::size_t offset = s.k_len - s.q_len;

    auto probs = std::make_shared<Tensor<T>>(s.batch * s.heads * s.q_len, s.k_len);
    Tensor<T> y(s.batch * s.q_len, d);
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t h = 0; h < s.heads; ++h) {
            CMap Q(q->value.data.data() + b * s.q_len * d + h * dh, Tq, Dh, stride);
            CMap K(k->value.data.data() + b * s.k_len * d + h * dh, Tk, Dh, stride);
            CMap V(v->value.data.data() + b * s.k_len * d + h * dh, Tk, Dh, stride);
            MatMap<T> P(probs->row((b * s.heads + h) * s.q_len), Tq, Tk);
            P.noalias() = (Q * K.transpose()) * inv_sqrt;
            for (Eigen::Index i = 0; i < Tq; ++i) {
                const Eigen::Index limit = s.causal ? static_cast<Eigen::Index>(offset) + i + 1 : Tk;
                T mx = -std::numeric_limits<T>::infinity();
                for (Eigen::Index j = 0; j < limit; ++j) mx = std::max(mx, P(i, j));
                T sum = 0;
                for (Eigen::Index j = 0; j < limit; ++j) {
                    P(i, j) = std::exp(P(i, j) - mx);
                    sum += P(i, j);
                }
                for (Eigen::Index j = 0; j < limit; ++j) P(i, j) /= sum;
                for (Eigen::Index j = limit; j < Tk; ++j) P(i, j) = T(0);
            }
            MMap Y(y.data.data() + b * s.q_len * d + h * dh, Tq, Dh, stride);
            Y.noalias() = P * V;
        }
    }
    if (probe) probe->push_back(*probs);
    return detail::make_op<T>(std::move(y), {q, k, v}, [probs, s, dh, inv_sqrt](Node<T>& out) {
        Node<T>& qn = *out.parents[0];
        Node<T>& kn = *out.parents[1];
        Node<T>& vn = *out.parents[2];
        const std::size_t d = out.grad.cols();
        const auto Tq = static_cast<Eigen::Index>(s.q_len);
        const auto Tk = static_cast<Eigen::Index>(s.k_len);
        const auto Dh = static_cast<Eigen::Index>(dh);
        const Stride stride(static_cast<Eigen::Index>(d));
        T* gq = qn.requires_grad ? qn.ensure_grad().data.data() : nullptr;
        T* gk = kn.requires_grad ? kn.ensure_grad().data.data() : nullptr;
        T* gv = vn.requires_grad ? vn.ensure_grad().data.data() : nullptr;
        RowMatrix<T> dP(Tq, Tk);
        for (std::size_t b = 0; b < s.batch; ++b) {
            for (std::size_t h = 0; h < s.heads; ++h) {
                const std::size_t qo = b * s.q_len * d + h * dh;
                const std::size_t ko = b * s.k_len * d + h * dh;
                CMap Q(qn.value.data.data() + qo, Tq, Dh, stride);
                CMap K(kn.value.data.data() + ko, Tk, Dh, stride);
                CMap V(vn.value.data.data() + ko, Tk, Dh, stride);
                CMap dY(out.grad.data.data() + qo, Tq, Dh, stride);
                ConstMatMap<T> P(probs->row((b * s.heads + h) * s.q_len), Tq, Tk);
                if (gv) MMap(gv + ko, Tk, Dh, stride).noalias() += P.transpose() * dY;
                if (!gq && !gk) continue;
                dP.noalias() = dY * V.transpose();
                // Softmax Jacobian; masked entries have P = 0 and drop out.
                for (Eigen::Index i = 0; i < Tq; ++i) {
                    const T dot = P.row(i).dot(dP.row(i));
                    for (Eigen::Index j = 0; j < Tk; ++j) dP(i, j) = P(i, j) * (dP(i, j) - dot) * inv_sqrt;
                }
                if (gq) MMap(gq + qo, Tq, Dh, stride).noalias() += dP * K;
                if (gk) MMap(gk + ko, Tk, Dh, stride).noalias() += dP.transpose() * Q;
            }
        }
    });
}

/// Per-row statistics from a cross-entropy call.
struct CrossEntropyStats {
    double nll_sum = 0;
    std::size_t tokens = 0;
    std::size_t correct = 0;
};

/// loss = norm * sum_i w_i * (logsumexp(z_i) - z_i[t_i]). Rows with weight
/// zero are ignored entirely.
template <class T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& targets, const std::vector<T>& weights,
                     T norm, CrossEntropyStats* stats = nullptr) {
    const auto& Z = logits->value;
    const std::size_t n = Z.rows(), vsz = Z.cols();
    detail::check(targets.size() == n && weights.size() == n, "cross_entropy: target count");
    auto soft = std::make_shared<Tensor<T>>(n, vsz);
    T loss = 0;
    CrossEntropyStats st;
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] == T(0)) continue;
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vsz)
            throw Error(ErrorCode::OutOfRange, "cross_entropy: target " + std::to_string(targets[i]));
        const T* z = Z.row(i);
        const std::size_t arg = static_cast<std::size_t>(std::max_element(z, z + vsz) - z);
        const T mx = z[arg];
        T sum = 0;
        T* p = soft->row(i);
        for (std::size_t c = 0; c < vsz; ++c) {
            p[c] = std::exp(z[c] - mx);
            sum += p[c];
        }
        for (std::size_t c = 0; c < vsz; ++c) p[c] /= sum;
        const T nll = std::log(sum) + mx - z[targets[i]];
        loss += weights[i] * nll;
        st.nll_sum += static_cast<double>(nll);
        st.tokens += 1;
        st.correct += arg == static_cast<std::size_t>(targets[i]);
    }
    if (stats) *stats = st;
    Tensor<T> y(1, 1, loss * norm);
    return detail::make_op<T>(std::move(y), {logits}, [soft, targets, weights, norm](Node<T>& out) {
        auto& g = out.parents[0]->ensure_grad();
        const T up = out.grad.data[0] * norm;
        const std::size_t vsz = g.cols();
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (weights[i] == T(0)) continue;
            const T f = up * weights[i];
            T* gr = g.row(i);
            const T* p = soft->row(i);
            for (std::size_t c = 0; c < vsz; ++c) gr[c] += f * p[c];
            gr[targets[i]] -= f;
        }
    });
}

/// Sum of all entries; a convenience root for tests.
template <class T>
Var<T> sum(const Var<T>& a) {
    T total = 0;
    for (T v : a->value.data) total += v;
    return detail::make_op<T>(Tensor<T>(1, 1, total), {a}, [](Node<T>& out) {
        auto& g = out.parents[0]->ensure_grad().data;
        for (auto& v : g) v += out.grad.data[0];
    });
}

}  // namespace sig2text::nn

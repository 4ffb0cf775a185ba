#pragma once

// Reverse-mode automatic differentiation over rank-2 tensors.
//
// A Tape records one forward pass. Parameters are bound by address with
// Tape::param(); every op appends a node whose backward closure scatters the
// upstream gradient into its inputs. Tape::backward() walks the nodes once in
// reverse order of creation, which is a valid topological order because a
// node can only reference earlier nodes.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fen/core/error.hpp"
#include "fen/core/tensor.hpp"

namespace fen::ad {

class Tape;

class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    bool requires_grad() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value) { return push(std::move(value), false, true, {}); }

    /// Bind a parameter tensor as a leaf. Repeated calls with the same storage
    /// return the same Var. Non-trainable parameters behave like constants.
    Var param(const Tensor& storage, bool trainable = true) {
        if (auto it = params_.find(&storage); it != params_.end()) return Var(this, it->second);
        Var v = push(storage, trainable, true, {});
        params_.emplace(&storage, v.id());
        return v;
    }

    /// Gradient accumulated for a bound parameter, or nullptr when the
    /// parameter was not bound, is frozen, or received no gradient.
    const Tensor* grad(const Tensor& storage) const {
        auto it = params_.find(&storage);
        if (it == params_.end()) return nullptr;
        const Node& n = nodes_[it->second];
        if (!n.requires_grad || n.grad.empty()) return nullptr;
        return &n.grad;
    }

    void backward(Var loss) {
        if (loss.value().size() != 1) {
            throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.value().shape()));
        }
        if (done_) throw ContractError("backward() already ran on this tape");
        done_ = true;
        if (!nodes_[loss.id()].requires_grad) return;
        grad_ref(loss.id()).fill(1.0);
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
        }
        for (Node& n : nodes_) {
            n.backward = nullptr;
            if (!n.leaf) n.grad = Tensor();
        }
    }

    std::size_t size() const { return nodes_.size(); }

    // Used by the op implementations below.
    using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

    Var push(Tensor value, bool requires_grad, bool leaf, Backward bw) {
        nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, leaf, requires_grad ? std::move(bw) : Backward{}});
        return Var(this, nodes_.size() - 1);
    }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    Tensor& grad_ref(std::size_t id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
        return n.grad;
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool leaf = false;
        Backward backward;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, std::size_t> params_;
    bool done_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline void same_tape(const Var& a, const Var& b) {
    if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

inline void same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

// c (+)= a * b for rank-2 row-major buffers; optionally transposing either operand.
inline void gemm(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& c) {
    const std::size_t n = ta ? a.cols() : a.rows();
    const std::size_t k = ta ? a.rows() : a.cols();
    const std::size_t m = tb ? b.rows() : b.cols();
    const std::size_t ac = a.cols(), bc = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ta ? a[p * ac + i] : a[i * ac + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) {
                const double bv = tb ? b[j * bc + p] : b[p * bc + j];
                c[i * m + j] += av * bv;
            }
        }
    }
}

inline bool any_grad(std::initializer_list<Var> vs) {
    for (const auto& v : vs) {
        if (v.requires_grad()) return true;
    }
    return false;
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
    detail::same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw ShapeError("matmul: inner dimensions disagree for " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
    }
    Tensor out = Tensor::matrix(av.rows(), bv.cols());
    detail::gemm(av, false, bv, false, out);
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(std::move(out), detail::any_grad({a, b}), false, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) detail::gemm(g, false, t.value(ib), true, t.grad_ref(ia));
        if (t.requires_grad(ib)) detail::gemm(t.value(ia), true, g, false, t.grad_ref(ib));
    });
}

inline Var transpose(Var a) {
    const Tensor& av = a.value();
    const std::size_t r = av.rows(), c = av.cols();
    Tensor out = Tensor::matrix(c, r);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(j, i) = av(i, j);
    const auto ia = a.id();
    return a.tape().push(std::move(out), a.requires_grad(), false, [ia, r, c](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga(i, j) += g(j, i);
    });
}

inline Var add(Var a, Var b) {
    detail::same_tape(a, b);
    detail::same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(std::move(out), detail::any_grad({a, b}), false, [ia, ib](Tape& t, const Tensor& g) {
        for (auto id : {ia, ib}) {
            if (!t.requires_grad(id)) continue;
            Tensor& gi = t.grad_ref(id);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        }
    });
}

inline Var sub(Var a, Var b) {
    detail::same_tape(a, b);
    detail::same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(std::move(out), detail::any_grad({a, b}), false, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) {
            Tensor& ga = t.grad_ref(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad_ref(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

// Elementwise (Hadamard) product.
inline Var mul(Var a, Var b) {
    detail::same_tape(a, b);
    detail::same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(std::move(out), detail::any_grad({a, b}), false, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) {
            Tensor& ga = t.grad_ref(ia);
            const Tensor& bv = t.value(ib);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad_ref(ib);
            const Tensor& av = t.value(ia);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

inline Var scale(Var a, double s) {
    Tensor out = a.value();
    for (auto& v : out.storage()) v *= s;
    const auto ia = a.id();
    return a.tape().push(std::move(out), a.requires_grad(), false, [ia, s](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_ref(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
}

/// x (n x d) + bias (1 x d) broadcast over rows.
inline Var add_bias(Var x, Var bias) {
    detail::same_tape(x, bias);
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != xv.cols()) {
        throw ShapeError("add_bias: bias " + shape_str(bv.shape()) + " does not fit " + shape_str(xv.shape()));
    }
    Tensor out = xv;
    const std::size_t n = xv.rows(), d = xv.cols();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) += bv[j];
    const auto ix = x.id(), ib = bias.id();
    return x.tape().push(std::move(out), detail::any_grad({x, bias}), false, [ix, ib, n, d](Tape& t, const Tensor& g) {
        if (t.requires_grad(ix)) {
            Tensor& gx = t.grad_ref(ix);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad_ref(ib);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gb[j] += g(i, j);
        }
    });
}

/// Row-wise softmax with max subtraction.
inline Var softmax_rows(Var x) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.rows(), d = xv.cols();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < n; ++i) {
        double mx = xv(i, 0);
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xv(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += (out(i, j) = std::exp(xv(i, j) - mx));
        for (std::size_t j = 0; j < d; ++j) out(i, j) /= z;
    }
    const auto ix = x.id(), iy = x.tape().size();
    return x.tape().push(std::move(out), x.requires_grad(), false, [ix, iy, n, d](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(iy);
        Tensor& gx = t.grad_ref(ix);
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += g(i, j) * y(i, j);
            for (std::size_t j = 0; j < d; ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
        }
    });
}

inline Var log_softmax_rows(Var x) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.rows(), d = xv.cols();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < n; ++i) {
        double mx = xv(i, 0);
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xv(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += std::exp(xv(i, j) - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < d; ++j) out(i, j) = xv(i, j) - lse;
    }
    const auto ix = x.id(), iy = x.tape().size();
    return x.tape().push(std::move(out), x.requires_grad(), false, [ix, iy, n, d](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(iy);
        Tensor& gx = t.grad_ref(ix);
        for (std::size_t i = 0; i < n; ++i) {
            double gs = 0.0;
            for (std::size_t j = 0; j < d; ++j) gs += g(i, j);
            for (std::size_t j = 0; j < d; ++j) gx(i, j) += g(i, j) - std::exp(y(i, j)) * gs;
        }
    });
}

inline constexpr double kLayerNormEps = 1e-6;

/// Normalises each row to zero mean / unit (population) variance, then
/// applies gain and bias (both 1 x d).
inline Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps) {
    detail::same_tape(x, gain);
    detail::same_tape(x, bias);
    const Tensor& xv = x.value();
    const std::size_t n = xv.rows(), d = xv.cols();
    if (gain.value().size() != d || bias.value().size() != d) {
        throw ShapeError("layer_norm: gain/bias length must equal " + std::to_string(d));
    }
    Tensor xhat(xv.shape());
    std::vector<double> inv(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += xv(i, j);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (xv(i, j) - mu) * (xv(i, j) - mu);
        var /= static_cast<double>(d);
        inv[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) xhat(i, j) = (xv(i, j) - mu) * inv[i];
    }
    Tensor out(xv.shape());
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = xhat(i, j) * gv[j] + bv[j];
    const auto ix = x.id(), ig = gain.id(), ib = bias.id();
    return x.tape().push(
        std::move(out), detail::any_grad({x, gain, bias}), false,
        [ix, ig, ib, n, d, xhat = std::move(xhat), inv = std::move(inv)](Tape& t, const Tensor& g) {
            const Tensor& gv = t.value(ig);
            if (t.requires_grad(ig)) {
                Tensor& gg = t.grad_ref(ig);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) gg[j] += g(i, j) * xhat(i, j);
            }
            if (t.requires_grad(ib)) {
                Tensor& gb = t.grad_ref(ib);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) gb[j] += g(i, j);
            }
            if (t.requires_grad(ix)) {
                Tensor& gx = t.grad_ref(ix);
                const double dd = static_cast<double>(d);
                for (std::size_t i = 0; i < n; ++i) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g(i, j) * gv[j];
                        s1 += dxh;
                        s2 += dxh * xhat(i, j);
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g(i, j) * gv[j];
                        gx(i, j) += inv[i] / dd * (dd * dxh - s1 - xhat(i, j) * s2);
                    }
                }
            }
        });
}

inline double elu_value(double v) { return v > 0.0 ? v : std::expm1(v); }

inline Var elu(Var x) {
    Tensor out = x.value();
    for (auto& v : out.storage()) v = elu_value(v);
    const auto ix = x.id();
    return x.tape().push(std::move(out), x.requires_grad(), false, [ix](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(ix);
        Tensor& gx = t.grad_ref(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : std::exp(xv[i]));
    });
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform
/// for a given engine state.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverted dropout: survivors are scaled by 1/(1-rate) at training time, so
/// evaluation is the identity (the input Var itself is returned).
inline Var dropout(Var x, double rate, bool training, std::mt19937_64& rng) {
    if (!(rate >= 0.0) || rate >= 1.0) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    const double keep = 1.0 / (1.0 - rate);
    Tensor mask(x.value().shape());
    for (auto& m : mask.storage()) m = unit_uniform(rng) < rate ? 0.0 : keep;
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    const auto ix = x.id();
    return x.tape().push(std::move(out), x.requires_grad(), false, [ix, mask = std::move(mask)](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_ref(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
}

/// [a | b] along columns.
inline Var concat_cols(Var a, Var b) {
    detail::same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rows() != bv.rows()) {
        throw ShapeError("concat_cols: row counts differ " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    }
    const std::size_t n = av.rows(), ca = av.cols(), cb = bv.cols();
    Tensor out = Tensor::matrix(n, ca + cb);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < ca; ++j) out(i, j) = av(i, j);
        for (std::size_t j = 0; j < cb; ++j) out(i, ca + j) = bv(i, j);
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape().push(std::move(out), detail::any_grad({a, b}), false, [ia, ib, n, ca, cb](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) {
            Tensor& ga = t.grad_ref(ia);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
        }
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad_ref(ib);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
        }
    });
}

inline Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    const auto ix = x.id();
    return x.tape().push(Tensor::scalar(s), x.requires_grad(), false, [ix](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_ref(ix);
        for (auto& v : gx.storage()) v += g[0];
    });
}

inline Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

}  // namespace fen::ad

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "frameproj/errors.hpp"
#include "frameproj/io.hpp"

namespace frameproj {

// Dense 64-bit-float tensors with reverse-mode automatic differentiation.
//
// Values are immutable after creation: every operation returns a fresh
// tensor. Gradient buffers are the only mutable state. While a Tape is
// active, operations whose inputs require gradients append a pull-back
// record; Tape::backward replays the records in exact reverse order and
// accumulates into the grad buffers. A tape can be consumed only once.
//
// Layout is row-major. Broadcasting is limited to scalar-tensor and
// bias-add patterns; everything else takes an explicit reshape.

struct TensorStorage {
    std::vector<size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // same length as value when requires_grad
    bool requires_grad = false;
};

class Tensor;

class Tape {
public:
    Tape() : prev_(active_) { active_ = this; }
    ~Tape() { active_ = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return active_; }

    void push(std::function<void()> pull) { records_.push_back(std::move(pull)); }
    size_t size() const { return records_.size(); }
    bool consumed() const { return consumed_; }

    // Defined after Tensor.
    inline void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> records_;
    bool consumed_ = false;
    Tape* prev_ = nullptr;
    static inline thread_local Tape* active_ = nullptr;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false) {
        auto s = std::make_shared<TensorStorage>();
        s->shape = std::move(shape);
        s->value.assign(numel_of(s->shape), 0.0);
        s->requires_grad = requires_grad;
        if (requires_grad) s->grad.assign(s->value.size(), 0.0);
        return Tensor(std::move(s));
    }

    static Tensor full(std::vector<size_t> shape, double v, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (double& x : t.s_->value) x = v;
        return t;
    }

    static Tensor from(std::vector<size_t> shape, std::vector<double> data, bool requires_grad = false) {
        if (numel_of(shape) != data.size())
            throw DimensionError("from: data length " + std::to_string(data.size()) +
                                 " does not match shape product " + std::to_string(numel_of(shape)));
        auto s = std::make_shared<TensorStorage>();
        s->shape = std::move(shape);
        s->value = std::move(data);
        s->requires_grad = requires_grad;
        if (requires_grad) s->grad.assign(s->value.size(), 0.0);
        return Tensor(std::move(s));
    }

    static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

    bool defined() const { return static_cast<bool>(s_); }
    const std::vector<size_t>& shape() const { return s_->shape; }
    size_t rank() const { return s_->shape.size(); }
    size_t size() const { return s_->value.size(); }
    size_t dim(size_t i) const { return s_->shape.at(i); }
    bool requires_grad() const { return s_->requires_grad; }

    const std::vector<double>& value() const { return s_->value; }
    const std::vector<double>& grad() const { return s_->grad; }
    double item() const {
        if (size() != 1) throw ContractError("item: tensor is not scalar");
        return s_->value[0];
    }

    /// Zero the gradient buffer (allocates it if missing).
    void zero_grad() {
        if (!s_->requires_grad) return;
        s_->grad.assign(s_->value.size(), 0.0);
    }

    void set_requires_grad(bool on) {
        s_->requires_grad = on;
        if (on && s_->grad.size() != s_->value.size()) s_->grad.assign(s_->value.size(), 0.0);
        if (!on) s_->grad.clear();
    }

    /// In-place value mutation for optimizers and oracles; never recorded.
    std::vector<double>& mutable_value() { return s_->value; }
    std::vector<double>& mutable_grad() { return s_->grad; }

    /// Deep copy of values (fresh storage, no grad history).
    Tensor clone(bool requires_grad = false) const { return from(s_->shape, s_->value, requires_grad); }

    std::shared_ptr<TensorStorage> storage() const { return s_; }

    static size_t numel_of(const std::vector<size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), size_t(1), std::multiplies<size_t>());
    }

private:
    explicit Tensor(std::shared_ptr<TensorStorage> s) : s_(std::move(s)) {}
    std::shared_ptr<TensorStorage> s_;
};

inline void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw ContractError("backward: loss must be scalar");
    if (consumed_) throw StateError("backward: tape already consumed");
    consumed_ = true;
    auto s = loss.storage();
    if (s->requires_grad) {
        if (s->grad.size() != 1) s->grad.assign(1, 0.0);
        s->grad[0] = 1.0;
    }
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

namespace detail {

inline bool track(std::initializer_list<const Tensor*> ins) {
    if (Tape::active() == nullptr) return false;
    for (const Tensor* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

inline void check_finite(const Tensor& t, const char* op) {
    for (double v : t.value())
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite output");
}

inline void record(std::function<void()> pull) { Tape::active()->push(std::move(pull)); }

inline void same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) throw DimensionError(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise suite
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::same_shape(a, b, "add");
    const bool rec = detail::track({&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = a.value()[i] + b.value()[i];
    detail::check_finite(out, "add");
    if (rec) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        detail::record([sa, sb, so, n] {
            if (sa->requires_grad)
                for (size_t i = 0; i < n; ++i) sa->grad[i] += so->grad[i];
            if (sb->requires_grad)
                for (size_t i = 0; i < n; ++i) sb->grad[i] += so->grad[i];
        });
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::same_shape(a, b, "sub");
    const bool rec = detail::track({&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = a.value()[i] - b.value()[i];
    detail::check_finite(out, "sub");
    if (rec) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        detail::record([sa, sb, so, n] {
            if (sa->requires_grad)
                for (size_t i = 0; i < n; ++i) sa->grad[i] += so->grad[i];
            if (sb->requires_grad)
                for (size_t i = 0; i < n; ++i) sb->grad[i] -= so->grad[i];
        });
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::same_shape(a, b, "mul");
    const bool rec = detail::track({&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = a.value()[i] * b.value()[i];
    detail::check_finite(out, "mul");
    if (rec) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        detail::record([sa, sb, so, n] {
            if (sa->requires_grad)
                for (size_t i = 0; i < n; ++i) sa->grad[i] += so->grad[i] * sb->value[i];
            if (sb->requires_grad)
                for (size_t i = 0; i < n; ++i) sb->grad[i] += so->grad[i] * sa->value[i];
        });
    }
    return out;
}

inline Tensor scale(const Tensor& a, double c) {
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = a.value()[i] * c;
    detail::check_finite(out, "scale");
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, c, n] {
            for (size_t i = 0; i < n; ++i) sa->grad[i] += so->grad[i] * c;
        });
    }
    return out;
}

/// ReLU with subgradient 0 at the kink.
inline Tensor relu(const Tensor& a) {
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, n] {
            for (size_t i = 0; i < n; ++i)
                if (sa->value[i] > 0.0) sa->grad[i] += so->grad[i];
        });
    }
    return out;
}

inline Tensor exp(const Tensor& a) {
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = std::exp(a.value()[i]);
    detail::check_finite(out, "exp");
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, n] {
            for (size_t i = 0; i < n; ++i) sa->grad[i] += so->grad[i] * so->value[i];
        });
    }
    return out;
}

inline Tensor log(const Tensor& a) {
    for (double v : a.value())
        if (!(v > 0.0)) throw NumericError("log: input must be positive");
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = std::log(a.value()[i]);
    detail::check_finite(out, "log");
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, n] {
            for (size_t i = 0; i < n; ++i) sa->grad[i] += so->grad[i] / sa->value[i];
        });
    }
    return out;
}

inline Tensor sqrt(const Tensor& a) {
    for (double v : a.value())
        if (v < 0.0) throw NumericError("sqrt: input must be non-negative");
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = std::sqrt(a.value()[i]);
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, n] {
            for (size_t i = 0; i < n; ++i) {
                if (so->value[i] > 0.0) sa->grad[i] += so->grad[i] * 0.5 / so->value[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: expects rank-2 tensors");
    const size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) throw DimensionError("matmul: inner dimensions differ");
    const bool rec = detail::track({&a, &b});
    Tensor out = Tensor::zeros({m, n}, rec);
    const double* A = a.value().data();
    const double* B = b.value().data();
    double* C = out.mutable_value().data();
    for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            const double* Bp = B + p * n;
            double* Ci = C + i * n;
            for (size_t j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
        }
    detail::check_finite(out, "matmul");
    if (rec) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        detail::record([sa, sb, so, m, k, n] {
            const double* dC = so->grad.data();
            if (sa->requires_grad) {  // dA = dC * B^T
                const double* B = sb->value.data();
                double* dA = sa->grad.data();
                for (size_t i = 0; i < m; ++i)
                    for (size_t j = 0; j < n; ++j) {
                        const double g = dC[i * n + j];
                        const double* Bj = B + j;  // column j, stride n
                        for (size_t p = 0; p < k; ++p) dA[i * k + p] += g * Bj[p * n];
                    }
            }
            if (sb->requires_grad) {  // dB = A^T * dC
                const double* A = sa->value.data();
                double* dB = sb->grad.data();
                for (size_t i = 0; i < m; ++i)
                    for (size_t p = 0; p < k; ++p) {
                        const double aip = A[i * k + p];
                        const double* dCi = dC + i * n;
                        double* dBp = dB + p * n;
                        for (size_t j = 0; j < n; ++j) dBp[j] += aip * dCi[j];
                    }
            }
        });
    }
    return out;
}

/// N x d plus a length-d row vector broadcast over rows.
inline Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.dim(1) != v.dim(0))
        throw DimensionError("add_rowvec: expects (N x d) + (d)");
    const size_t n = a.dim(0), d = a.dim(1);
    const bool rec = detail::track({&a, &v});
    Tensor out = Tensor::zeros(a.shape(), rec);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j)
            out.mutable_value()[i * d + j] = a.value()[i * d + j] + v.value()[j];
    detail::check_finite(out, "add_rowvec");
    if (rec) {
        auto sa = a.storage(), sv = v.storage(), so = out.storage();
        detail::record([sa, sv, so, n, d] {
            if (sa->requires_grad)
                for (size_t i = 0; i < n * d; ++i) sa->grad[i] += so->grad[i];
            if (sv->requires_grad)
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < d; ++j) sv->grad[j] += so->grad[i * d + j];
        });
    }
    return out;
}

/// N x M minus a length-N column vector broadcast over columns.
inline Tensor sub_colvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.dim(0) != v.dim(0))
        throw DimensionError("sub_colvec: expects (N x M) - (N)");
    const size_t n = a.dim(0), m = a.dim(1);
    const bool rec = detail::track({&a, &v});
    Tensor out = Tensor::zeros(a.shape(), rec);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j)
            out.mutable_value()[i * m + j] = a.value()[i * m + j] - v.value()[i];
    detail::check_finite(out, "sub_colvec");
    if (rec) {
        auto sa = a.storage(), sv = v.storage(), so = out.storage();
        detail::record([sa, sv, so, n, m] {
            if (sa->requires_grad)
                for (size_t i = 0; i < n * m; ++i) sa->grad[i] += so->grad[i];
            if (sv->requires_grad)
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < m; ++j) sv->grad[i] -= so->grad[i * m + j];
        });
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose: expects rank-2");
    const size_t n = a.dim(0), m = a.dim(1);
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros({m, n}, rec);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) out.mutable_value()[j * n + i] = a.value()[i * m + j];
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, n, m] {
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < m; ++j) sa->grad[i * m + j] += so->grad[j * n + i];
        });
    }
    return out;
}

inline Tensor reshape(const Tensor& a, std::vector<size_t> new_shape) {
    if (Tensor::numel_of(new_shape) != a.size()) throw DimensionError("reshape: element count differs");
    const bool rec = detail::track({&a});
    Tensor out = Tensor::from(std::move(new_shape), a.value(), rec);
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so] {
            const size_t n = sa->value.size();
            for (size_t i = 0; i < n; ++i) sa->grad[i] += so->grad[i];
        });
    }
    return out;
}

/// Concatenate along axis 1 (columns of rank-2, channels of rank-3/4).
inline Tensor concat_axis1(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 2) throw DimensionError("concat_axis1: rank mismatch");
    if (a.dim(0) != b.dim(0)) throw DimensionError("concat_axis1: leading dimension differs");
    size_t inner_a = 1, inner_b = 1;
    for (size_t i = 2; i < a.rank(); ++i) {
        if (a.dim(i) != b.dim(i)) throw DimensionError("concat_axis1: trailing dimensions differ");
        inner_a *= a.dim(i);
    }
    inner_b = inner_a;
    const size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    std::vector<size_t> shape = a.shape();
    shape[1] = ca + cb;
    const bool rec = detail::track({&a, &b});
    Tensor out = Tensor::zeros(shape, rec);
    const size_t block_a = ca * inner_a, block_b = cb * inner_b;
    for (size_t i = 0; i < n; ++i) {
        std::copy_n(a.value().data() + i * block_a, block_a,
                    out.mutable_value().data() + i * (block_a + block_b));
        std::copy_n(b.value().data() + i * block_b, block_b,
                    out.mutable_value().data() + i * (block_a + block_b) + block_a);
    }
    if (rec) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        detail::record([sa, sb, so, n, block_a, block_b] {
            for (size_t i = 0; i < n; ++i) {
                const double* g = so->grad.data() + i * (block_a + block_b);
                if (sa->requires_grad)
                    for (size_t j = 0; j < block_a; ++j) sa->grad[i * block_a + j] += g[j];
                if (sb->requires_grad)
                    for (size_t j = 0; j < block_b; ++j) sb->grad[i * block_b + j] += g[block_a + j];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolutions (cross-correlation convention, zero padding)
// ---------------------------------------------------------------------------

inline Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    if (x.rank() != 3 || w.rank() != 3) throw DimensionError("conv1d: expects (N,Ci,L) and (Co,Ci,K)");
    if (stride < 1) throw ContractError("conv1d: stride must be >= 1");
    if (padding < 0) throw ContractError("conv1d: padding must be >= 0");
    const size_t N = x.dim(0), Ci = x.dim(1), L = x.dim(2);
    const size_t Co = w.dim(0), K = w.dim(2);
    if (w.dim(1) != Ci) throw DimensionError("conv1d: channel mismatch");
    if (K > L + 2 * size_t(padding)) throw DimensionError("conv1d: kernel larger than padded input");
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Co))
        throw DimensionError("conv1d: bias must be (Co)");
    const size_t Lo = (L + 2 * size_t(padding) - K) / size_t(stride) + 1;
    const bool rec = bias.defined() ? detail::track({&x, &w, &bias}) : detail::track({&x, &w});
    Tensor out = Tensor::zeros({N, Co, Lo}, rec);
    const double* X = x.value().data();
    const double* W = w.value().data();
    double* Y = out.mutable_value().data();
    for (size_t n = 0; n < N; ++n)
        for (size_t co = 0; co < Co; ++co) {
            double* y = Y + (n * Co + co) * Lo;
            if (bias.defined()) {
                const double b = bias.value()[co];
                for (size_t t = 0; t < Lo; ++t) y[t] = b;
            }
            for (size_t ci = 0; ci < Ci; ++ci) {
                const double* xc = X + (n * Ci + ci) * L;
                const double* wk = W + (co * Ci + ci) * K;
                for (size_t k = 0; k < K; ++k) {
                    const double wv = wk[k];
                    if (wv == 0.0) continue;
                    const long off = long(k) - long(padding);
                    const long t0 = off < 0 ? ((-off + stride - 1) / stride) : 0;
                    const long t1 = std::min<long>(long(Lo), off < long(L)
                                                                ? (long(L) - 1 - off) / stride + 1
                                                                : 0);
                    const double* xs = xc + t0 * stride + off;
                    for (long t = t0; t < t1; ++t, xs += stride) y[t] += wv * *xs;
                }
            }
        }
    detail::check_finite(out, "conv1d");
    if (rec) {
        auto sx = x.storage(), sw = w.storage(), so = out.storage();
        auto sb = bias.defined() ? bias.storage() : nullptr;
        detail::record([sx, sw, sb, so, N, Ci, L, Co, K, Lo, stride, padding] {
            const double* dY = so->grad.data();
            for (size_t n = 0; n < N; ++n)
                for (size_t co = 0; co < Co; ++co) {
                    const double* dy = dY + (n * Co + co) * Lo;
                    if (sb && sb->requires_grad) {
                        double acc = 0.0;
                        for (size_t t = 0; t < Lo; ++t) acc += dy[t];
                        sb->grad[co] += acc;
                    }
                    for (size_t ci = 0; ci < Ci; ++ci) {
                        const double* xc = sx->value.data() + (n * Ci + ci) * L;
                        const double* wk = sw->value.data() + (co * Ci + ci) * K;
                        double* dxc = sx->requires_grad ? sx->grad.data() + (n * Ci + ci) * L : nullptr;
                        double* dwk = sw->requires_grad ? sw->grad.data() + (co * Ci + ci) * K : nullptr;
                        for (size_t k = 0; k < K; ++k) {
                            const long off = long(k) - long(padding);
                            const long t0 = off < 0 ? ((-off + stride - 1) / stride) : 0;
                            const long t1 = std::min<long>(
                                long(Lo), off < long(L) ? (long(L) - 1 - off) / stride + 1 : 0);
                            double dw_acc = 0.0;
                            const double wv = wk[k];
                            if (dxc && dwk) {
                                const double* xs = xc + t0 * stride + off;
                                double* dxs = dxc + t0 * stride + off;
                                for (long t = t0; t < t1; ++t, xs += stride, dxs += stride) {
                                    const double g = dy[t];
                                    *dxs += g * wv;
                                    dw_acc += g * *xs;
                                }
                            } else if (dxc) {
                                double* dxs = dxc + t0 * stride + off;
                                for (long t = t0; t < t1; ++t, dxs += stride) *dxs += dy[t] * wv;
                            } else if (dwk) {
                                const double* xs = xc + t0 * stride + off;
                                for (long t = t0; t < t1; ++t, xs += stride) dw_acc += dy[t] * *xs;
                            }
                            if (dwk) dwk[k] += dw_acc;
                        }
                    }
                }
        });
    }
    return out;
}

/// Transposed 1-D convolution: the adjoint of conv1d with the same kernel,
/// stride, and padding. Kernel layout matches the paired conv1d (Co,Ci,K):
/// input has Co channels, output has Ci channels.
/// out_length = (Lin-1)*stride - 2*padding + K + output_padding.
inline Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                               int padding, int output_padding = 0) {
    if (x.rank() != 3 || w.rank() != 3)
        throw DimensionError("conv_transpose1d: expects (N,Co,Lin) and (Co,Ci,K)");
    if (stride < 1) throw ContractError("conv_transpose1d: stride must be >= 1");
    const size_t N = x.dim(0), Co = x.dim(1), Lin = x.dim(2);
    const size_t Ci = w.dim(1), K = w.dim(2);
    if (w.dim(0) != Co) throw DimensionError("conv_transpose1d: channel mismatch");
    const long Lo_l = long(Lin - 1) * stride - 2 * long(padding) + long(K) + long(output_padding);
    if (Lo_l <= 0) throw DimensionError("conv_transpose1d: non-positive output length");
    const size_t Lo = size_t(Lo_l);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Ci))
        throw DimensionError("conv_transpose1d: bias must be (Ci)");
    const bool rec = bias.defined() ? detail::track({&x, &w, &bias}) : detail::track({&x, &w});
    Tensor out = Tensor::zeros({N, Ci, Lo}, rec);
    double* Y = out.mutable_value().data();
    if (bias.defined())
        for (size_t n = 0; n < N; ++n)
            for (size_t ci = 0; ci < Ci; ++ci) {
                const double b = bias.value()[ci];
                double* y = Y + (n * Ci + ci) * Lo;
                for (size_t t = 0; t < Lo; ++t) y[t] += b;
            }
    for (size_t n = 0; n < N; ++n)
        for (size_t co = 0; co < Co; ++co) {
            const double* xc = x.value().data() + (n * Co + co) * Lin;
            for (size_t ci = 0; ci < Ci; ++ci) {
                const double* wk = w.value().data() + (co * Ci + ci) * K;
                double* y = Y + (n * Ci + ci) * Lo;
                for (size_t o = 0; o < Lin; ++o) {
                    const double xv = xc[o];
                    if (xv == 0.0) continue;
                    const long base = long(o) * stride - long(padding);
                    for (size_t k = 0; k < K; ++k) {
                        const long t = base + long(k);
                        if (t >= 0 && t < long(Lo)) y[t] += xv * wk[k];
                    }
                }
            }
        }
    detail::check_finite(out, "conv_transpose1d");
    if (rec) {
        auto sx = x.storage(), sw = w.storage(), so = out.storage();
        auto sb = bias.defined() ? bias.storage() : nullptr;
        detail::record([sx, sw, sb, so, N, Co, Lin, Ci, K, Lo, stride, padding] {
            const double* dY = so->grad.data();
            if (sb && sb->requires_grad)
                for (size_t n = 0; n < N; ++n)
                    for (size_t ci = 0; ci < Ci; ++ci) {
                        const double* dy = dY + (n * Ci + ci) * Lo;
                        double acc = 0.0;
                        for (size_t t = 0; t < Lo; ++t) acc += dy[t];
                        sb->grad[ci] += acc;
                    }
            for (size_t n = 0; n < N; ++n)
                for (size_t co = 0; co < Co; ++co) {
                    const double* xc = sx->value.data() + (n * Co + co) * Lin;
                    double* dxc = sx->requires_grad ? sx->grad.data() + (n * Co + co) * Lin : nullptr;
                    for (size_t ci = 0; ci < Ci; ++ci) {
                        const double* wk = sw->value.data() + (co * Ci + ci) * K;
                        double* dwk = sw->requires_grad ? sw->grad.data() + (co * Ci + ci) * K : nullptr;
                        const double* dy = dY + (n * Ci + ci) * Lo;
                        for (size_t o = 0; o < Lin; ++o) {
                            const long base = long(o) * stride - long(padding);
                            double dx_acc = 0.0;
                            for (size_t k = 0; k < K; ++k) {
                                const long t = base + long(k);
                                if (t < 0 || t >= long(Lo)) continue;
                                dx_acc += dy[t] * wk[k];
                                if (dwk) dwk[k] += dy[t] * xc[o];
                            }
                            if (dxc) dxc[o] += dx_acc;
                        }
                    }
                }
        });
    }
    return out;
}

inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    if (x.rank() != 4 || w.rank() != 4)
        throw DimensionError("conv2d: expects (N,Ci,H,W) and (Co,Ci,Kh,Kw)");
    if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
    const size_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W_ = x.dim(3);
    const size_t Co = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
    if (w.dim(1) != Ci) throw DimensionError("conv2d: channel mismatch");
    if (Kh > H + 2 * size_t(padding) || Kw > W_ + 2 * size_t(padding))
        throw DimensionError("conv2d: kernel larger than padded input");
    const size_t Ho = (H + 2 * size_t(padding) - Kh) / size_t(stride) + 1;
    const size_t Wo = (W_ + 2 * size_t(padding) - Kw) / size_t(stride) + 1;
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Co))
        throw DimensionError("conv2d: bias must be (Co)");
    const bool rec = bias.defined() ? detail::track({&x, &w, &bias}) : detail::track({&x, &w});
    Tensor out = Tensor::zeros({N, Co, Ho, Wo}, rec);
    double* Y = out.mutable_value().data();
    const double* X = x.value().data();
    const double* Wt = w.value().data();
    for (size_t n = 0; n < N; ++n)
        for (size_t co = 0; co < Co; ++co) {
            double* y = Y + ((n * Co + co) * Ho) * Wo;
            if (bias.defined()) {
                const double b = bias.value()[co];
                for (size_t t = 0; t < Ho * Wo; ++t) y[t] = b;
            }
            for (size_t ci = 0; ci < Ci; ++ci) {
                const double* xc = X + ((n * Ci + ci) * H) * W_;
                const double* wk = Wt + ((co * Ci + ci) * Kh) * Kw;
                for (size_t i = 0; i < Ho; ++i) {
                    const long ibase = long(i) * stride - padding;
                    for (size_t kh = 0; kh < Kh; ++kh) {
                        const long src_i = ibase + long(kh);
                        if (src_i < 0 || src_i >= long(H)) continue;
                        const double* xrow = xc + size_t(src_i) * W_;
                        const double* wrow = wk + kh * Kw;
                        double* yrow = y + i * Wo;
                        for (size_t kw = 0; kw < Kw; ++kw) {
                            const double wv = wrow[kw];
                            const long off = long(kw) - long(padding);
                            const long j0 = off < 0 ? ((-off + stride - 1) / stride) : 0;
                            const long j1 = std::min<long>(
                                long(Wo), off < long(W_) ? (long(W_) - 1 - off) / stride + 1 : 0);
                            if (stride == 1) {
                                const double* __restrict xs = xrow + j0 + off;
                                double* __restrict ys = yrow + j0;
                                const long span = j1 - j0;
                                for (long j = 0; j < span; ++j) ys[j] += wv * xs[j];
                            } else {
                                const double* xs = xrow + j0 * stride + off;
                                for (long j = j0; j < j1; ++j, xs += stride) yrow[j] += wv * *xs;
                            }
                        }
                    }
                }
            }
        }
    detail::check_finite(out, "conv2d");
    if (rec) {
        auto sx = x.storage(), sw = w.storage(), so = out.storage();
        auto sb = bias.defined() ? bias.storage() : nullptr;
        detail::record([sx, sw, sb, so, N, Ci, H, W_, Co, Kh, Kw, Ho, Wo, stride, padding] {
            const double* dY = so->grad.data();
            for (size_t n = 0; n < N; ++n)
                for (size_t co = 0; co < Co; ++co) {
                    const double* dy = dY + ((n * Co + co) * Ho) * Wo;
                    if (sb && sb->requires_grad) {
                        double acc = 0.0;
                        for (size_t t = 0; t < Ho * Wo; ++t) acc += dy[t];
                        sb->grad[co] += acc;
                    }
                    for (size_t ci = 0; ci < Ci; ++ci) {
                        const double* xc = sx->value.data() + ((n * Ci + ci) * H) * W_;
                        const double* wk = sw->value.data() + ((co * Ci + ci) * Kh) * Kw;
                        double* dxc = sx->requires_grad ? sx->grad.data() + ((n * Ci + ci) * H) * W_ : nullptr;
                        double* dwk = sw->requires_grad ? sw->grad.data() + ((co * Ci + ci) * Kh) * Kw : nullptr;
                        for (size_t i = 0; i < Ho; ++i) {
                            const long ibase = long(i) * stride - padding;
                            const double* dyrow = dy + i * Wo;
                            for (size_t kh = 0; kh < Kh; ++kh) {
                                const long src_i = ibase + long(kh);
                                if (src_i < 0 || src_i >= long(H)) continue;
                                const double* xrow = xc + size_t(src_i) * W_;
                                double* dxrow = dxc ? dxc + size_t(src_i) * W_ : nullptr;
                                for (size_t kw = 0; kw < Kw; ++kw) {
                                    const long off = long(kw) - long(padding);
                                    const long j0 = off < 0 ? ((-off + stride - 1) / stride) : 0;
                                    const long j1 = std::min<long>(
                                        long(Wo),
                                        off < long(W_) ? (long(W_) - 1 - off) / stride + 1 : 0);
                                    const double wv = wk[kh * Kw + kw];
                                    double dw_acc = 0.0;
                                    if (dxrow && dwk && stride == 1) {
                                        const double* __restrict xs = xrow + j0 + off;
                                        double* __restrict dxs = dxrow + j0 + off;
                                        const double* __restrict g = dyrow + j0;
                                        const long span = j1 - j0;
                                        for (long j = 0; j < span; ++j) {
                                            dxs[j] += g[j] * wv;
                                            dw_acc += g[j] * xs[j];
                                        }
                                    } else if (dxrow && dwk) {
                                        const double* xs = xrow + j0 * stride + off;
                                        double* dxs = dxrow + j0 * stride + off;
                                        for (long j = j0; j < j1; ++j, xs += stride, dxs += stride) {
                                            const double g = dyrow[j];
                                            *dxs += g * wv;
                                            dw_acc += g * *xs;
                                        }
                                    } else if (dxrow) {
                                        double* dxs = dxrow + j0 * stride + off;
                                        for (long j = j0; j < j1; ++j, dxs += stride)
                                            *dxs += dyrow[j] * wv;
                                    } else if (dwk) {
                                        const double* xs = xrow + j0 * stride + off;
                                        for (long j = j0; j < j1; ++j, xs += stride)
                                            dw_acc += dyrow[j] * *xs;
                                    }
                                    if (dwk) dwk[kh * Kw + kw] += dw_acc;
                                }
                            }
                        }
                    }
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

inline Tensor avg_pool2d(const Tensor& x, int kh, int kw, int sh, int sw) {
    if (x.rank() != 4) throw DimensionError("avg_pool2d: expects (N,C,H,W)");
    if (kh < 1 || kw < 1 || sh < 1 || sw < 1) throw ContractError("avg_pool2d: bad kernel/stride");
    const size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W_ = x.dim(3);
    if (size_t(kh) > H || size_t(kw) > W_) throw DimensionError("avg_pool2d: kernel larger than input");
    const size_t Ho = (H - kh) / sh + 1, Wo = (W_ - kw) / sw + 1;
    const bool rec = detail::track({&x});
    Tensor out = Tensor::zeros({N, C, Ho, Wo}, rec);
    const double inv = 1.0 / (double(kh) * double(kw));
    for (size_t nc = 0; nc < N * C; ++nc) {
        const double* xc = x.value().data() + nc * H * W_;
        double* y = out.mutable_value().data() + nc * Ho * Wo;
        for (size_t i = 0; i < Ho; ++i)
            for (size_t j = 0; j < Wo; ++j) {
                double acc = 0.0;
                for (int a = 0; a < kh; ++a)
                    for (int b = 0; b < kw; ++b) acc += xc[(i * sh + a) * W_ + (j * sw + b)];
                y[i * Wo + j] = acc * inv;
            }
    }
    if (rec) {
        auto sx = x.storage(), so = out.storage();
        detail::record([sx, so, N, C, H, W_, Ho, Wo, kh, kw, sh, sw, inv] {
            for (size_t nc = 0; nc < N * C; ++nc) {
                double* dx = sx->grad.data() + nc * H * W_;
                const double* dy = so->grad.data() + nc * Ho * Wo;
                for (size_t i = 0; i < Ho; ++i)
                    for (size_t j = 0; j < Wo; ++j) {
                        const double g = dy[i * Wo + j] * inv;
                        for (int a = 0; a < kh; ++a)
                            for (int b = 0; b < kw; ++b) dx[(i * sh + a) * W_ + (j * sw + b)] += g;
                    }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    if (a.size() == 0) throw DimensionError("sum: empty tensor");
    const bool rec = detail::track({&a});
    double acc = 0.0;
    for (double v : a.value()) acc += v;
    Tensor out = Tensor::from({1}, {acc}, rec);
    detail::check_finite(out, "sum");
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so] {
            const double g = so->grad[0];
            for (double& d : sa->grad) d += g;
        });
    }
    return out;
}

inline Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw DimensionError("mean: empty tensor");
    return scale(sum(a), 1.0 / double(a.size()));
}

/// (N, C, L) -> (N, C): average over the trailing time axis.
inline Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 3) throw DimensionError("global_avg_pool: expects (N,C,L)");
    if (x.size() == 0) throw DimensionError("global_avg_pool: empty tensor");
    const size_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
    const bool rec = detail::track({&x});
    Tensor out = Tensor::zeros({N, C}, rec);
    const double inv = 1.0 / double(L);
    for (size_t nc = 0; nc < N * C; ++nc) {
        const double* xc = x.value().data() + nc * L;
        double acc = 0.0;
        for (size_t t = 0; t < L; ++t) acc += xc[t];
        out.mutable_value()[nc] = acc * inv;
    }
    detail::check_finite(out, "global_avg_pool");
    if (rec) {
        auto sx = x.storage(), so = out.storage();
        detail::record([sx, so, N, C, L, inv] {
            for (size_t nc = 0; nc < N * C; ++nc) {
                const double g = so->grad[nc] * inv;
                double* dx = sx->grad.data() + nc * L;
                for (size_t t = 0; t < L; ++t) dx[t] += g;
            }
        });
    }
    return out;
}

/// Sum of absolute values; gradient is sign(x) with 0 at exact zeros.
inline Tensor l1_norm(const Tensor& a) {
    if (a.size() == 0) throw DimensionError("l1_norm: empty tensor");
    const bool rec = detail::track({&a});
    double acc = 0.0;
    for (double v : a.value()) acc += std::abs(v);
    Tensor out = Tensor::from({1}, {acc}, rec);
    detail::check_finite(out, "l1_norm");
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so] {
            const double g = so->grad[0];
            const size_t n = sa->value.size();
            for (size_t i = 0; i < n; ++i) {
                const double v = sa->value[i];
                if (v > 0.0) sa->grad[i] += g;
                else if (v < 0.0) sa->grad[i] -= g;
            }
        });
    }
    return out;
}

/// Row sums of a rank-2 tensor: (N, M) -> (N).
inline Tensor row_sum(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("row_sum: expects rank-2");
    const size_t n = a.dim(0), m = a.dim(1);
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros({n}, rec);
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < m; ++j) acc += a.value()[i * m + j];
        out.mutable_value()[i] = acc;
    }
    detail::check_finite(out, "row_sum");
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, n, m] {
            for (size_t i = 0; i < n; ++i) {
                const double g = so->grad[i];
                for (size_t j = 0; j < m; ++j) sa->grad[i * m + j] += g;
            }
        });
    }
    return out;
}

/// Row maxima of a rank-2 tensor, returned as a constant (detached) vector.
inline Tensor row_max_detached(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("row_max_detached: expects rank-2");
    const size_t n = a.dim(0), m = a.dim(1);
    Tensor out = Tensor::zeros({n}, false);
    for (size_t i = 0; i < n; ++i) {
        double mx = a.value()[i * m];
        for (size_t j = 1; j < m; ++j) mx = std::max(mx, a.value()[i * m + j]);
        out.mutable_value()[i] = mx;
    }
    return out;
}

/// Diagonal of a square rank-2 tensor: (N, N) -> (N).
inline Tensor take_diag(const Tensor& a) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw DimensionError("take_diag: expects square rank-2");
    const size_t n = a.dim(0);
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros({n}, rec);
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = a.value()[i * n + i];
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, n] {
            for (size_t i = 0; i < n; ++i) sa->grad[i * n + i] += so->grad[i];
        });
    }
    return out;
}

/// Gather one column per row: out[i] = a[i, idx[i]].
inline Tensor pick(const Tensor& a, const std::vector<size_t>& idx) {
    if (a.rank() != 2) throw DimensionError("pick: expects rank-2");
    const size_t n = a.dim(0), m = a.dim(1);
    if (idx.size() != n) throw DimensionError("pick: index count mismatch");
    for (size_t i : idx)
        if (i >= m) throw DimensionError("pick: index out of range");
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros({n}, rec);
    for (size_t i = 0; i < n; ++i) out.mutable_value()[i] = a.value()[i * m + idx[i]];
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        auto ix = idx;
        detail::record([sa, so, ix, m] {
            for (size_t i = 0; i < ix.size(); ++i) sa->grad[i * m + ix[i]] += so->grad[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Row-wise L2 normalization: each row divided by max(||row||, eps).
inline Tensor l2_normalize(const Tensor& a, double eps = 1e-12) {
    if (a.rank() != 2) throw DimensionError("l2_normalize: expects (N,d)");
    if (!(eps > 0.0)) throw ContractError("l2_normalize: eps must be positive");
    const size_t n = a.dim(0), d = a.dim(1);
    const bool rec = detail::track({&a});
    Tensor out = Tensor::zeros(a.shape(), rec);
    std::vector<double> norms(n);
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < d; ++j) s += a.value()[i * d + j] * a.value()[i * d + j];
        const double r = std::sqrt(s);
        norms[i] = std::max(r, eps);
        const double inv = 1.0 / norms[i];
        for (size_t j = 0; j < d; ++j) out.mutable_value()[i * d + j] = a.value()[i * d + j] * inv;
    }
    detail::check_finite(out, "l2_normalize");
    if (rec) {
        auto sa = a.storage(), so = out.storage();
        detail::record([sa, so, norms, n, d, eps] {
            for (size_t i = 0; i < n; ++i) {
                const double r = norms[i];
                const double inv = 1.0 / r;
                const double* y = so->value.data() + i * d;
                const double* g = so->grad.data() + i * d;
                double* dx = sa->grad.data() + i * d;
                double raw = 0.0;
                for (size_t j = 0; j < d; ++j) raw += sa->value[i * d + j] * sa->value[i * d + j];
                if (std::sqrt(raw) < eps) {
                    // Clamped branch: y = x / eps.
                    for (size_t j = 0; j < d; ++j) dx[j] += g[j] * inv;
                } else {
                    double gy = 0.0;
                    for (size_t j = 0; j < d; ++j) gy += g[j] * y[j];
                    for (size_t j = 0; j < d; ++j) dx[j] += (g[j] - y[j] * gy) * inv;
                }
            }
        });
    }
    return out;
}

/// Batch normalization over the channel axis of (N,C), (N,C,L) or (N,C,H,W).
/// Population statistics; running buffers are updated in training mode.
inline Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         std::vector<double>& running_mean, std::vector<double>& running_var,
                         bool training, double momentum = 0.1, double eps = 1e-5) {
    if (x.rank() < 2 || x.rank() > 4) throw DimensionError("batch_norm: expects rank 2..4");
    const size_t N = x.dim(0), C = x.dim(1);
    size_t inner = 1;
    for (size_t i = 2; i < x.rank(); ++i) inner *= x.dim(i);
    if (gamma.size() != C || beta.size() != C) throw DimensionError("batch_norm: affine params must be (C)");
    if (running_mean.size() != C || running_var.size() != C)
        throw DimensionError("batch_norm: running stats must be (C)");
    const size_t m = N * inner;
    const bool rec = detail::track({&x, &gamma, &beta});
    Tensor out = Tensor::zeros(x.shape(), rec);

    std::vector<double> mu(C), var(C);
    if (training) {
        for (size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (size_t n = 0; n < N; ++n) {
                const double* xc = x.value().data() + (n * C + c) * inner;
                for (size_t t = 0; t < inner; ++t) s += xc[t];
            }
            mu[c] = s / double(m);
            double v = 0.0;
            for (size_t n = 0; n < N; ++n) {
                const double* xc = x.value().data() + (n * C + c) * inner;
                for (size_t t = 0; t < inner; ++t) {
                    const double d = xc[t] - mu[c];
                    v += d * d;
                }
            }
            var[c] = v / double(m);
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu[c];
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var[c];
        }
    } else {
        mu = running_mean;
        var = running_var;
    }

    std::vector<double> inv_std(C);
    for (size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    for (size_t n = 0; n < N; ++n)
        for (size_t c = 0; c < C; ++c) {
            const double* xc = x.value().data() + (n * C + c) * inner;
            double* y = out.mutable_value().data() + (n * C + c) * inner;
            const double g = gamma.value()[c], b = beta.value()[c], mc = mu[c], is = inv_std[c];
            for (size_t t = 0; t < inner; ++t) y[t] = g * (xc[t] - mc) * is + b;
        }
    detail::check_finite(out, "batch_norm");

    if (rec) {
        auto sx = x.storage(), sg = gamma.storage(), sb = beta.storage(), so = out.storage();
        detail::record([sx, sg, sb, so, N, C, inner, m, mu, inv_std, training] {
            for (size_t c = 0; c < C; ++c) {
                const double g = sg->value[c], is = inv_std[c], mc = mu[c];
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (size_t n = 0; n < N; ++n) {
                    const double* dy = so->grad.data() + (n * C + c) * inner;
                    const double* xc = sx->value.data() + (n * C + c) * inner;
                    for (size_t t = 0; t < inner; ++t) {
                        sum_dy += dy[t];
                        sum_dy_xhat += dy[t] * (xc[t] - mc) * is;
                    }
                }
                if (sb->requires_grad) sb->grad[c] += sum_dy;
                if (sg->requires_grad) sg->grad[c] += sum_dy_xhat;
                if (!sx->requires_grad) continue;
                if (training) {
                    const double mean_dy = sum_dy / double(m);
                    const double mean_dy_xhat = sum_dy_xhat / double(m);
                    for (size_t n = 0; n < N; ++n) {
                        const double* dy = so->grad.data() + (n * C + c) * inner;
                        const double* xc = sx->value.data() + (n * C + c) * inner;
                        double* dx = sx->grad.data() + (n * C + c) * inner;
                        for (size_t t = 0; t < inner; ++t) {
                            const double xhat = (xc[t] - mc) * is;
                            dx[t] += g * is * (dy[t] - mean_dy - xhat * mean_dy_xhat);
                        }
                    }
                } else {
                    for (size_t n = 0; n < N; ++n) {
                        const double* dy = so->grad.data() + (n * C + c) * inner;
                        double* dx = sx->grad.data() + (n * C + c) * inner;
                        for (size_t t = 0; t < inner; ++t) dx[t] += g * is * dy[t];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch row gather (dataset slicing; inputs are constants, never recorded)
// ---------------------------------------------------------------------------

inline Tensor take_rows(const Tensor& a, const std::vector<size_t>& idx) {
    if (a.rank() < 2) throw DimensionError("take_rows: expects rank >= 2");
    size_t inner = 1;
    for (size_t i = 1; i < a.rank(); ++i) inner *= a.dim(i);
    std::vector<size_t> shape = a.shape();
    shape[0] = idx.size();
    Tensor out = Tensor::zeros(shape, false);
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.dim(0)) throw DimensionError("take_rows: index out of range");
        std::copy_n(a.value().data() + idx[i] * inner, inner, out.mutable_value().data() + i * inner);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: magic "FPT1", u32 rank, u32 per dimension, f64 payload
// ---------------------------------------------------------------------------

inline void write_tensor(BinaryWriter& w, const Tensor& t) {
    w.magic("FPT1");
    w.u32(static_cast<uint32_t>(t.rank()));
    for (size_t i = 0; i < t.rank(); ++i) w.u32(static_cast<uint32_t>(t.dim(i)));
    w.f64s(t.value());
}

inline Tensor read_tensor(BinaryReader& r) {
    r.expect_magic("FPT1", "tensor");
    const uint32_t rank = r.u32();
    if (rank > 8) throw IoError("tensor rank implausible");
    std::vector<size_t> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = r.u32();
    const size_t n = Tensor::numel_of(shape);
    return Tensor::from(shape, r.f64s(n));
}

}  // namespace frameproj

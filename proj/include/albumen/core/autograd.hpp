#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "albumen/core/errors.hpp"
#include "albumen/core/tensor.hpp"

namespace albumen {

// ---------------------------------------------------------------------------
// Reverse-mode tape. A Var is a shared node holding a value, a lazily sized
// gradient, and a closure that scatters the node's gradient into its parents.
// Graphs are rebuilt every step; parameters are leaves that outlive them.
// ---------------------------------------------------------------------------

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;

    bool is_leaf() const { return parents.empty(); }
    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor::zeros(val.shape);
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), 0.0f);
    }
};

inline bool& autograd_enabled() {
    thread_local bool enabled = true;
    return enabled;
}

/// RAII scope that disables graph recording (inference / frozen paths).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(autograd_enabled()) { autograd_enabled() = false; }
    ~NoGradGuard() { autograd_enabled() = prev; }
};

inline Var make_var(Tensor t, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = requires_grad;
    return n;
}

inline Var constant(Tensor t) { return make_var(std::move(t), false); }

namespace detail {

inline bool any_requires(const std::vector<Var>& ps) {
    for (const auto& p : ps)
        if (p && p->requires_grad) return true;
    return false;
}

/// Create a result node. Records parents/backprop only when the tape is
/// active and some parent needs gradients.
inline Var make_op(Tensor val, std::vector<Var> parents, std::function<void(Node&)> bp) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    if (autograd_enabled() && any_requires(parents)) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(bp);
    }
    return n;
}

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

inline int conv_out(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

/// Unfold (C,H,W) into (C*k*k) x (Ho*Wo) patch columns, zero padding.
inline void im2col(const float* x, int C, int H, int W, int k, int stride, int pad,
                   float* cols) {
    const int Ho = conv_out(H, k, stride, pad);
    const int Wo = conv_out(W, k, stride, pad);
    const int ncols = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                float* row = cols + (std::size_t)((c * k + ki) * k + kj) * ncols;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int hi = ho * stride - pad + ki;
                    if (hi < 0 || hi >= H) {
                        std::fill(row + ho * Wo, row + (ho + 1) * Wo, 0.0f);
                        continue;
                    }
                    const float* src = x + (std::size_t)(c * H + hi) * W;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int wi = wo * stride - pad + kj;
                        row[ho * Wo + wo] = (wi < 0 || wi >= W) ? 0.0f : src[wi];
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-add patch columns back into (C,H,W).
inline void col2im_add(const float* cols, int C, int H, int W, int k, int stride, int pad,
                       float* x) {
    const int Ho = conv_out(H, k, stride, pad);
    const int Wo = conv_out(W, k, stride, pad);
    const int ncols = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const float* row = cols + (std::size_t)((c * k + ki) * k + kj) * ncols;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int hi = ho * stride - pad + ki;
                    if (hi < 0 || hi >= H) continue;
                    float* dst = x + (std::size_t)(c * H + hi) * W;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int wi = wo * stride - pad + kj;
                        if (wi >= 0 && wi < W) dst[wi] += row[ho * Wo + wo];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// --------------------------- elementwise ops -------------------------------

inline Var add(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw InvalidInputError("add: shape mismatch");
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->val.data[i];
    return detail::make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) b->grad.data[i] += n.grad.data[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw InvalidInputError("sub: shape mismatch");
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->val.data[i];
    return detail::make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) b->grad.data[i] -= n.grad.data[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw InvalidInputError("mul: shape mismatch");
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->val.data[i];
    return detail::make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                a->grad.data[i] += n.grad.data[i] * b->val.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                b->grad.data[i] += n.grad.data[i] * a->val.data[i];
        }
    });
}

inline Var scale(const Var& a, float s) {
    Tensor out = a->val;
    for (auto& v : out.data) v *= s;
    return detail::make_op(std::move(out), {a}, [a, s](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += s * n.grad.data[i];
    });
}

inline Var add_scalar(const Var& a, float s) {
    Tensor out = a->val;
    for (auto& v : out.data) v += s;
    return detail::make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += n.grad.data[i];
    });
}

inline Var neg(const Var& a) { return scale(a, -1.0f); }

inline Var vexp(const Var& a) {
    Tensor out = a->val;
    for (auto& v : out.data) v = std::exp(v);
    return detail::make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i)
            a->grad.data[i] += n.grad.data[i] * n.val.data[i];
    });
}

inline Var vlog(const Var& a) {
    Tensor out = a->val;
    for (auto& v : out.data) v = std::log(v);
    return detail::make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i)
            a->grad.data[i] += n.grad.data[i] / a->val.data[i];
    });
}

inline Var vclamp(const Var& a, float lo, float hi) {
    Tensor out = a->val;
    for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
    return detail::make_op(std::move(out), {a}, [a, lo, hi](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            const float x = a->val.data[i];
            if (x > lo && x < hi) a->grad.data[i] += n.grad.data[i];
        }
    });
}

inline Var tanh_v(const Var& a) {
    Tensor out = a->val;
    for (auto& v : out.data) v = std::tanh(v);
    return detail::make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            const float y = n.val.data[i];
            a->grad.data[i] += n.grad.data[i] * (1.0f - y * y);
        }
    });
}

inline Var sigmoid_v(const Var& a) {
    Tensor out = a->val;
    for (auto& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
    return detail::make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            const float y = n.val.data[i];
            a->grad.data[i] += n.grad.data[i] * y * (1.0f - y);
        }
    });
}

inline Var leaky_relu(const Var& a, float slope = 0.2f) {
    Tensor out = a->val;
    for (auto& v : out.data) v = v > 0.0f ? v : slope * v;
    return detail::make_op(std::move(out), {a}, [a, slope](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i)
            a->grad.data[i] += n.grad.data[i] * (a->val.data[i] > 0.0f ? 1.0f : slope);
    });
}

inline Var relu_v(const Var& a) { return leaky_relu(a, 0.0f); }

/// New leaf sharing the value; gradients stop here.
inline Var detach(const Var& a) { return make_var(a->val, false); }

inline Var reshape_v(const Var& a, std::vector<int> shape) {
    Tensor out = a->val.reshaped(std::move(shape));
    return detail::make_op(std::move(out), {a}, [a](Node& n) {
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) a->grad.data[i] += n.grad.data[i];
    });
}

// ----------------------------- matrix ops ----------------------------------

/// Y = op(A) * op(B) for 2-D tensors; opX transposes when the flag is set.
inline Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false) {
    using namespace detail;
    if (a->val.ndim() != 2 || b->val.ndim() != 2) throw InvalidInputError("matmul: rank != 2");
    const int am = a->val.dim(0), an = a->val.dim(1);
    const int bm = b->val.dim(0), bn = b->val.dim(1);
    const int m = ta ? an : am, ka = ta ? am : an;
    const int kb = tb ? bn : bm, n2 = tb ? bm : bn;
    if (ka != kb) throw InvalidInputError("matmul: inner dims disagree");

    Tensor out({m, n2});
    {
        MapC A(a->val.data.data(), am, an);
        MapC B(b->val.data.data(), bm, bn);
        MapM Y(out.data.data(), m, n2);
        if (!ta && !tb) Y.noalias() = A * B;
        else if (ta && !tb) Y.noalias() = A.transpose() * B;
        else if (!ta && tb) Y.noalias() = A * B.transpose();
        else Y.noalias() = A.transpose() * B.transpose();
    }
    return make_op(std::move(out), {a, b}, [a, b, ta, tb, am, an, bm, bn, m, n2](Node& nd) {
        MapC dY(nd.grad.data.data(), m, n2);
        MapC A(a->val.data.data(), am, an);
        MapC B(b->val.data.data(), bm, bn);
        if (a->requires_grad) {
            a->ensure_grad();
            MapM dA(a->grad.data.data(), am, an);
            if (!ta) {
                if (!tb) dA.noalias() += dY * B.transpose();
                else dA.noalias() += dY * B;
            } else {
                if (!tb) dA.noalias() += B * dY.transpose();
                else dA.noalias() += B.transpose() * dY.transpose();
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            MapM dB(b->grad.data.data(), bm, bn);
            if (!tb) {
                if (!ta) dB.noalias() += A.transpose() * dY;
                else dB.noalias() += A * dY;
            } else {
                if (!ta) dB.noalias() += dY.transpose() * A;
                else dB.noalias() += dY.transpose() * A.transpose();
            }
        }
    });
}

/// Y = X + b broadcast over columns (X is rows x cols, b is rows).
inline Var add_col_bias(const Var& x, const Var& b) {
    if (x->val.ndim() != 2 || b->val.ndim() != 1 || b->val.dim(0) != x->val.dim(0))
        throw InvalidInputError("add_col_bias: shape mismatch");
    const int r = x->val.dim(0), c = x->val.dim(1);
    Tensor out = x->val;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at2(i, j) += b->val[i];
    return detail::make_op(std::move(out), {x, b}, [x, b, r, c](Node& n) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) x->grad.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < r; ++i) {
                double s = 0.0;
                for (int j = 0; j < c; ++j) s += n.grad.at2(i, j);
                b->grad[i] += static_cast<float>(s);
            }
        }
    });
}

/// Row-wise softmax over columns where keep[j] != 0; excluded columns get 0.
/// Rows with no kept column come out all zero. Stable via max subtraction.
inline Var masked_softmax_rows(const Var& logits, const Tensor& keep) {
    if (logits->val.ndim() != 2) throw InvalidInputError("masked_softmax_rows: rank != 2");
    const int R = logits->val.dim(0), C = logits->val.dim(1);
    if (keep.numel() != C) throw InvalidInputError("masked_softmax_rows: keep length mismatch");

    Tensor out({R, C});
    for (int i = 0; i < R; ++i) {
        float mx = -std::numeric_limits<float>::infinity();
        for (int j = 0; j < C; ++j)
            if (keep[j] != 0.0f) mx = std::max(mx, logits->val.at2(i, j));
        if (!std::isfinite(mx)) continue;  // all masked: row stays zero
        double denom = 0.0;
        for (int j = 0; j < C; ++j) {
            if (keep[j] == 0.0f) continue;
            const float e = std::exp(logits->val.at2(i, j) - mx);
            out.at2(i, j) = e;
            denom += e;
        }
        const float inv = static_cast<float>(1.0 / denom);
        for (int j = 0; j < C; ++j) out.at2(i, j) *= inv;
    }
    return detail::make_op(std::move(out), {logits}, [logits, R, C](Node& n) {
        logits->ensure_grad();
        for (int i = 0; i < R; ++i) {
            double dot = 0.0;
            for (int j = 0; j < C; ++j) dot += double(n.grad.at2(i, j)) * n.val.at2(i, j);
            for (int j = 0; j < C; ++j) {
                const float s = n.val.at2(i, j);
                logits->grad.at2(i, j) += s * (n.grad.at2(i, j) - static_cast<float>(dot));
            }
        }
    });
}

// --------------------------- convolution ops -------------------------------

/// 2-D convolution, zero padding. x:(N,Ci,H,W) w:(Co,Ci,k,k) b:(Co).
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    using namespace detail;
    if (x->val.ndim() != 4) throw InvalidInputError("conv2d: input rank != 4");
    const int N = x->val.dim(0), Ci = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    const int Co = w->val.dim(0), k = w->val.dim(2);
    if (w->val.dim(1) != Ci) throw InvalidInputError("conv2d: channel mismatch");
    const int Ho = conv_out(H, k, stride, pad), Wo = conv_out(W, k, stride, pad);
    const int ckk = Ci * k * k, ncols = Ho * Wo;

    Tensor out({N, Co, Ho, Wo});
    std::vector<float> cols((std::size_t)ckk * ncols);
    MapC Wm(w->val.data.data(), Co, ckk);
    for (int n = 0; n < N; ++n) {
        im2col(x->val.data.data() + (std::size_t)n * Ci * H * W, Ci, H, W, k, stride, pad,
               cols.data());
        MapC Cm(cols.data(), ckk, ncols);
        MapM Y(out.data.data() + (std::size_t)n * Co * ncols, Co, ncols);
        Y.noalias() = Wm * Cm;
        for (int co = 0; co < Co; ++co) Y.row(co).array() += b->val[co];
    }
    return make_op(std::move(out), {x, w, b},
                   [x, w, b, N, Ci, H, W, Co, k, stride, pad, Ho, Wo, ckk, ncols](Node& nd) {
        std::vector<float> cols((std::size_t)ckk * ncols);
        std::vector<float> dcols;
        MapC Wm(w->val.data.data(), Co, ckk);
        if (x->requires_grad) {
            x->ensure_grad();
            dcols.resize((std::size_t)ckk * ncols);
        }
        if (w->requires_grad) w->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (int n = 0; n < N; ++n) {
            MapC dY(nd.grad.data.data() + (std::size_t)n * Co * ncols, Co, ncols);
            if (b->requires_grad)
                for (int co = 0; co < Co; ++co) b->grad[co] += dY.row(co).sum();
            if (w->requires_grad || x->requires_grad)
                im2col(x->val.data.data() + (std::size_t)n * Ci * H * W, Ci, H, W, k, stride,
                       pad, cols.data());
            if (w->requires_grad) {
                MapC Cm(cols.data(), ckk, ncols);
                MapM dW(w->grad.data.data(), Co, ckk);
                dW.noalias() += dY * Cm.transpose();
            }
            if (x->requires_grad) {
                MapM dC(dcols.data(), ckk, ncols);
                dC.noalias() = Wm.transpose() * dY;
                col2im_add(dcols.data(), Ci, H, W, k, stride, pad,
                           x->grad.data.data() + (std::size_t)n * Ci * H * W);
            }
        }
    });
}

/// Transposed convolution. x:(N,Ci,H,W) w:(Ci,Co,k,k) b:(Co).
/// Output spatial size is (H-1)*stride - 2*pad + k.
inline Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    using namespace detail;
    if (x->val.ndim() != 4) throw InvalidInputError("conv_transpose2d: input rank != 4");
    const int N = x->val.dim(0), Ci = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    if (w->val.dim(0) != Ci) throw InvalidInputError("conv_transpose2d: channel mismatch");
    const int Co = w->val.dim(1), k = w->val.dim(2);
    const int Ho = (H - 1) * stride - 2 * pad + k;
    const int Wo = (W - 1) * stride - 2 * pad + k;
    const int ckk = Co * k * k, ngrid = H * W;

    Tensor out({N, Co, Ho, Wo});
    std::vector<float> cols((std::size_t)ckk * ngrid);
    MapC Wm(w->val.data.data(), Ci, ckk);
    for (int n = 0; n < N; ++n) {
        MapC Xm(x->val.data.data() + (std::size_t)n * Ci * ngrid, Ci, ngrid);
        MapM Cm(cols.data(), ckk, ngrid);
        Cm.noalias() = Wm.transpose() * Xm;
        float* y = out.data.data() + (std::size_t)n * Co * Ho * Wo;
        col2im_add(cols.data(), Co, Ho, Wo, k, stride, pad, y);
        for (int co = 0; co < Co; ++co) {
            float* ch = y + (std::size_t)co * Ho * Wo;
            for (int i = 0; i < Ho * Wo; ++i) ch[i] += b->val[co];
        }
    }
    return make_op(std::move(out), {x, w, b},
                   [x, w, b, N, Ci, H, W, Co, k, stride, pad, Ho, Wo, ckk, ngrid](Node& nd) {
        std::vector<float> cols((std::size_t)ckk * ngrid);
        MapC Wm(w->val.data.data(), Ci, ckk);
        if (x->requires_grad) x->ensure_grad();
        if (w->requires_grad) w->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (int n = 0; n < N; ++n) {
            const float* dy = nd.grad.data.data() + (std::size_t)n * Co * Ho * Wo;
            if (b->requires_grad) {
                for (int co = 0; co < Co; ++co) {
                    const float* ch = dy + (std::size_t)co * Ho * Wo;
                    double s = 0.0;
                    for (int i = 0; i < Ho * Wo; ++i) s += ch[i];
                    b->grad[co] += static_cast<float>(s);
                }
            }
            im2col(dy, Co, Ho, Wo, k, stride, pad, cols.data());
            MapC dCm(cols.data(), ckk, ngrid);
            if (x->requires_grad) {
                MapM dX(x->grad.data.data() + (std::size_t)n * Ci * ngrid, Ci, ngrid);
                dX.noalias() += Wm * dCm;
            }
            if (w->requires_grad) {
                MapC Xm(x->val.data.data() + (std::size_t)n * Ci * ngrid, Ci, ngrid);
                MapM dW(w->grad.data.data(), Ci, ckk);
                dW.noalias() += Xm * dCm.transpose();
            }
        }
    });
}

/// 2x2 max pooling, stride 2.
inline Var maxpool2d(const Var& x) {
    if (x->val.ndim() != 4) throw InvalidInputError("maxpool2d: input rank != 4");
    const int N = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    if (H % 2 || W % 2) throw InvalidInputError("maxpool2d: odd spatial dims");
    const int Ho = H / 2, Wo = W / 2;
    Tensor out({N, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.data.size());
    std::int64_t oi = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* src = x->val.data.data() + ((std::size_t)n * C + c) * H * W;
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo, ++oi) {
                    std::int64_t base = (std::int64_t)(2 * ho) * W + 2 * wo;
                    std::int64_t best = base;
                    float bv = src[base];
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj) {
                            const std::int64_t idx = base + (std::int64_t)di * W + dj;
                            if (src[idx] > bv) {
                                bv = src[idx];
                                best = idx;
                            }
                        }
                    out.data[(std::size_t)oi] = bv;
                    (*argmax)[(std::size_t)oi] = ((std::int64_t)n * C + c) * H * W + best;
                }
        }
    return detail::make_op(std::move(out), {x}, [x, argmax](Node& n) {
        x->ensure_grad();
        for (std::size_t i = 0; i < n.grad.data.size(); ++i)
            x->grad.data[(std::size_t)(*argmax)[i]] += n.grad.data[i];
    });
}

/// Per-channel normalization over batch+spatial: y = (x - mu_c) / sqrt(var_c + eps).
inline Var channel_norm(const Var& x, float eps) {
    if (x->val.ndim() != 4) throw InvalidInputError("channel_norm: input rank != 4");
    const int N = x->val.dim(0), C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    const std::int64_t m = (std::int64_t)N * H * W;
    Tensor out({N, C, H, W});
    auto inv_std = std::make_shared<std::vector<float>>(C);
    for (int c = 0; c < C; ++c) {
        double mean = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* src = x->val.data.data() + ((std::size_t)n * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) mean += src[i];
        }
        mean /= double(m);
        double var = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* src = x->val.data.data() + ((std::size_t)n * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) {
                const double d = src[i] - mean;
                var += d * d;
            }
        }
        var /= double(m);
        const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
        (*inv_std)[c] = is;
        const float mu = static_cast<float>(mean);
        for (int n = 0; n < N; ++n) {
            const float* src = x->val.data.data() + ((std::size_t)n * C + c) * H * W;
            float* dst = out.data.data() + ((std::size_t)n * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) dst[i] = (src[i] - mu) * is;
        }
    }
    return detail::make_op(std::move(out), {x}, [x, inv_std, N, C, H, W, m](Node& nd) {
        x->ensure_grad();
        for (int c = 0; c < C; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int n = 0; n < N; ++n) {
                const std::size_t off = ((std::size_t)n * C + c) * H * W;
                for (int i = 0; i < H * W; ++i) {
                    sum_dy += nd.grad.data[off + i];
                    sum_dy_xhat += double(nd.grad.data[off + i]) * nd.val.data[off + i];
                }
            }
            const float mdy = static_cast<float>(sum_dy / double(m));
            const float mdyx = static_cast<float>(sum_dy_xhat / double(m));
            const float is = (*inv_std)[c];
            for (int n = 0; n < N; ++n) {
                const std::size_t off = ((std::size_t)n * C + c) * H * W;
                for (int i = 0; i < H * W; ++i)
                    x->grad.data[off + i] +=
                        is * (nd.grad.data[off + i] - mdy - nd.val.data[off + i] * mdyx);
            }
        }
    });
}

/// Concatenate along the channel axis.
inline Var concat_ch(const Var& a, const Var& b) {
    const int N = a->val.dim(0), Ca = a->val.dim(1), H = a->val.dim(2), W = a->val.dim(3);
    const int Cb = b->val.dim(1);
    if (b->val.dim(0) != N || b->val.dim(2) != H || b->val.dim(3) != W)
        throw InvalidInputError("concat_ch: shape mismatch");
    Tensor out({N, Ca + Cb, H, W});
    const std::size_t plane = (std::size_t)H * W;
    for (int n = 0; n < N; ++n) {
        std::copy_n(a->val.data.data() + (std::size_t)n * Ca * plane, Ca * plane,
                    out.data.data() + (std::size_t)n * (Ca + Cb) * plane);
        std::copy_n(b->val.data.data() + (std::size_t)n * Cb * plane, Cb * plane,
                    out.data.data() + ((std::size_t)n * (Ca + Cb) + Ca) * plane);
    }
    return detail::make_op(std::move(out), {a, b}, [a, b, N, Ca, Cb, plane](Node& nd) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int n = 0; n < N; ++n) {
                const float* g = nd.grad.data.data() + (std::size_t)n * (Ca + Cb) * plane;
                float* dst = a->grad.data.data() + (std::size_t)n * Ca * plane;
                for (std::size_t i = 0; i < Ca * plane; ++i) dst[i] += g[i];
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int n = 0; n < N; ++n) {
                const float* g =
                    nd.grad.data.data() + ((std::size_t)n * (Ca + Cb) + Ca) * plane;
                float* dst = b->grad.data.data() + (std::size_t)n * Cb * plane;
                for (std::size_t i = 0; i < Cb * plane; ++i) dst[i] += g[i];
            }
        }
    });
}

/// Per-position branch selection by a binary (H,W) mask broadcast over N,C:
/// out = mask ? global : local. Exact Eq.-10 fusion for binary masks.
inline Var fuse_select(const Var& local, const Var& global, const Tensor& mask) {
    if (!local->val.same_shape(global->val)) throw InvalidInputError("fuse: shape mismatch");
    if (local->val.ndim() != 4) throw InvalidInputError("fuse: input rank != 4");
    const int N = local->val.dim(0), C = local->val.dim(1), H = local->val.dim(2),
              W = local->val.dim(3);
    if (mask.ndim() != 2 || mask.dim(0) != H || mask.dim(1) != W)
        throw InvalidInputError("fuse: mask resolution mismatch");
    Tensor out({N, C, H, W});
    const std::size_t plane = (std::size_t)H * W;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const std::size_t off = ((std::size_t)n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                out.data[off + i] =
                    mask[static_cast<std::int64_t>(i)] != 0.0f ? global->val.data[off + i]
                                                               : local->val.data[off + i];
        }
    Tensor m = mask;
    return detail::make_op(std::move(out), {local, global},
                           [local, global, m, N, C, plane](Node& nd) {
        if (local->requires_grad) local->ensure_grad();
        if (global->requires_grad) global->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const std::size_t off = ((std::size_t)n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    if (m[static_cast<std::int64_t>(i)] != 0.0f) {
                        if (global->requires_grad) global->grad.data[off + i] += nd.grad.data[off + i];
                    } else {
                        if (local->requires_grad) local->grad.data[off + i] += nd.grad.data[off + i];
                    }
                }
            }
    });
}

// ------------------------------ reductions ---------------------------------

inline Var mean_all(const Var& a) {
    double s = 0.0;
    for (float v : a->val.data) s += v;
    const std::int64_t n = a->val.numel();
    Tensor out({1});
    out[0] = static_cast<float>(s / double(n));
    return detail::make_op(std::move(out), {a}, [a, n](Node& nd) {
        a->ensure_grad();
        const float g = nd.grad[0] / static_cast<float>(n);
        for (auto& v : a->grad.data) v += g;
    });
}

inline Var sum_all(const Var& a) {
    double s = 0.0;
    for (float v : a->val.data) s += v;
    Tensor out({1});
    out[0] = static_cast<float>(s);
    return detail::make_op(std::move(out), {a}, [a](Node& nd) {
        a->ensure_grad();
        const float g = nd.grad[0];
        for (auto& v : a->grad.data) v += g;
    });
}

/// Mean absolute difference (L1).
inline Var l1_loss(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw InvalidInputError("l1_loss: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a->val.data.size(); ++i)
        s += std::abs(double(a->val.data[i]) - double(b->val.data[i]));
    const std::int64_t n = a->val.numel();
    Tensor out({1});
    out[0] = static_cast<float>(s / double(n));
    return detail::make_op(std::move(out), {a, b}, [a, b, n](Node& nd) {
        const float g = nd.grad[0] / static_cast<float>(n);
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (std::size_t i = 0; i < a->val.data.size(); ++i) {
            const float d = a->val.data[i] - b->val.data[i];
            const float sg = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
            if (a->requires_grad) a->grad.data[i] += sg;
            if (b->requires_grad) b->grad.data[i] -= sg;
        }
    });
}

// --------------------------- sample gather/stack ---------------------------

/// Extract sample n of (N,C,H,W) as a (C, H*W) matrix.
inline Var select_sample(const Var& x, int n) {
    const int C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    Tensor out({C, H * W});
    std::copy_n(x->val.data.data() + (std::size_t)n * C * H * W, (std::size_t)C * H * W,
                out.data.data());
    return detail::make_op(std::move(out), {x}, [x, n, C, H, W](Node& nd) {
        x->ensure_grad();
        float* dst = x->grad.data.data() + (std::size_t)n * C * H * W;
        for (std::size_t i = 0; i < nd.grad.data.size(); ++i) dst[i] += nd.grad.data[i];
    });
}

/// Stack per-sample (C, H*W) matrices back into (N,C,H,W).
inline Var stack_samples(const std::vector<Var>& parts, int C, int H, int W) {
    const int N = static_cast<int>(parts.size());
    Tensor out({N, C, H, W});
    for (int n = 0; n < N; ++n)
        std::copy_n(parts[(std::size_t)n]->val.data.data(), (std::size_t)C * H * W,
                    out.data.data() + (std::size_t)n * C * H * W);
    std::vector<Var> ps(parts.begin(), parts.end());
    return detail::make_op(std::move(out), ps, [ps, C, H, W](Node& nd) {
        for (std::size_t n = 0; n < ps.size(); ++n) {
            if (!ps[n]->requires_grad) continue;
            ps[n]->ensure_grad();
            const float* g = nd.grad.data.data() + n * (std::size_t)C * H * W;
            for (std::size_t i = 0; i < (std::size_t)C * H * W; ++i) ps[n]->grad.data[i] += g[i];
        }
    });
}

// ------------------------------- backward ----------------------------------

/// Reverse-mode sweep from `root`. Gradients of intermediate nodes are reset
/// per call, so several backward passes over a shared graph accumulate only
/// into leaves (parameters).
inline void backward(const Var& root) {
    if (!root->requires_grad) return;
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : topo)
        if (!n->is_leaf()) {
            n->ensure_grad();
            n->zero_grad();
        }
    root->ensure_grad();
    for (auto& v : root->grad.data) v = 1.0f;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace albumen

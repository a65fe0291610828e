#pragma once

#include <algorithm>
#include <functional>
#include <limits>

#include "bsp/tensor.hpp"

namespace bsp {

enum class Act { relu, leaky_relu, clip01, leaky_clip };
enum class Extremum { min, max };

template <typename S>
S apply_act(Act kind, S x) {
    switch (kind) {
    case Act::relu: return x > S(0) ? x : S(0);
    case Act::leaky_relu: return x > S(0) ? x : S(0.01) * x;
    case Act::clip01: return x < S(0) ? S(0) : (x > S(1) ? S(1) : x);
    case Act::leaky_clip: {
        // h(x) = max(min(x, 0.01x + 0.99), 0.01x)
        S a = std::min(x, S(0.01) * x + S(0.99));
        return std::max(a, S(0.01) * x);
    }
    }
    return S(0);
}

// Subgradient at kinks goes to the active linear piece; exact ties resolve
// to the non-saturated (slope-1) branch.
template <typename S>
S act_slope(Act kind, S x) {
    switch (kind) {
    case Act::relu: return x >= S(0) ? S(1) : S(0);
    case Act::leaky_relu: return x >= S(0) ? S(1) : S(0.01);
    case Act::clip01: return (x >= S(0) && x <= S(1)) ? S(1) : S(0);
    case Act::leaky_clip: return (x >= S(0) && x <= S(1)) ? S(1) : S(0.01);
    }
    return S(0);
}

// Distance from an activation input to the nearest kink of that activation.
template <typename S>
double act_kink_distance(Act kind, S x) {
    double v = double(x);
    switch (kind) {
    case Act::relu:
    case Act::leaky_relu: return std::abs(v);
    case Act::clip01:
    case Act::leaky_clip: return std::min(std::abs(v), std::abs(v - 1.0));
    }
    return 0.0;
}

namespace kernels {

// C(n x m) += A(n x k) * B(k x m)
template <typename S>
void matmul_nn(const S* a, const S* b, S* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const S* ar = a + size_t(i) * size_t(k);
        S* cr = c + size_t(i) * size_t(m);
        for (int kk = 0; kk < k; ++kk) {
            const S av = ar[kk];
            if (av == S(0)) continue;
            const S* br = b + size_t(kk) * size_t(m);
            for (int j = 0; j < m; ++j) cr[j] += av * br[j];
        }
    }
}

// C(n x m) += A(n x k) * B(m x k)^T. Scalar dot reductions do not vectorize,
// so large inputs go through an explicit transpose and the NN kernel.
template <typename S>
void matmul_nt(const S* a, const S* b, S* c, int n, int k, int m) {
    if (n < 8) {
        for (int i = 0; i < n; ++i) {
            const S* ar = a + size_t(i) * size_t(k);
            S* cr = c + size_t(i) * size_t(m);
            for (int j = 0; j < m; ++j) {
                const S* br = b + size_t(j) * size_t(k);
                S acc = S(0);
                for (int kk = 0; kk < k; ++kk) acc += ar[kk] * br[kk];
                cr[j] += acc;
            }
        }
        return;
    }
    std::vector<S> bt(size_t(k) * size_t(m));
    for (int j = 0; j < m; ++j)
        for (int kk = 0; kk < k; ++kk) bt[size_t(kk) * size_t(m) + size_t(j)] = b[size_t(j) * size_t(k) + size_t(kk)];
    matmul_nn(a, bt.data(), c, n, k, m);
}

// C(k x m) += A(n x k)^T * B(n x m)
template <typename S>
void matmul_tn(const S* a, const S* b, S* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const S* ar = a + size_t(i) * size_t(k);
        const S* br = b + size_t(i) * size_t(m);
        for (int kk = 0; kk < k; ++kk) {
            const S av = ar[kk];
            if (av == S(0)) continue;
            S* cr = c + size_t(kk) * size_t(m);
            for (int j = 0; j < m; ++j) cr[j] += av * br[j];
        }
    }
}

} // namespace kernels

// Reverse-mode tape over the fixed op set the training graphs need.
// Single-threaded per tape; separate tapes may run on separate threads.
template <typename S>
class Tape {
public:
    enum class Op {
        constant, param, matmul, dense, act, conv2d, reduce_ext,
        gather_cols, add, sub, mul, affine, abs_val, sum_all, mean_all, reshape
    };

    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        Tensor<S> value;
        Tensor<S> grad;
        bool needs_grad = false;
        int param_slot = -1;
        Act act_kind = Act::relu;
        Extremum ext_kind = Extremum::min;
        int axis = 0;
        bool transpose_b = false;
        int pad = 0;
        S alpha = S(0), beta = S(0);
        std::vector<int> aux; // argext indices / gathered columns
    };

    int constant(Tensor<S> v) { return push(Op::constant, std::move(v), -1, -1, -1, false); }

    int param(const ParamStore<S>& store, int slot) {
        int id = push(Op::param, store[slot], -1, -1, -1, true);
        nodes_[size_t(id)].param_slot = slot;
        return id;
    }

    // x(n x a) * w(a x b) + bias(b), bias broadcast over rows
    int dense(int x, int w, int bias) {
        const Tensor<S>& xv = val(x);
        const Tensor<S>& wv = val(w);
        const Tensor<S>& bv = val(bias);
        if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
            throw std::invalid_argument("dense: input " + shape_str(xv.shape) +
                                        " does not conform with weight " + shape_str(wv.shape));
        if (bv.rank() != 1 || bv.dim(0) != wv.dim(1))
            throw std::invalid_argument("dense: bias " + shape_str(bv.shape) +
                                        " does not conform with weight " + shape_str(wv.shape));
        int n = xv.dim(0), m = wv.dim(1);
        Tensor<S> out({n, m});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) out.at(i, j) = bv[size_t(j)];
        kernels::matmul_nn(xv.data.data(), wv.data.data(), out.data.data(), n, xv.dim(1), m);
        return push(Op::dense, std::move(out), x, w, bias, any_grad(x, w, bias));
    }

    int matmul(int a, int b, bool transpose_b = false) {
        const Tensor<S>& av = val(a);
        const Tensor<S>& bv = val(b);
        if (av.rank() != 2 || bv.rank() != 2)
            throw std::invalid_argument("matmul: operands must be rank 2");
        int n = av.dim(0), k = av.dim(1);
        int m = transpose_b ? bv.dim(0) : bv.dim(1);
        int bk = transpose_b ? bv.dim(1) : bv.dim(0);
        if (k != bk)
            throw std::invalid_argument("matmul: inner dims " + shape_str(av.shape) + " vs " +
                                        shape_str(bv.shape));
        Tensor<S> out({n, m});
        if (transpose_b)
            kernels::matmul_nt(av.data.data(), bv.data.data(), out.data.data(), n, k, m);
        else
            kernels::matmul_nn(av.data.data(), bv.data.data(), out.data.data(), n, k, m);
        int id = push(Op::matmul, std::move(out), a, b, -1, any_grad(a, b));
        nodes_[size_t(id)].transpose_b = transpose_b;
        return id;
    }

    int act(int x, Act kind) {
        const Tensor<S>& xv = val(x);
        Tensor<S> out(xv.shape);
        double margin = kink_margin_;
        for (size_t i = 0; i < xv.numel(); ++i) {
            out[i] = apply_act(kind, xv[i]);
            margin = std::min(margin, act_kink_distance(kind, xv[i]));
        }
        kink_margin_ = margin;
        int id = push(Op::act, std::move(out), x, -1, -1, any_grad(x));
        nodes_[size_t(id)].act_kind = kind;
        return id;
    }

    // Strided cross-correlation, stride 2. input h x w x cin, kernels
    // k x k x cin x cout, bias cout. pad < 0 selects (k == 4 ? 1 : 0).
    int conv2d_s2(int x, int kern, int bias, int pad = -1) {
        const Tensor<S>& xv = val(x);
        const Tensor<S>& kv = val(kern);
        const Tensor<S>& bv = val(bias);
        if (xv.rank() != 3 || kv.rank() != 4)
            throw std::invalid_argument("conv2d: input must be h x w x cin, kernels k x k x cin x cout");
        int h = xv.dim(0), w = xv.dim(1), cin = xv.dim(2);
        int k = kv.dim(0), cout = kv.dim(3);
        if (kv.dim(1) != k || kv.dim(2) != cin)
            throw std::invalid_argument("conv2d: kernel shape " + shape_str(kv.shape) +
                                        " does not match input " + shape_str(xv.shape));
        if (h % 2 != 0 || w % 2 != 0)
            throw std::invalid_argument("conv2d: spatial dims must be even, got " + shape_str(xv.shape));
        if (pad < 0) pad = (k == 4) ? 1 : 0;
        int oh = (h + 2 * pad - k) / 2 + 1;
        int ow = (w + 2 * pad - k) / 2 + 1;
        if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
        Tensor<S> out({oh, ow, cout});
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                S* op = &out.data[(size_t(oy) * size_t(ow) + size_t(ox)) * size_t(cout)];
                for (int oc = 0; oc < cout; ++oc) op[oc] = bv[size_t(oc)];
                for (int ky = 0; ky < k; ++ky) {
                    int iy = 2 * oy - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        int ix = 2 * ox - pad + kx;
                        if (ix < 0 || ix >= w) continue;
                        const S* ip = &xv.data[(size_t(iy) * size_t(w) + size_t(ix)) * size_t(cin)];
                        const S* kp = &kv.data[((size_t(ky) * size_t(k) + size_t(kx)) * size_t(cin)) * size_t(cout)];
                        for (int ic = 0; ic < cin; ++ic) {
                            const S iv = ip[ic];
                            if (iv == S(0)) continue;
                            const S* kc = kp + size_t(ic) * size_t(cout);
                            for (int oc = 0; oc < cout; ++oc) op[oc] += iv * kc[oc];
                        }
                    }
                }
            }
        int id = push(Op::conv2d, std::move(out), x, kern, bias, any_grad(x, kern, bias));
        nodes_[size_t(id)].pad = pad;
        return id;
    }

    // Extremum along an axis of a rank-1 or rank-2 tensor. Backward routes
    // the incoming gradient to the first index attaining the extremum.
    int reduce_extremum(int x, Extremum kind, int axis) {
        const Tensor<S>& xv = val(x);
        if (xv.rank() == 1 && axis != 0)
            throw std::invalid_argument("reduce_extremum: axis out of range for rank-1 input");
        if (xv.rank() == 2 && axis != 0 && axis != 1)
            throw std::invalid_argument("reduce_extremum: axis out of range");
        int n = xv.rank() == 1 ? 1 : xv.dim(0);
        int m = xv.rank() == 1 ? xv.dim(0) : xv.dim(1);
        int outer = (axis == 1 || xv.rank() == 1) ? n : m;
        int inner = (axis == 1 || xv.rank() == 1) ? m : n;
        if (inner == 0)
            throw std::invalid_argument("reduce_extremum: reduction over an empty axis");
        Tensor<S> out(xv.rank() == 1 ? std::vector<int>{1} : std::vector<int>{outer});
        std::vector<int> arg(size_t(outer), 0);
        double margin = kink_margin_;
        for (int o = 0; o < outer; ++o) {
            S best = S(0), second = S(0);
            int besti = -1;
            bool has_second = false;
            for (int in = 0; in < inner; ++in) {
                S v = (axis == 1 || xv.rank() == 1) ? xv.at(o, in) : xv.at(in, o);
                if (besti < 0) {
                    best = v;
                    besti = in;
                    continue;
                }
                // strict comparison: the first index attaining the extremum wins
                if (kind == Extremum::min ? v < best : v > best) {
                    second = best;
                    has_second = true;
                    best = v;
                    besti = in;
                } else if (!has_second || (kind == Extremum::min ? v < second : v > second)) {
                    second = v;
                    has_second = true;
                }
            }
            if (has_second) margin = std::min(margin, std::abs(double(best) - double(second)));
            out[size_t(o)] = best;
            arg[size_t(o)] = besti;
        }
        kink_margin_ = margin;
        int id = push(Op::reduce_ext, std::move(out), x, -1, -1, any_grad(x));
        nodes_[size_t(id)].ext_kind = kind;
        nodes_[size_t(id)].axis = axis;
        nodes_[size_t(id)].aux = std::move(arg);
        return id;
    }

    int gather_cols(int x, std::vector<int> cols) {
        const Tensor<S>& xv = val(x);
        if (xv.rank() != 2) throw std::invalid_argument("gather_cols: rank-2 input required");
        int n = xv.dim(0);
        Tensor<S> out({n, int(cols.size())});
        for (int i = 0; i < n; ++i)
            for (size_t j = 0; j < cols.size(); ++j) out.at(i, int(j)) = xv.at(i, cols[j]);
        int id = push(Op::gather_cols, std::move(out), x, -1, -1, any_grad(x));
        nodes_[size_t(id)].aux = std::move(cols);
        return id;
    }

    int add(int a, int b) { return ew(Op::add, a, b); }
    int sub(int a, int b) { return ew(Op::sub, a, b); }
    int mul(int a, int b) { return ew(Op::mul, a, b); }

    // alpha * x + beta, elementwise
    int affine(int x, S alpha, S beta) {
        const Tensor<S>& xv = val(x);
        Tensor<S> out(xv.shape);
        for (size_t i = 0; i < xv.numel(); ++i) out[i] = alpha * xv[i] + beta;
        int id = push(Op::affine, std::move(out), x, -1, -1, any_grad(x));
        nodes_[size_t(id)].alpha = alpha;
        nodes_[size_t(id)].beta = beta;
        return id;
    }

    int abs_val(int x) {
        const Tensor<S>& xv = val(x);
        Tensor<S> out(xv.shape);
        double margin = kink_margin_;
        for (size_t i = 0; i < xv.numel(); ++i) {
            out[i] = xv[i] < S(0) ? -xv[i] : xv[i];
            margin = std::min(margin, std::abs(double(xv[i])));
        }
        kink_margin_ = margin;
        return push(Op::abs_val, std::move(out), x, -1, -1, any_grad(x));
    }

    int sum_all(int x) {
        const Tensor<S>& xv = val(x);
        S acc = S(0);
        for (S v : xv.data) acc += v;
        return push(Op::sum_all, Tensor<S>({1}, {acc}), x, -1, -1, any_grad(x));
    }

    int mean_all(int x) {
        const Tensor<S>& xv = val(x);
        if (xv.numel() == 0) throw std::invalid_argument("mean_all: empty tensor");
        S acc = S(0);
        for (S v : xv.data) acc += v;
        acc /= S(double(xv.numel()));
        return push(Op::mean_all, Tensor<S>({1}, {acc}), x, -1, -1, any_grad(x));
    }

    int reshape(int x, std::vector<int> shp) {
        const Tensor<S>& xv = val(x);
        if (Tensor<S>::numel_of(shp) != xv.numel())
            throw std::invalid_argument("reshape: element count mismatch");
        Tensor<S> out(std::move(shp));
        out.data = xv.data;
        return push(Op::reshape, std::move(out), x, -1, -1, any_grad(x));
    }

    const Tensor<S>& val(int id) const { return nodes_[size_t(id)].value; }
    const Tensor<S>& grad(int id) const { return nodes_[size_t(id)].grad; }

    // Smallest observed distance of any activation/abs input to a kink,
    // and the smallest extremum tie gap. Used by the FD harness.
    double kink_margin() const { return kink_margin_; }

    void backward(int loss) {
        if (val(loss).numel() != 1)
            throw std::invalid_argument("backward: loss node must be scalar");
        for (auto& n : nodes_) n.grad = Tensor<S>();
        Node& ln = nodes_[size_t(loss)];
        ln.grad = Tensor<S>(ln.value.shape);
        ln.grad[0] = S(1);
        for (int id = loss; id >= 0; --id) {
            Node& n = nodes_[size_t(id)];
            if (!n.needs_grad || n.grad.numel() == 0) continue;
            backprop(n);
        }
    }

    template <typename Fn>
    void for_each_param_grad(Fn&& fn) const {
        for (const auto& n : nodes_)
            if (n.op == Op::param && n.grad.numel() > 0) fn(n.param_slot, n.grad);
    }

    void accumulate_param_grads(GradBuffer<S>& out) const {
        for_each_param_grad([&](int slot, const Tensor<S>& g) {
            auto& dst = out.grads[size_t(slot)].data;
            for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.data[i];
        });
    }

private:
    std::vector<Node> nodes_;
    double kink_margin_ = std::numeric_limits<double>::infinity();

    bool any_grad(int a, int b = -1, int c = -1) const {
        auto g = [&](int id) { return id >= 0 && nodes_[size_t(id)].needs_grad; };
        return g(a) || g(b) || g(c);
    }

    int push(Op op, Tensor<S> value, int a, int b, int c, bool needs_grad) {
        Node n;
        n.op = op;
        n.value = std::move(value);
        n.a = a;
        n.b = b;
        n.c = c;
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    int ew(Op op, int a, int b) {
        const Tensor<S>& av = val(a);
        const Tensor<S>& bv = val(b);
        if (!av.same_shape(bv))
            throw std::invalid_argument("elementwise op: shape mismatch " + shape_str(av.shape) +
                                        " vs " + shape_str(bv.shape));
        Tensor<S> out(av.shape);
        for (size_t i = 0; i < av.numel(); ++i) {
            switch (op) {
            case Op::add: out[i] = av[i] + bv[i]; break;
            case Op::sub: out[i] = av[i] - bv[i]; break;
            case Op::mul: out[i] = av[i] * bv[i]; break;
            default: break;
            }
        }
        return push(op, std::move(out), a, b, -1, any_grad(a, b));
    }

    Tensor<S>& grad_of(int id) {
        Node& n = nodes_[size_t(id)];
        if (n.grad.numel() == 0) n.grad = Tensor<S>(n.value.shape);
        return n.grad;
    }

    void backprop(Node& n) {
        const Tensor<S>& g = n.grad;
        auto wants = [&](int id) { return id >= 0 && nodes_[size_t(id)].needs_grad; };
        switch (n.op) {
        case Op::constant:
        case Op::param:
            break;
        case Op::dense: {
            const Tensor<S>& x = val(n.a);
            const Tensor<S>& w = val(n.b);
            int rows = x.dim(0), k = x.dim(1), m = w.dim(1);
            if (wants(n.a))
                kernels::matmul_nt(g.data.data(), w.data.data(), grad_of(n.a).data.data(), rows, m, k);
            if (wants(n.b))
                kernels::matmul_tn(x.data.data(), g.data.data(), grad_of(n.b).data.data(), rows, k, m);
            if (wants(n.c)) {
                Tensor<S>& gb = grad_of(n.c);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < m; ++j) gb[size_t(j)] += g.at(i, j);
            }
            break;
        }
        case Op::matmul: {
            const Tensor<S>& a = val(n.a);
            const Tensor<S>& b = val(n.b);
            int rows = a.dim(0), k = a.dim(1), m = n.value.dim(1);
            if (!n.transpose_b) {
                if (wants(n.a))
                    kernels::matmul_nt(g.data.data(), b.data.data(), grad_of(n.a).data.data(), rows, m, k);
                if (wants(n.b))
                    kernels::matmul_tn(a.data.data(), g.data.data(), grad_of(n.b).data.data(), rows, k, m);
            } else {
                // value = A * B^T with B (m x k): dA = G * B, dB = G^T * A
                if (wants(n.a))
                    kernels::matmul_nn(g.data.data(), b.data.data(), grad_of(n.a).data.data(), rows, m, k);
                if (wants(n.b))
                    kernels::matmul_tn(g.data.data(), a.data.data(), grad_of(n.b).data.data(), rows, m, k);
            }
            break;
        }
        case Op::act: {
            if (!wants(n.a)) break;
            const Tensor<S>& x = val(n.a);
            Tensor<S>& gx = grad_of(n.a);
            for (size_t i = 0; i < x.numel(); ++i) gx[i] += g[i] * act_slope(n.act_kind, x[i]);
            break;
        }
        case Op::conv2d: {
            const Tensor<S>& x = val(n.a);
            const Tensor<S>& kern = val(n.b);
            int h = x.dim(0), w = x.dim(1), cin = x.dim(2);
            int k = kern.dim(0), cout = kern.dim(3);
            int oh = n.value.dim(0), ow = n.value.dim(1);
            Tensor<S>* gx = wants(n.a) ? &grad_of(n.a) : nullptr;
            Tensor<S>* gk = wants(n.b) ? &grad_of(n.b) : nullptr;
            Tensor<S>* gb = wants(n.c) ? &grad_of(n.c) : nullptr;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const S* gp = &g.data[(size_t(oy) * size_t(ow) + size_t(ox)) * size_t(cout)];
                    if (gb)
                        for (int oc = 0; oc < cout; ++oc) gb->data[size_t(oc)] += gp[oc];
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = 2 * oy - n.pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = 2 * ox - n.pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            size_t ioff = (size_t(iy) * size_t(w) + size_t(ix)) * size_t(cin);
                            size_t koff = (size_t(ky) * size_t(k) + size_t(kx)) * size_t(cin) * size_t(cout);
                            for (int ic = 0; ic < cin; ++ic) {
                                if (gx) {
                                    S acc = S(0);
                                    const S* kc = &kern.data[koff + size_t(ic) * size_t(cout)];
                                    for (int oc = 0; oc < cout; ++oc) acc += kc[oc] * gp[oc];
                                    gx->data[ioff + size_t(ic)] += acc;
                                }
                                if (gk) {
                                    const S iv = x.data[ioff + size_t(ic)];
                                    if (iv == S(0)) continue;
                                    S* kc = &gk->data[koff + size_t(ic) * size_t(cout)];
                                    for (int oc = 0; oc < cout; ++oc) kc[oc] += iv * gp[oc];
                                }
                            }
                        }
                    }
                }
            break;
        }
        case Op::reduce_ext: {
            if (!wants(n.a)) break;
            const Tensor<S>& x = val(n.a);
            Tensor<S>& gx = grad_of(n.a);
            int outer = int(n.aux.size());
            for (int o = 0; o < outer; ++o) {
                int in = n.aux[size_t(o)];
                if (n.axis == 1 || x.rank() == 1)
                    gx.at(o, in) += g[size_t(o)];
                else
                    gx.at(in, o) += g[size_t(o)];
            }
            break;
        }
        case Op::gather_cols: {
            if (!wants(n.a)) break;
            Tensor<S>& gx = grad_of(n.a);
            int rows = n.value.dim(0);
            for (int i = 0; i < rows; ++i)
                for (size_t j = 0; j < n.aux.size(); ++j) gx.at(i, n.aux[j]) += g.at(i, int(j));
            break;
        }
        case Op::add:
            if (wants(n.a)) axpy(grad_of(n.a), g, S(1));
            if (wants(n.b)) axpy(grad_of(n.b), g, S(1));
            break;
        case Op::sub:
            if (wants(n.a)) axpy(grad_of(n.a), g, S(1));
            if (wants(n.b)) axpy(grad_of(n.b), g, S(-1));
            break;
        case Op::mul: {
            if (wants(n.a)) {
                const Tensor<S>& b = val(n.b);
                Tensor<S>& ga = grad_of(n.a);
                for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * b[i];
            }
            if (wants(n.b)) {
                const Tensor<S>& a = val(n.a);
                Tensor<S>& gb = grad_of(n.b);
                for (size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * a[i];
            }
            break;
        }
        case Op::affine:
            if (wants(n.a)) axpy(grad_of(n.a), g, n.alpha);
            break;
        case Op::abs_val: {
            if (!wants(n.a)) break;
            const Tensor<S>& x = val(n.a);
            Tensor<S>& gx = grad_of(n.a);
            for (size_t i = 0; i < x.numel(); ++i) gx[i] += x[i] < S(0) ? -g[i] : g[i];
            break;
        }
        case Op::sum_all: {
            if (!wants(n.a)) break;
            Tensor<S>& gx = grad_of(n.a);
            for (size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0];
            break;
        }
        case Op::mean_all: {
            if (!wants(n.a)) break;
            Tensor<S>& gx = grad_of(n.a);
            const S s = g[0] / S(double(gx.numel()));
            for (size_t i = 0; i < gx.numel(); ++i) gx[i] += s;
            break;
        }
        case Op::reshape:
            if (wants(n.a)) {
                Tensor<S>& gx = grad_of(n.a);
                for (size_t i = 0; i < gx.numel(); ++i) gx[i] += g[i];
            }
            break;
        }
    }

    static void axpy(Tensor<S>& dst, const Tensor<S>& src, S s) {
        for (size_t i = 0; i < dst.numel(); ++i) dst[i] += s * src[i];
    }
};

} // namespace bsp

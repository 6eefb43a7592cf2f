#include "admix/tape.hpp"

#include <cmath>
#include <string>

namespace admix {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw TensorError(msg); }

}  // namespace

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::input(Tensor v, bool requires_grad) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

NodeId Tape::conv2d(NodeId x, NodeId kernels, NodeId bias, int stride, int padding) {
    const Tensor& xv = value(x);
    const Tensor& kv = value(kernels);
    if (xv.rank() != 3) fail("conv2d input must be CHW, got " + xv.shape_str());
    if (kv.rank() != 4) fail("conv2d kernels must be [Cout,Cin,kH,kW], got " + kv.shape_str());
    if (stride < 1) fail("conv2d stride must be >= 1");
    int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    int cout = kv.dim(0), kcin = kv.dim(1), kh = kv.dim(2), kw = kv.dim(3);
    if (kcin != cin)
        fail("conv2d channel mismatch: input has " + std::to_string(cin) +
             ", kernels expect " + std::to_string(kcin));
    if (kh > h + 2 * padding || kw > w + 2 * padding)
        fail("conv2d kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
             " exceeds padded input " + std::to_string(h + 2 * padding) + "x" +
             std::to_string(w + 2 * padding));
    int ho = (h + 2 * padding - kh) / stride + 1;
    int wo = (w + 2 * padding - kw) / stride + 1;

    Node n;
    n.op = Op::Conv2d;
    n.inputs = {x, kernels, bias};
    n.i0 = stride;
    n.i1 = padding;
    if (bias >= 0) {
        const Tensor& bv = value(bias);
        if (bv.rank() != 1 || bv.dim(0) != cout)
            fail("conv2d bias must be [" + std::to_string(cout) + "], got " + bv.shape_str());
        n.requires_grad = node(x).requires_grad || node(kernels).requires_grad ||
                          node(bias).requires_grad;
    } else {
        n.requires_grad = node(x).requires_grad || node(kernels).requires_grad;
    }

    Tensor out({cout, ho, wo});
    for (int co = 0; co < cout; ++co) {
        double b = bias >= 0 ? value(bias)[co] : 0.0;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = b;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = oy * stride + ky - padding;
                        if (iy < 0 || iy >= h) continue;
                        const float* xrow = &xv.data[static_cast<size_t>((ci * h + iy) * w)];
                        const float* krow =
                            &kv.data[static_cast<size_t>(((co * cin + ci) * kh + ky) * kw)];
                        for (int kx = 0; kx < kw; ++kx) {
                            int ix = ox * stride + kx - padding;
                            if (ix < 0 || ix >= w) continue;
                            acc += static_cast<double>(xrow[ix]) * krow[kx];
                        }
                    }
                out.at3(co, oy, ox) = static_cast<float>(acc);
            }
    }
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::dense(NodeId x, NodeId weight, NodeId bias) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(weight);
    const Tensor& bv = value(bias);
    if (xv.rank() != 1) fail("dense input must be rank 1, got " + xv.shape_str());
    if (wv.rank() != 2 || wv.dim(1) != xv.dim(0))
        fail("dense weight " + wv.shape_str() + " incompatible with input " + xv.shape_str());
    if (bv.rank() != 1 || bv.dim(0) != wv.dim(0))
        fail("dense bias " + bv.shape_str() + " incompatible with weight " + wv.shape_str());
    int m = wv.dim(0), nn = wv.dim(1);

    Node n;
    n.op = Op::Dense;
    n.inputs = {x, weight, bias};
    n.requires_grad =
        node(x).requires_grad || node(weight).requires_grad || node(bias).requires_grad;
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = bv[i];
        const float* wrow = &wv.data[static_cast<size_t>(i) * nn];
        for (int j = 0; j < nn; ++j) acc += static_cast<double>(wrow[j]) * xv[j];
        out[i] = static_cast<float>(acc);
    }
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Relu;
    n.inputs = {x};
    n.requires_grad = node(x).requires_grad;
    Tensor out(xv.shape);
    for (size_t i = 0; i < xv.data.size(); ++i) out.data[i] = xv.data[i] > 0.0f ? xv.data[i] : 0.0f;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::avgpool2d(NodeId x, int k) {
    const Tensor& xv = value(x);
    if (xv.rank() != 3) fail("avgpool2d input must be CHW, got " + xv.shape_str());
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (k < 1 || h % k != 0 || w % k != 0)
        fail("avgpool2d window " + std::to_string(k) + " does not divide " +
             std::to_string(h) + "x" + std::to_string(w));
    int ho = h / k, wo = w / k;
    Node n;
    n.op = Op::AvgPool2d;
    n.inputs = {x};
    n.i0 = k;
    n.requires_grad = node(x).requires_grad;
    Tensor out({c, ho, wo});
    double inv = 1.0 / (static_cast<double>(k) * k);
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx)
                        acc += xv.at3(ch, oy * k + dy, ox * k + dx);
                out.at3(ch, oy, ox) = static_cast<float>(acc * inv);
            }
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::flatten(NodeId x) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Flatten;
    n.inputs = {x};
    n.requires_grad = node(x).requires_grad;
    n.value = Tensor({static_cast<int>(xv.numel())}, xv.data);
    return push(std::move(n));
}

NodeId Tape::sum(NodeId x) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Sum;
    n.inputs = {x};
    n.requires_grad = node(x).requires_grad;
    double acc = 0.0;
    for (float v : xv.data) acc += v;
    n.value = Tensor({1}, {static_cast<float>(acc)});
    return push(std::move(n));
}

NodeId Tape::scale(NodeId x, float a) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Scale;
    n.inputs = {x};
    n.f0 = a;
    n.requires_grad = node(x).requires_grad;
    Tensor out(xv.shape);
    for (size_t i = 0; i < xv.data.size(); ++i) out.data[i] = a * xv.data[i];
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::affine_const(NodeId x, float a, const Tensor& c) {
    const Tensor& xv = value(x);
    if (!xv.same_shape(c))
        fail("affine_const shape mismatch " + xv.shape_str() + " vs " + c.shape_str());
    Node n;
    n.op = Op::AffineConst;
    n.inputs = {x};
    n.f0 = a;
    n.requires_grad = node(x).requires_grad;
    Tensor out(xv.shape);
    for (size_t i = 0; i < xv.data.size(); ++i) out.data[i] = a * xv.data[i] + c.data[i];
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::mask_blend(NodeId x, const Tensor& other, const Tensor& mask) {
    const Tensor& xv = value(x);
    if (!xv.same_shape(other) || !xv.same_shape(mask))
        fail("mask_blend shape mismatch " + xv.shape_str() + " vs " + other.shape_str());
    Node n;
    n.op = Op::MaskBlend;
    n.inputs = {x};
    n.requires_grad = node(x).requires_grad;
    n.coeffs = mask.data;
    Tensor out(xv.shape);
    for (size_t i = 0; i < xv.data.size(); ++i)
        out.data[i] = mask.data[i] != 0.0f ? xv.data[i] : other.data[i];
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::resize_nearest(NodeId x, int h2, int w2) {
    Node n;
    n.op = Op::ResizeNearest;
    n.inputs = {x};
    n.i0 = h2;
    n.i1 = w2;
    n.requires_grad = node(x).requires_grad;
    n.value = admix::resize_nearest(value(x), h2, w2);
    return push(std::move(n));
}

NodeId Tape::pad_constant(NodeId x, int top, int bottom, int left, int right, float v) {
    Node n;
    n.op = Op::PadConstant;
    n.inputs = {x};
    n.i0 = top;
    n.i1 = bottom;
    n.i2 = left;
    n.i3 = right;
    n.f0 = v;
    n.requires_grad = node(x).requires_grad;
    n.value = admix::pad_constant(value(x), top, bottom, left, right, v);
    return push(std::move(n));
}

NodeId Tape::add_weighted(const std::vector<NodeId>& terms, const std::vector<float>& coeffs) {
    if (terms.empty() || terms.size() != coeffs.size())
        fail("add_weighted needs matching non-empty term/coeff lists");
    const Tensor& first = value(terms[0]);
    Node n;
    n.op = Op::AddWeighted;
    n.inputs = terms;
    n.coeffs = coeffs;
    Tensor out = Tensor::zeros(first.shape);
    for (size_t t = 0; t < terms.size(); ++t) {
        const Tensor& tv = value(terms[t]);
        if (!tv.same_shape(first))
            fail("add_weighted shape mismatch " + tv.shape_str() + " vs " + first.shape_str());
        n.requires_grad = n.requires_grad || node(terms[t]).requires_grad;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += coeffs[t] * tv.data[i];
    }
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Tape::softmax_cross_entropy(NodeId logits, int label) {
    const Tensor& lv = value(logits);
    if (lv.rank() != 1) fail("softmax_cross_entropy logits must be rank 1, got " + lv.shape_str());
    int c = lv.dim(0);
    if (label < 0 || label >= c)
        fail("label " + std::to_string(label) + " out of range [0, " + std::to_string(c) + ")");

    double mx = lv[0];
    for (int i = 1; i < c; ++i) mx = std::max(mx, static_cast<double>(lv[i]));
    double denom = 0.0;
    std::vector<double> ex(static_cast<size_t>(c));
    for (int i = 0; i < c; ++i) {
        ex[static_cast<size_t>(i)] = std::exp(static_cast<double>(lv[i]) - mx);
        denom += ex[static_cast<size_t>(i)];
    }
    Node n;
    n.op = Op::SoftmaxCrossEntropy;
    n.inputs = {logits};
    n.i0 = label;
    n.requires_grad = node(logits).requires_grad;
    n.aux = Tensor({c});
    for (int i = 0; i < c; ++i)
        n.aux[i] = static_cast<float>(ex[static_cast<size_t>(i)] / denom);
    double loss = -(static_cast<double>(lv[label]) - mx - std::log(denom));
    n.value = Tensor({1}, {static_cast<float>(loss)});
    return push(std::move(n));
}

float Tape::scalar(NodeId id) const {
    const Tensor& v = value(id);
    if (v.numel() != 1) fail("expected scalar node, got " + v.shape_str());
    return v[0];
}

std::vector<Tensor> Tape::gradients(NodeId loss, const std::vector<NodeId>& wrt) {
    const Tensor& lv = value(loss);
    if (lv.numel() != 1) fail("loss must be scalar, got " + lv.shape_str());

    std::vector<Tensor> grads(nodes_.size());
    std::vector<char> touched(nodes_.size(), 0);
    auto grad_of = [&](NodeId id) -> Tensor& {
        if (!touched[static_cast<size_t>(id)]) {
            grads[static_cast<size_t>(id)] = Tensor::zeros(value(id).shape);
            touched[static_cast<size_t>(id)] = 1;
        }
        return grads[static_cast<size_t>(id)];
    };

    grad_of(loss)[0] = 1.0f;

    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = node(id);
        if (!touched[static_cast<size_t>(id)] || !n.requires_grad) continue;
        const Tensor& g = grads[static_cast<size_t>(id)];

        switch (n.op) {
            case Op::Input:
                break;
            case Op::Conv2d: {
                NodeId xi = n.inputs[0], ki = n.inputs[1], bi = n.inputs[2];
                const Tensor& xv = value(xi);
                const Tensor& kv = value(ki);
                int stride = n.i0, padding = n.i1;
                int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
                int cout = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
                int ho = n.value.dim(1), wo = n.value.dim(2);
                bool need_x = node(xi).requires_grad;
                bool need_k = node(ki).requires_grad;
                bool need_b = bi >= 0 && node(bi).requires_grad;
                Tensor* dx = need_x ? &grad_of(xi) : nullptr;
                Tensor* dk = need_k ? &grad_of(ki) : nullptr;
                Tensor* db = need_b ? &grad_of(bi) : nullptr;
                for (int co = 0; co < cout; ++co)
                    for (int oy = 0; oy < ho; ++oy)
                        for (int ox = 0; ox < wo; ++ox) {
                            float go = g.at3(co, oy, ox);
                            if (go == 0.0f) continue;
                            if (db) (*db)[co] += go;
                            for (int ci = 0; ci < cin; ++ci)
                                for (int ky = 0; ky < kh; ++ky) {
                                    int iy = oy * stride + ky - padding;
                                    if (iy < 0 || iy >= h) continue;
                                    float* dxrow = dx ? &dx->data[static_cast<size_t>((ci * h + iy) * w)] : nullptr;
                                    const float* xrow = &xv.data[static_cast<size_t>((ci * h + iy) * w)];
                                    size_t kbase = static_cast<size_t>(((co * cin + ci) * kh + ky) * kw);
                                    const float* krow = &kv.data[kbase];
                                    float* dkrow = dk ? &dk->data[kbase] : nullptr;
                                    for (int kx = 0; kx < kw; ++kx) {
                                        int ix = ox * stride + kx - padding;
                                        if (ix < 0 || ix >= w) continue;
                                        if (dxrow) dxrow[ix] += krow[kx] * go;
                                        if (dkrow) dkrow[kx] += xrow[ix] * go;
                                    }
                                }
                        }
                break;
            }
            case Op::Dense: {
                NodeId xi = n.inputs[0], wi = n.inputs[1], bi = n.inputs[2];
                const Tensor& xv = value(xi);
                const Tensor& wv = value(wi);
                int m = wv.dim(0), nn = wv.dim(1);
                bool need_x = node(xi).requires_grad;
                bool need_w = node(wi).requires_grad;
                bool need_b = node(bi).requires_grad;
                Tensor* dx = need_x ? &grad_of(xi) : nullptr;
                Tensor* dw = need_w ? &grad_of(wi) : nullptr;
                Tensor* db = need_b ? &grad_of(bi) : nullptr;
                for (int i = 0; i < m; ++i) {
                    float go = g[i];
                    if (go == 0.0f) continue;
                    if (db) (*db)[i] += go;
                    const float* wrow = &wv.data[static_cast<size_t>(i) * nn];
                    float* dwrow = dw ? &dw->data[static_cast<size_t>(i) * nn] : nullptr;
                    for (int j = 0; j < nn; ++j) {
                        if (dx) (*dx)[j] += wrow[j] * go;
                        if (dwrow) dwrow[j] += xv[j] * go;
                    }
                }
                break;
            }
            case Op::Relu: {
                const Tensor& xv = value(n.inputs[0]);
                Tensor& dx = grad_of(n.inputs[0]);
                for (size_t i = 0; i < xv.data.size(); ++i)
                    if (xv.data[i] > 0.0f) dx.data[i] += g.data[i];
                break;
            }
            case Op::AvgPool2d: {
                const Tensor& xv = value(n.inputs[0]);
                Tensor& dx = grad_of(n.inputs[0]);
                int k = n.i0;
                int c = xv.dim(0);
                int ho = n.value.dim(1), wo = n.value.dim(2);
                float inv = 1.0f / static_cast<float>(k * k);
                for (int ch = 0; ch < c; ++ch)
                    for (int oy = 0; oy < ho; ++oy)
                        for (int ox = 0; ox < wo; ++ox) {
                            float go = g.at3(ch, oy, ox) * inv;
                            for (int dy = 0; dy < k; ++dy)
                                for (int dxx = 0; dxx < k; ++dxx)
                                    dx.at3(ch, oy * k + dy, ox * k + dxx) += go;
                        }
                break;
            }
            case Op::Flatten: {
                Tensor& dx = grad_of(n.inputs[0]);
                for (size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i];
                break;
            }
            case Op::Sum: {
                Tensor& dx = grad_of(n.inputs[0]);
                for (auto& v : dx.data) v += g[0];
                break;
            }
            case Op::Scale:
            case Op::AffineConst: {
                Tensor& dx = grad_of(n.inputs[0]);
                for (size_t i = 0; i < g.data.size(); ++i) dx.data[i] += n.f0 * g.data[i];
                break;
            }
            case Op::MaskBlend: {
                Tensor& dx = grad_of(n.inputs[0]);
                for (size_t i = 0; i < g.data.size(); ++i)
                    if (n.coeffs[i] != 0.0f) dx.data[i] += g.data[i];
                break;
            }
            case Op::ResizeNearest: {
                const Tensor& xv = value(n.inputs[0]);
                Tensor& dx = grad_of(n.inputs[0]);
                int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
                int h2 = n.i0, w2 = n.i1;
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < h2; ++y) {
                        int sy = static_cast<int>(static_cast<int64_t>(y) * h / h2);
                        for (int xx = 0; xx < w2; ++xx) {
                            int sx = static_cast<int>(static_cast<int64_t>(xx) * w / w2);
                            dx.at3(ch, sy, sx) += g.at3(ch, y, xx);
                        }
                    }
                break;
            }
            case Op::PadConstant: {
                const Tensor& xv = value(n.inputs[0]);
                Tensor& dx = grad_of(n.inputs[0]);
                int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
                int top = n.i0, left = n.i2;
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < h; ++y)
                        for (int xx = 0; xx < w; ++xx)
                            dx.at3(ch, y, xx) += g.at3(ch, y + top, xx + left);
                break;
            }
            case Op::AddWeighted: {
                for (size_t t = 0; t < n.inputs.size(); ++t) {
                    if (!node(n.inputs[t]).requires_grad) continue;
                    Tensor& dx = grad_of(n.inputs[t]);
                    float c = n.coeffs[t];
                    for (size_t i = 0; i < g.data.size(); ++i) dx.data[i] += c * g.data[i];
                }
                break;
            }
            case Op::SoftmaxCrossEntropy: {
                Tensor& dl = grad_of(n.inputs[0]);
                float go = g[0];
                int label = n.i0;
                for (int i = 0; i < n.aux.dim(0); ++i)
                    dl[i] += (n.aux[i] - (i == label ? 1.0f : 0.0f)) * go;
                break;
            }
        }
    }

    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (NodeId id : wrt) {
        if (!node(id).requires_grad) fail("gradient requested for non-differentiated node");
        out.push_back(touched[static_cast<size_t>(id)] ? std::move(grads[static_cast<size_t>(id)])
                                                       : Tensor::zeros(value(id).shape));
    }
    return out;
}

}  // namespace admix

#pragma once

// Independent double-precision reimplementation of the model forward pass,
// used as a finite-difference / cross-check oracle in the tests. Kept free
// of any tape machinery on purpose.

#include <algorithm>
#include <cmath>
#include <vector>

#include "admix/model.hpp"

namespace refwd {

inline std::vector<double> ref_logits(const admix::Model& m, const admix::Tensor& x) {
    using admix::LayerSpec;
    std::vector<double> cur(x.data.begin(), x.data.end());
    std::vector<int> shape = m.spec.input_shape;

    for (size_t li = 0; li < m.spec.layers.size(); ++li) {
        const LayerSpec& l = m.spec.layers[li];
        std::string prefix = "layer" + std::to_string(li);
        switch (l.kind) {
            case LayerSpec::Kind::Conv: {
                const admix::Tensor* k = m.weights.find(prefix + ".kernel");
                const admix::Tensor* b = m.weights.find(prefix + ".bias");
                int ci = shape[0], h = shape[1], w = shape[2];
                int ho = (h + 2 * l.pad - l.k) / l.stride + 1;
                int wo = (w + 2 * l.pad - l.k) / l.stride + 1;
                std::vector<double> out(static_cast<size_t>(l.out) * ho * wo);
                for (int o = 0; o < l.out; ++o)
                    for (int oy = 0; oy < ho; ++oy)
                        for (int ox = 0; ox < wo; ++ox) {
                            double acc = (*b)[o];
                            for (int c = 0; c < ci; ++c)
                                for (int ky = 0; ky < l.k; ++ky)
                                    for (int kx = 0; kx < l.k; ++kx) {
                                        int sy = oy * l.stride - l.pad + ky;
                                        int sx = ox * l.stride - l.pad + kx;
                                        if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                                        acc += static_cast<double>(
                                                   (*k)[((o * ci + c) * l.k + ky) * l.k + kx]) *
                                               cur[static_cast<size_t>((c * h + sy) * w + sx)];
                                    }
                            out[static_cast<size_t>((o * ho + oy) * wo + ox)] = acc;
                        }
                cur = std::move(out);
                shape = {l.out, ho, wo};
                break;
            }
            case LayerSpec::Kind::Relu:
                for (double& v : cur) v = std::max(v, 0.0);
                break;
            case LayerSpec::Kind::AvgPool: {
                int c = shape[0], h = shape[1], w = shape[2];
                int ho = h / l.k, wo = w / l.k;
                std::vector<double> out(static_cast<size_t>(c) * ho * wo);
                for (int ch = 0; ch < c; ++ch)
                    for (int oy = 0; oy < ho; ++oy)
                        for (int ox = 0; ox < wo; ++ox) {
                            double acc = 0.0;
                            for (int dy = 0; dy < l.k; ++dy)
                                for (int dx = 0; dx < l.k; ++dx)
                                    acc += cur[static_cast<size_t>(
                                        (ch * h + oy * l.k + dy) * w + ox * l.k + dx)];
                            out[static_cast<size_t>((ch * ho + oy) * wo + ox)] =
                                acc / (static_cast<double>(l.k) * l.k);
                        }
                cur = std::move(out);
                shape = {c, ho, wo};
                break;
            }
            case LayerSpec::Kind::Flatten:
                shape = {static_cast<int>(cur.size())};
                break;
            case LayerSpec::Kind::Dense: {
                const admix::Tensor* wt = m.weights.find(prefix + ".weight");
                const admix::Tensor* b = m.weights.find(prefix + ".bias");
                int in = shape[0];
                std::vector<double> out(static_cast<size_t>(l.out));
                for (int o = 0; o < l.out; ++o) {
                    double acc = (*b)[o];
                    for (int i = 0; i < in; ++i)
                        acc += static_cast<double>((*wt)[o * in + i]) * cur[static_cast<size_t>(i)];
                    out[static_cast<size_t>(o)] = acc;
                }
                cur = std::move(out);
                shape = {l.out};
                break;
            }
        }
    }
    return cur;
}

inline double ref_ce(const std::vector<double>& z, int y) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - mx);
    return -(z[static_cast<size_t>(y)] - mx - std::log(denom));
}

inline double ref_loss(const admix::Model& m, const admix::Tensor& x, int y) {
    return ref_ce(ref_logits(m, x), y);
}

}  // namespace refwd

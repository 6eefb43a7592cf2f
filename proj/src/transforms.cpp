#include "admix/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace admix {

std::vector<float> TransformConfig::gamma_schedule() const {
    validate();
    if (!gamma.empty()) return gamma;
    std::vector<float> g(static_cast<size_t>(m1));
    float v = 1.0f;
    for (int i = 0; i < m1; ++i) {
        g[static_cast<size_t>(i)] = v;
        v *= 0.5f;
    }
    return g;
}

void TransformConfig::validate() const {
    if (m1 < 1) throw TensorError("m1 must be >= 1");
    if (m2 < 0) throw TensorError("m2 must be >= 0");
    if (eta < 0.0f || eta >= 1.0f) throw TensorError("eta must satisfy 0 <= eta < 1");
    if (!gamma.empty() && static_cast<int>(gamma.size()) != m1)
        throw TensorError("gamma schedule length must equal m1");
    for (float g : gamma)
        if (g <= 0.0f || g > 1.0f) throw TensorError("each gamma must lie in (0, 1]");
    if (dim_prob < 0.0f || dim_prob > 1.0f) throw TensorError("dim_prob must lie in [0, 1]");
    if (dim_max_ratio <= 1.0f) throw TensorError("dim_max_ratio must exceed 1");
    if (tim_kernel_size < 1 || tim_kernel_size % 2 == 0)
        throw TensorError("tim_kernel_size must be odd");
}

Tensor admix(const Tensor& x, const Tensor& x2, float gamma, float eta) {
    if (!x.same_shape(x2))
        throw TensorError("admix shape mismatch " + x.shape_str() + " vs " + x2.shape_str());
    if (gamma <= 0.0f || gamma > 1.0f) throw TensorError("gamma must lie in (0, 1]");
    if (eta < 0.0f || eta >= 1.0f) throw TensorError("eta must satisfy 0 <= eta < 1");
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = gamma * (x.data[i] + eta * x2.data[i]);
    return out;
}

std::vector<size_t> sample_other_category_indices(const SamplePool& pool, int y, int m2,
                                                  Rng& rng) {
    if (m2 < 0) throw TensorError("m2 must be >= 0");
    if (m2 == 0) return {};
    std::vector<size_t> eligible;
    for (size_t i = 0; i < pool.labels.size(); ++i)
        if (pool.labels[i] != y) eligible.push_back(i);
    if (eligible.size() < static_cast<size_t>(m2))
        throw TensorError("sample pool has only " + std::to_string(eligible.size()) +
                          " images outside class " + std::to_string(y) + ", need " +
                          std::to_string(m2));
    // Partial Fisher-Yates: without replacement, deterministic per rng state.
    std::vector<size_t> out;
    for (int k = 0; k < m2; ++k) {
        size_t j = static_cast<size_t>(k) +
                   static_cast<size_t>(rng.next_below(eligible.size() - static_cast<size_t>(k)));
        std::swap(eligible[static_cast<size_t>(k)], eligible[j]);
        out.push_back(eligible[static_cast<size_t>(k)]);
    }
    return out;
}

std::vector<Tensor> sample_other_category(const SamplePool& pool, int y, int m2, Rng& rng) {
    std::vector<Tensor> out;
    for (size_t idx : sample_other_category_indices(pool, y, m2, rng))
        out.push_back(pool.images[idx]);
    return out;
}

std::vector<std::pair<Tensor, float>> admix_copies(const Tensor& x,
                                                   const std::vector<Tensor>& others,
                                                   const TransformConfig& cfg) {
    if (others.empty()) throw TensorError("admix_copies needs at least one sampled image");
    std::vector<float> gammas = cfg.gamma_schedule();
    std::vector<std::pair<Tensor, float>> out;
    out.reserve(others.size() * gammas.size());
    for (const Tensor& other : others)
        for (float g : gammas) out.emplace_back(admix(x, other, g, cfg.eta), g);
    return out;
}

std::vector<std::pair<Tensor, float>> sim_copies(const Tensor& x, int m) {
    if (m < 1) throw TensorError("sim_copies needs m >= 1");
    std::vector<std::pair<Tensor, float>> out;
    float g = 1.0f;
    for (int i = 0; i < m; ++i) {
        Tensor t(x.shape);
        for (size_t e = 0; e < x.data.size(); ++e) t.data[e] = g * x.data[e];
        out.emplace_back(std::move(t), g);
        g *= 0.5f;
    }
    return out;
}

DimParams draw_dim_params(int s, float p, float max_ratio, Rng& rng) {
    DimParams params;
    params.s_max = static_cast<int>(std::lround(static_cast<double>(s) * max_ratio));
    if (rng.next_f32() >= p) return params;  // p == 0 never applies
    params.apply = true;
    // r uniform in [S, S_max); degenerate when S_max == S.
    int span = params.s_max - s;
    params.r = s + (span > 0 ? static_cast<int>(rng.next_below(static_cast<uint64_t>(span))) : 0);
    int slack = params.s_max - params.r;
    params.off_y = slack > 0 ? static_cast<int>(rng.next_below(static_cast<uint64_t>(slack + 1))) : 0;
    params.off_x = slack > 0 ? static_cast<int>(rng.next_below(static_cast<uint64_t>(slack + 1))) : 0;
    return params;
}

Tensor apply_dim(const Tensor& x, const DimParams& params) {
    int s = x.dim(1);
    if (!params.apply || params.s_max == s) return x;
    Tensor resized = resize_nearest(x, params.r, params.r);
    Tensor padded = pad_constant(resized, params.off_y, params.s_max - params.r - params.off_y,
                                 params.off_x, params.s_max - params.r - params.off_x, 0.0f);
    return resize_nearest(padded, s, s);
}

Tensor dim_transform(const Tensor& x, float p, float max_ratio, Rng& rng) {
    if (p < 0.0f || p > 1.0f) throw TensorError("dim probability must lie in [0, 1]");
    return apply_dim(x, draw_dim_params(x.dim(1), p, max_ratio, rng));
}

Tensor tim_kernel(int k, float sigma_span) {
    if (k < 1 || k % 2 == 0) throw TensorError("tim kernel size must be odd, got " + std::to_string(k));
    std::vector<double> g(static_cast<size_t>(k));
    if (k == 1) {
        g[0] = 1.0;
    } else {
        for (int i = 0; i < k; ++i) {
            double t = -sigma_span + 2.0 * sigma_span * i / (k - 1);
            g[static_cast<size_t>(i)] = std::exp(-0.5 * t * t);
        }
    }
    double total = 0.0;
    for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) total += g[static_cast<size_t>(y)] * g[static_cast<size_t>(x)];
    Tensor out({k, k});
    for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x)
            out[y * k + x] =
                static_cast<float>(g[static_cast<size_t>(y)] * g[static_cast<size_t>(x)] / total);
    return out;
}

std::pair<Tensor, SoftLabel> mixup_blend(const Tensor& x, int y, const Tensor& x2, int y2,
                                         float lambda) {
    if (!x.same_shape(x2))
        throw TensorError("mixup shape mismatch " + x.shape_str() + " vs " + x2.shape_str());
    if (lambda < 0.0f || lambda > 1.0f) throw TensorError("lambda must lie in [0, 1]");
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = lambda * x.data[i] + (1.0f - lambda) * x2.data[i];
    SoftLabel label;
    if (lambda == 1.0f) {
        label.terms = {{y, 1.0f}};
    } else if (lambda == 0.0f) {
        label.terms = {{y2, 1.0f}};
    } else {
        label.terms = {{y, lambda}, {y2, 1.0f - lambda}};
    }
    return {std::move(out), std::move(label)};
}

Tensor cutmix_blend(const Tensor& x, const Tensor& x2, float lambda, Rng& rng, Tensor* mask_out) {
    if (!x.same_shape(x2))
        throw TensorError("cutmix shape mismatch " + x.shape_str() + " vs " + x2.shape_str());
    if (lambda < 0.0f || lambda > 1.0f) throw TensorError("lambda must lie in [0, 1]");
    int s = x.dim(1);
    int side = static_cast<int>(std::lround(s * std::sqrt(1.0 - static_cast<double>(lambda))));
    side = std::min(side, s);
    Tensor mask = Tensor::full(x.shape, 1.0f);
    Tensor out = x;
    if (side > 0) {
        int y0 = static_cast<int>(rng.next_below(static_cast<uint64_t>(s - side + 1)));
        int x0 = static_cast<int>(rng.next_below(static_cast<uint64_t>(s - side + 1)));
        for (int c = 0; c < x.dim(0); ++c)
            for (int yy = y0; yy < y0 + side; ++yy)
                for (int xx = x0; xx < x0 + side; ++xx) {
                    out.at3(c, yy, xx) = x2.at3(c, yy, xx);
                    mask.at3(c, yy, xx) = 0.0f;
                }
    }
    if (mask_out) *mask_out = std::move(mask);
    return out;
}

}  // namespace admix

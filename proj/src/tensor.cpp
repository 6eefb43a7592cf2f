#include "admix/tensor.hpp"

#include <cmath>
#include <sstream>

namespace admix {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw TensorError("non-positive dimension " + std::to_string(d));
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
}

Tensor::Tensor(std::vector<int> shp, std::vector<float> values)
    : shape(std::move(shp)), data(std::move(values)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
        throw TensorError("data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<int> shp) { return Tensor(std::move(shp)); }

Tensor Tensor::full(std::vector<int> shp, float v) {
    Tensor t(std::move(shp));
    for (auto& e : t.data) e = v;
    return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

float& Tensor::at3(int c, int y, int x) {
    return data[static_cast<size_t>((static_cast<int64_t>(c) * shape[1] + y) * shape[2] + x)];
}

float Tensor::at3(int c, int y, int x) const {
    return data[static_cast<size_t>((static_cast<int64_t>(c) * shape[1] + y) * shape[2] + x)];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void Tensor::check_finite(const char* what) const {
    for (float v : data)
        if (!std::isfinite(v))
            throw TensorError(std::string(what) + " produced a non-finite value");
}

float l1_norm(const Tensor& g) {
    double s = 0.0;
    for (float v : g.data) s += std::fabs(static_cast<double>(v));
    return static_cast<float>(s);
}

Tensor l1_normalize(const Tensor& g) {
    float n = l1_norm(g);
    if (n == 0.0f) throw TensorError("zero gradient");
    Tensor out(g.shape);
    for (size_t i = 0; i < g.data.size(); ++i) out.data[i] = g.data[i] / n;
    return out;
}

Tensor sign(const Tensor& g) {
    Tensor out(g.shape);
    for (size_t i = 0; i < g.data.size(); ++i) {
        float v = g.data[i];
        out.data[i] = v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f);
    }
    return out;
}

Tensor clip(const Tensor& x, float lo, float hi) {
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        float v = x.data[i];
        out.data[i] = v < lo ? lo : (v > hi ? hi : v);
    }
    return out;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw TensorError("shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    float m = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

Tensor resize_nearest(const Tensor& x, int h2, int w2) {
    if (x.rank() != 3) throw TensorError("resize_nearest expects CHW, got " + x.shape_str());
    if (h2 < 1 || w2 < 1) throw TensorError("resize_nearest target must be >= 1");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h2, w2});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h2; ++y) {
            int sy = static_cast<int>(static_cast<int64_t>(y) * h / h2);
            for (int xx = 0; xx < w2; ++xx) {
                int sx = static_cast<int>(static_cast<int64_t>(xx) * w / w2);
                out.at3(ch, y, xx) = x.at3(ch, sy, sx);
            }
        }
    return out;
}

Tensor pad_constant(const Tensor& x, int top, int bottom, int left, int right, float value) {
    if (x.rank() != 3) throw TensorError("pad_constant expects CHW, got " + x.shape_str());
    if (top < 0 || bottom < 0 || left < 0 || right < 0)
        throw TensorError("pad_constant amounts must be >= 0");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = Tensor::full({c, h + top + bottom, w + left + right}, value);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                out.at3(ch, y + top, xx + left) = x.at3(ch, y, xx);
    return out;
}

Tensor cross_correlate_2d(const Tensor& g, const Tensor& kernel) {
    if (g.rank() != 3) throw TensorError("cross_correlate_2d expects CHW, got " + g.shape_str());
    if (kernel.rank() != 2) throw TensorError("kernel must be 2-D, got " + kernel.shape_str());
    int kh = kernel.dim(0), kw = kernel.dim(1);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw TensorError("kernel dimensions must be odd, got " + kernel.shape_str());
    int c = g.dim(0), h = g.dim(1), w = g.dim(2);
    int py = (kh - 1) / 2, px = (kw - 1) / 2;
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                double acc = 0.0;
                for (int ky = 0; ky < kh; ++ky) {
                    int sy = y + ky - py;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        int sx = xx + kx - px;
                        if (sx < 0 || sx >= w) continue;
                        acc += static_cast<double>(g.at3(ch, sy, sx)) * kernel[ky * kw + kx];
                    }
                }
                out.at3(ch, y, xx) = static_cast<float>(acc);
            }
    return out;
}

}  // namespace admix

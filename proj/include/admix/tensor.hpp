#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace admix {

// Dense row-major float32 tensor. Pixel tensors carry values in [0,1];
// everything else (gradients, logits, weights) is unitless.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shp);
    Tensor(std::vector<int> shp, std::vector<float> values);

    static Tensor zeros(std::vector<int> shp);
    static Tensor full(std::vector<int> shp, float v);

    int64_t numel() const;
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // CHW indexing for rank-3 tensors.
    float& at3(int c, int y, int x);
    float at3(int c, int y, int x) const;

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    // Throws if any element is NaN/Inf. `what` names the producing operation.
    void check_finite(const char* what) const;
};

int64_t shape_numel(const std::vector<int>& shape);

// ---- elementwise / reduction helpers (pure, non-tape) ----

// g / ||g||_1. Throws TensorError("zero gradient") on the zero tensor.
Tensor l1_normalize(const Tensor& g);
float l1_norm(const Tensor& g);

// Elementwise sign with sign(0) = 0.
Tensor sign(const Tensor& g);

// Elementwise clamp to [lo, hi].
Tensor clip(const Tensor& x, float lo, float hi);

float max_abs_diff(const Tensor& a, const Tensor& b);

// ---- image-shaped helpers (rank-3, CHW) ----

// Nearest-neighbour resize, source index floor(i*H/H2).
Tensor resize_nearest(const Tensor& x, int h2, int w2);

Tensor pad_constant(const Tensor& x, int top, int bottom, int left, int right,
                    float value);

// Per-channel same-size cross-correlation with an odd kernel, zero border.
Tensor cross_correlate_2d(const Tensor& g, const Tensor& kernel);

// Structured-error type used across the toolkit.
struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace admix

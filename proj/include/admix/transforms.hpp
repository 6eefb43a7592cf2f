#pragma once

#include <utility>
#include <vector>

#include "admix/rng.hpp"
#include "admix/tensor.hpp"

namespace admix {

struct TransformConfig {
    int m1 = 5;                       // scaled/admixed copies per sampled image
    int m2 = 3;                       // sampled images per iteration
    float eta = 0.2f;                 // admix strength, must satisfy 0 <= eta < 1
    std::vector<float> gamma;         // defaults to 1/2^i, i = 0..m1-1
    float dim_prob = 0.5f;            // p
    float dim_max_ratio = 330.0f / 299.0f;  // S_max / S
    int tim_kernel_size = 7;
    float tim_sigma_span = 3.0f;

    std::vector<float> gamma_schedule() const;  // validated, length m1
    void validate() const;
};

// Images available for sampling secondary inputs from other categories.
struct SamplePool {
    std::vector<Tensor> images;
    std::vector<int> labels;
};

// gamma * (x + eta * x2). Output deliberately not clipped to [0,1]; it
// feeds the network, not an image file.
Tensor admix(const Tensor& x, const Tensor& x2, float gamma, float eta);

// m2 images drawn uniformly without replacement from entries whose label
// differs from y.
std::vector<Tensor> sample_other_category(const SamplePool& pool, int y, int m2, Rng& rng);

// Index form of the same draw (identical rng consumption).
std::vector<size_t> sample_other_category_indices(const SamplePool& pool, int y, int m2, Rng& rng);

// The m1*m2 pairs (gamma_i * (x + eta * x'_j), gamma_i), j outer, i inner.
std::vector<std::pair<Tensor, float>> admix_copies(const Tensor& x,
                                                   const std::vector<Tensor>& others,
                                                   const TransformConfig& cfg);

// [(x / 2^i, 1 / 2^i)] for i in [0, m).
std::vector<std::pair<Tensor, float>> sim_copies(const Tensor& x, int m);

// Geometry drawn for one diverse-input transform application.
struct DimParams {
    bool apply = false;
    int r = 0;       // intermediate size
    int s_max = 0;   // padded size
    int off_y = 0, off_x = 0;
};

DimParams draw_dim_params(int s, float p, float max_ratio, Rng& rng);

// Resize to r x r, zero-pad to S_max x S_max at the drawn offset, resize
// back to S x S. Identity when params.apply is false or S_max == S.
Tensor apply_dim(const Tensor& x, const DimParams& params);
Tensor dim_transform(const Tensor& x, float p, float max_ratio, Rng& rng);

// Normalized Gaussian outer-product kernel sampled on [-span, span]
// standard deviations; entries sum to 1.
Tensor tim_kernel(int k, float sigma_span);

// lambda*x + (1-lambda)*x2 with weighted label pairs.
struct SoftLabel {
    std::vector<std::pair<int, float>> terms;
};
std::pair<Tensor, SoftLabel> mixup_blend(const Tensor& x, int y, const Tensor& x2, int y2,
                                         float lambda);

// Square patch of side round(S*sqrt(1-lambda)) at a uniform location
// replaced by x2's pixels. mask_out, when given, receives 1 where the
// output keeps x and 0 where it takes x2.
Tensor cutmix_blend(const Tensor& x, const Tensor& x2, float lambda, Rng& rng,
                    Tensor* mask_out = nullptr);

}  // namespace admix

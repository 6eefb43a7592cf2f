#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "admix/model.hpp"
#include "admix/transforms.hpp"

namespace admix {

enum class TransformKind {
    None,
    Dim,
    Tim,
    Sim,
    Admix,
    Mixup,
    MixupWlm,
    AdmixLm,
    Cutmix,
};

TransformKind transform_from_name(const std::string& name);
std::string transform_name(TransformKind kind);

struct AttackConfig {
    float epsilon = 16.0f / 255.0f;  // L-inf budget in [0,1] pixel units
    int iters = 10;                  // T
    float alpha = 0.0f;              // step size; <= 0 means epsilon / T
    float mu = 1.0f;                 // momentum decay
    TransformKind transform = TransformKind::None;
    bool use_dim = false;
    bool use_tim = false;
    TransformConfig tcfg;
    uint64_t seed = 0;

    float step() const { return alpha > 0.0f ? alpha : epsilon / static_cast<float>(iters); }
    bool dim_active() const { return use_dim || transform == TransformKind::Dim; }
    bool tim_active() const { return use_tim || transform == TransformKind::Tim; }
    void validate() const;
};

struct AdversaryResult {
    Tensor x_adv;
    int iterations_run = 0;
    float linf = 0.0f;
    bool surrogate_fooled = false;
    bool zero_gradient_seen = false;
};

// Non-owning model list with fusion weights (equal by default).
struct Ensemble {
    std::vector<const Model*> models;
    std::vector<float> weights;

    static Ensemble of(const Model& m) { return {{&m}, {1.0f}}; }
    static Ensemble equal(const std::vector<const Model*>& ms);
    void validate() const;
};

// Logits of sum_i w_i * logits_i(x).
Tensor ensemble_logits(const Ensemble& ens, const Tensor& x);
int ensemble_predict(const Ensemble& ens, const Tensor& x);

// Mean input gradient over the transform's copies, differentiated through
// the transform; smoothed with the Gaussian kernel when TIM is active.
// `pool` is required for admix/mixup/cutmix family transforms.
Tensor aggregate_gradient(const Ensemble& ens, const Tensor& x, int y, const AttackConfig& cfg,
                          const SamplePool* pool, Rng& rng);

// Gradient of softmax cross-entropy on fused logits (no transform).
Tensor ensemble_grad(const std::vector<const Model*>& models, const std::vector<float>& weights,
                     const Tensor& x, int y);

// Iterated signed-gradient loop with momentum; all attacks below reduce
// to it. One rng stream drives every random draw, so runs are
// reproducible from cfg.seed.
AdversaryResult run_attack(const Ensemble& ens, const Tensor& x, int y, const AttackConfig& cfg,
                           const SamplePool* pool = nullptr);

AdversaryResult fgsm(const Model& model, const Tensor& x, int y, AttackConfig cfg);
AdversaryResult ifgsm(const Model& model, const Tensor& x, int y, AttackConfig cfg);
AdversaryResult mifgsm(const Model& model, const Tensor& x, int y, const AttackConfig& cfg,
                       const SamplePool* pool = nullptr);
AdversaryResult admix_attack(const Ensemble& ens, const Tensor& x, int y, AttackConfig cfg,
                             const SamplePool& pool);

}  // namespace admix

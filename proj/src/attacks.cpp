#include "admix/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace admix {

TransformKind transform_from_name(const std::string& name) {
    if (name == "fgsm" || name == "ifgsm" || name == "mifgsm" || name == "none")
        return TransformKind::None;
    if (name == "dim") return TransformKind::Dim;
    if (name == "tim") return TransformKind::Tim;
    if (name == "sim") return TransformKind::Sim;
    if (name == "admix") return TransformKind::Admix;
    if (name == "mixup") return TransformKind::Mixup;
    if (name == "mixup-wlm") return TransformKind::MixupWlm;
    if (name == "admix-lm") return TransformKind::AdmixLm;
    if (name == "cutmix") return TransformKind::Cutmix;
    throw TensorError("unknown transform '" + name + "'");
}

std::string transform_name(TransformKind kind) {
    switch (kind) {
        case TransformKind::None: return "none";
        case TransformKind::Dim: return "dim";
        case TransformKind::Tim: return "tim";
        case TransformKind::Sim: return "sim";
        case TransformKind::Admix: return "admix";
        case TransformKind::Mixup: return "mixup";
        case TransformKind::MixupWlm: return "mixup-wlm";
        case TransformKind::AdmixLm: return "admix-lm";
        case TransformKind::Cutmix: return "cutmix";
    }
    return "?";
}

void AttackConfig::validate() const {
    // epsilon == 0 is allowed and makes every attack the identity.
    if (epsilon < 0.0f) throw TensorError("epsilon must be >= 0");
    if (iters < 1) throw TensorError("iteration count must be >= 1");
    if (step() < 0.0f) throw TensorError("step size must be >= 0");
    if (mu < 0.0f) throw TensorError("momentum decay must be >= 0");
    tcfg.validate();
}

Ensemble Ensemble::equal(const std::vector<const Model*>& ms) {
    Ensemble e;
    e.models = ms;
    e.weights.assign(ms.size(), 1.0f / static_cast<float>(ms.size()));
    return e;
}

void Ensemble::validate() const {
    if (models.empty()) throw TensorError("ensemble needs at least one model");
    if (models.size() != weights.size())
        throw TensorError("ensemble model/weight count mismatch");
    float s = 0.0f;
    for (float w : weights) s += w;
    if (std::fabs(s - 1.0f) > 1e-4f)
        throw TensorError("ensemble weights must sum to 1, got " + std::to_string(s));
    for (const Model* m : models)
        if (m->spec.input_shape != models[0]->spec.input_shape)
            throw TensorError("ensemble members disagree on input shape");
}

namespace {

// One forward copy of the transformed input with its loss label weights.
struct CopyPlan {
    float gamma = 1.0f;              // scale coefficient on x
    const Tensor* constant = nullptr;  // added constant (gamma*eta*x'), optional
    Tensor constant_storage;
    const Tensor* blend_other = nullptr;  // cutmix source
    Tensor mask;                          // cutmix keep-mask
    std::vector<std::pair<int, float>> labels;  // (class, loss weight)
    DimParams dim;
};

Tensor copy_gradient(const Ensemble& ens, const Tensor& x, const CopyPlan& plan) {
    Tape tape;
    NodeId in = tape.input(x, true);
    NodeId cur = in;
    if (plan.blend_other) {
        cur = tape.mask_blend(cur, *plan.blend_other, plan.mask);
    } else if (plan.constant) {
        cur = tape.affine_const(cur, plan.gamma, *plan.constant);
    } else if (plan.gamma != 1.0f) {
        cur = tape.scale(cur, plan.gamma);
    }
    if (plan.dim.apply) {
        int s = x.dim(1);
        if (plan.dim.s_max != s) {
            cur = tape.resize_nearest(cur, plan.dim.r, plan.dim.r);
            cur = tape.pad_constant(cur, plan.dim.off_y, plan.dim.s_max - plan.dim.r - plan.dim.off_y,
                                    plan.dim.off_x, plan.dim.s_max - plan.dim.r - plan.dim.off_x,
                                    0.0f);
            cur = tape.resize_nearest(cur, s, s);
        }
    }

    std::vector<NodeId> logit_nodes;
    for (const Model* m : ens.models) logit_nodes.push_back(build_forward(tape, *m, cur, false));
    NodeId fused = ens.models.size() == 1 ? logit_nodes[0]
                                          : tape.add_weighted(logit_nodes, ens.weights);

    NodeId loss;
    if (plan.labels.size() == 1 && plan.labels[0].second == 1.0f) {
        loss = tape.softmax_cross_entropy(fused, plan.labels[0].first);
    } else {
        std::vector<NodeId> terms;
        std::vector<float> coeffs;
        for (const auto& [cls, w] : plan.labels) {
            terms.push_back(tape.softmax_cross_entropy(fused, cls));
            coeffs.push_back(w);
        }
        loss = tape.add_weighted(terms, coeffs);
    }
    return std::move(tape.gradients(loss, {in})[0]);
}

std::vector<CopyPlan> build_copy_plans(const Tensor& x, int y, const AttackConfig& cfg,
                                       const SamplePool* pool, Rng& rng) {
    std::vector<CopyPlan> plans;
    auto need_pool = [&]() {
        if (!pool) throw TensorError("transform '" + transform_name(cfg.transform) +
                                     "' requires a sample pool");
    };
    switch (cfg.transform) {
        case TransformKind::None:
        case TransformKind::Dim:
        case TransformKind::Tim: {
            CopyPlan p;
            p.labels = {{y, 1.0f}};
            plans.push_back(std::move(p));
            break;
        }
        case TransformKind::Sim: {
            std::vector<float> gammas = cfg.tcfg.gamma_schedule();
            for (float g : gammas) {
                CopyPlan p;
                p.gamma = g;
                p.labels = {{y, 1.0f}};
                plans.push_back(std::move(p));
            }
            break;
        }
        case TransformKind::Admix:
        case TransformKind::AdmixLm: {
            need_pool();
            if (cfg.tcfg.m2 < 1) throw TensorError("admix requires m2 >= 1");
            std::vector<size_t> others =
                sample_other_category_indices(*pool, y, cfg.tcfg.m2, rng);
            std::vector<float> gammas = cfg.tcfg.gamma_schedule();
            float eta = cfg.tcfg.eta;
            for (size_t j : others) {
                const Tensor& xp = pool->images[j];
                for (float g : gammas) {
                    CopyPlan p;
                    p.gamma = g;
                    p.constant_storage = Tensor(x.shape);
                    float c = g * eta;
                    for (size_t e = 0; e < xp.data.size(); ++e)
                        p.constant_storage.data[e] = c * xp.data[e];
                    p.constant = &p.constant_storage;
                    if (cfg.transform == TransformKind::AdmixLm && eta > 0.0f) {
                        // Label weights (1, eta)/(1+eta): proportional to the
                        // pixel mass each source contributes to the blended input.
                        p.labels = {{y, 1.0f / (1.0f + eta)},
                                    {pool->labels[j], eta / (1.0f + eta)}};
                    } else {
                        p.labels = {{y, 1.0f}};
                    }
                    plans.push_back(std::move(p));
                }
            }
            break;
        }
        case TransformKind::Mixup:
        case TransformKind::MixupWlm: {
            need_pool();
            std::vector<size_t> others = sample_other_category_indices(*pool, y, 1, rng);
            float lambda = rng.next_f32();
            const Tensor& xp = pool->images[others[0]];
            CopyPlan p;
            p.gamma = lambda;
            p.constant_storage = Tensor(x.shape);
            for (size_t e = 0; e < xp.data.size(); ++e)
                p.constant_storage.data[e] = (1.0f - lambda) * xp.data[e];
            p.constant = &p.constant_storage;
            if (cfg.transform == TransformKind::Mixup && lambda < 1.0f) {
                p.labels = {{y, lambda}, {pool->labels[others[0]], 1.0f - lambda}};
            } else {
                p.labels = {{y, 1.0f}};
            }
            plans.push_back(std::move(p));
            break;
        }
        case TransformKind::Cutmix: {
            need_pool();
            std::vector<size_t> others = sample_other_category_indices(*pool, y, 1, rng);
            float lambda = rng.next_f32();
            CopyPlan p;
            cutmix_blend(x, pool->images[others[0]], lambda, rng, &p.mask);
            p.blend_other = &pool->images[others[0]];
            p.labels = {{y, 1.0f}};
            plans.push_back(std::move(p));
            break;
        }
    }
    if (cfg.dim_active()) {
        int s = x.dim(1);
        for (CopyPlan& p : plans)
            p.dim = draw_dim_params(s, cfg.tcfg.dim_prob, cfg.tcfg.dim_max_ratio, rng);
    }
    return plans;
}

}  // namespace

Tensor ensemble_logits(const Ensemble& ens, const Tensor& x) {
    ens.validate();
    Tape tape;
    NodeId in = tape.input(x, false);
    std::vector<NodeId> logits;
    for (const Model* m : ens.models) logits.push_back(build_forward(tape, *m, in, false));
    NodeId fused = ens.models.size() == 1 ? logits[0] : tape.add_weighted(logits, ens.weights);
    return tape.value(fused);
}

int ensemble_predict(const Ensemble& ens, const Tensor& x) {
    Tensor logits = ensemble_logits(ens, x);
    int best = 0;
    for (int i = 1; i < logits.dim(0); ++i)
        if (logits[i] > logits[best]) best = i;
    return best;
}

Tensor aggregate_gradient(const Ensemble& ens, const Tensor& x, int y, const AttackConfig& cfg,
                          const SamplePool* pool, Rng& rng) {
    ens.validate();
    std::vector<CopyPlan> plans = build_copy_plans(x, y, cfg, pool, rng);
    // Fix up self-referencing pointers after vector moves.
    for (CopyPlan& p : plans)
        if (p.constant) p.constant = &p.constant_storage;

    std::vector<double> acc(static_cast<size_t>(x.numel()), 0.0);
    for (const CopyPlan& p : plans) {
        Tensor g = copy_gradient(ens, x, p);
        for (size_t e = 0; e < g.data.size(); ++e) acc[e] += static_cast<double>(g.data[e]);
    }
    double inv = 1.0 / static_cast<double>(plans.size());
    Tensor mean(x.shape);
    for (size_t e = 0; e < acc.size(); ++e) mean.data[e] = static_cast<float>(acc[e] * inv);

    if (cfg.tim_active())
        mean = cross_correlate_2d(mean, tim_kernel(cfg.tcfg.tim_kernel_size,
                                                   cfg.tcfg.tim_sigma_span));
    mean.check_finite("aggregate_gradient");
    return mean;
}

Tensor ensemble_grad(const std::vector<const Model*>& models, const std::vector<float>& weights,
                     const Tensor& x, int y) {
    Ensemble ens{models, weights};
    AttackConfig cfg;
    Rng rng(0);
    return aggregate_gradient(ens, x, y, cfg, nullptr, rng);
}

AdversaryResult run_attack(const Ensemble& ens, const Tensor& x, int y, const AttackConfig& cfg,
                           const SamplePool* pool) {
    cfg.validate();
    ens.validate();
    float eps = cfg.epsilon;
    float alpha = cfg.step();
    Rng rng(cfg.seed);

    AdversaryResult res;
    res.x_adv = x;
    Tensor momentum = Tensor::zeros(x.shape);
    for (int t = 0; t < cfg.iters; ++t) {
        Tensor gbar = aggregate_gradient(ens, res.x_adv, y, cfg, pool, rng);
        float n1 = l1_norm(gbar);
        if (n1 == 0.0f) {
            // Momentum is reused without a new contribution.
            res.zero_gradient_seen = true;
            for (auto& v : momentum.data) v *= cfg.mu;
        } else {
            for (size_t e = 0; e < momentum.data.size(); ++e)
                momentum.data[e] = cfg.mu * momentum.data[e] + gbar.data[e] / n1;
        }
        for (size_t e = 0; e < res.x_adv.data.size(); ++e) {
            float m = momentum.data[e];
            float step = m > 0.0f ? alpha : (m < 0.0f ? -alpha : 0.0f);
            float v = res.x_adv.data[e] + step;
            v = std::clamp(v, x.data[e] - eps, x.data[e] + eps);
            res.x_adv.data[e] = std::clamp(v, 0.0f, 1.0f);
        }
        ++res.iterations_run;
    }
    res.linf = max_abs_diff(res.x_adv, x);
    res.surrogate_fooled = ensemble_predict(ens, res.x_adv) != y;
    res.x_adv.check_finite("run_attack");
    return res;
}

AdversaryResult fgsm(const Model& model, const Tensor& x, int y, AttackConfig cfg) {
    cfg.iters = 1;
    cfg.alpha = cfg.epsilon;
    cfg.mu = 0.0f;
    cfg.transform = TransformKind::None;
    return run_attack(Ensemble::of(model), x, y, cfg);
}

AdversaryResult ifgsm(const Model& model, const Tensor& x, int y, AttackConfig cfg) {
    cfg.mu = 0.0f;
    cfg.transform = TransformKind::None;
    return run_attack(Ensemble::of(model), x, y, cfg);
}

AdversaryResult mifgsm(const Model& model, const Tensor& x, int y, const AttackConfig& cfg,
                       const SamplePool* pool) {
    return run_attack(Ensemble::of(model), x, y, cfg, pool);
}

AdversaryResult admix_attack(const Ensemble& ens, const Tensor& x, int y, AttackConfig cfg,
                             const SamplePool& pool) {
    cfg.transform = TransformKind::Admix;
    cfg.alpha = 0.0f;  // canonical recipe: alpha = epsilon / T
    return run_attack(ens, x, y, cfg, &pool);
}

}  // namespace admix

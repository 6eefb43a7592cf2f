#include "admix/train.hpp"

#include <algorithm>

#include "admix/rng.hpp"

namespace admix {

void train(Model& model, const Dataset& ds, const TrainOptions& opt, size_t first, size_t count) {
    size_t n = std::min(count, ds.size() > first ? ds.size() - first : 0);
    if (n == 0) throw TensorError("empty training set");
    for (size_t i = 0; i < n; ++i)
        if (ds.labels[first + i] < 0 || ds.labels[first + i] >= model.spec.num_classes)
            throw TensorError("label " + std::to_string(ds.labels[first + i]) +
                              " out of range for " + std::to_string(model.spec.num_classes) +
                              " classes");

    Rng rng(opt.seed);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = first + i;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        // Fisher-Yates with the splitmix stream; fixed order per (seed, epoch).
        for (size_t i = n - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(rng.next_below(i + 1));
            std::swap(order[i], order[j]);
        }
        for (size_t start = 0; start < n; start += static_cast<size_t>(opt.batch)) {
            size_t bsz = std::min(static_cast<size_t>(opt.batch), n - start);
            std::vector<Tensor> grad_sum;
            for (size_t b = 0; b < bsz; ++b) {
                size_t idx = order[start + b];
                Tape tape;
                NodeId in = tape.input(ds.images[idx], false);
                std::vector<NodeId> wnodes;
                NodeId logits = build_forward(tape, model, in, true, &wnodes);
                NodeId loss = tape.softmax_cross_entropy(logits, ds.labels[idx]);
                std::vector<Tensor> grads = tape.gradients(loss, wnodes);
                if (grad_sum.empty()) {
                    grad_sum = std::move(grads);
                } else {
                    for (size_t g = 0; g < grads.size(); ++g)
                        for (size_t e = 0; e < grads[g].data.size(); ++e)
                            grad_sum[g].data[e] += grads[g].data[e];
                }
            }
            float scale = opt.lr / static_cast<float>(bsz);
            for (size_t g = 0; g < grad_sum.size(); ++g) {
                Tensor& w = model.weights.tensors[g].second;
                for (size_t e = 0; e < w.data.size(); ++e)
                    w.data[e] -= scale * grad_sum[g].data[e];
            }
        }
    }
    for (const auto& [name, t] : model.weights.tensors) t.check_finite("train");
}

float accuracy(const Model& model, const Dataset& ds, size_t first, size_t count) {
    size_t n = std::min(count, ds.size() > first ? ds.size() - first : 0);
    if (n == 0) throw TensorError("empty evaluation set");
    size_t correct = 0;
    for (size_t i = 0; i < n; ++i)
        if (predict(model, ds.images[first + i]) == ds.labels[first + i]) ++correct;
    return static_cast<float>(correct) / static_cast<float>(n);
}

}  // namespace admix

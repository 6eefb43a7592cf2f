#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "admix/rng.hpp"
#include "admix/tape.hpp"
#include "admix/tensor.hpp"

namespace admix {

// Layer descriptors chain-check statically: see ModelSpec::output_shapes().
struct LayerSpec {
    enum class Kind { Conv, Relu, AvgPool, Flatten, Dense };
    Kind kind;
    int out = 0;     // conv out channels / dense out features
    int k = 0;       // conv kernel size / pool window
    int stride = 1;  // conv only
    int pad = 0;     // conv only
};

struct ModelSpec {
    std::vector<int> input_shape;  // {C, H, W}
    std::vector<LayerSpec> layers;
    int num_classes = 0;

    // Shape after each layer; throws if the chain is inconsistent or the
    // final layer does not emit num_classes logits.
    std::vector<std::vector<int>> output_shapes() const;

    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);

    // Built-in reference architectures ("net-a", "net-b").
    static ModelSpec builtin(const std::string& name);
};

struct Weights {
    // Named tensors in deterministic order, e.g. "layer0.kernel".
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
};

// Uniform [-s, s] with s = sqrt(1/fan_in), drawn from a splitmix stream.
Weights init_weights(const ModelSpec& spec, uint64_t seed);

struct Model {
    ModelSpec spec;
    Weights weights;
};

// Builds the forward graph on `tape` from an existing input node; returns
// the logits node. `trainable` controls whether weight nodes are
// differentiated.
NodeId build_forward(Tape& tape, const Model& model, NodeId input, bool trainable,
                     std::vector<NodeId>* weight_nodes = nullptr);

Tensor forward_logits(const Model& model, const Tensor& x);
int predict(const Model& model, const Tensor& x);

// Softmax cross-entropy at label y and its exact input gradient.
std::pair<float, Tensor> loss_input_grad(const Model& model, const Tensor& x, int y);

// Checkpoint file: magic "ADMW", version u32=1, u32-length-prefixed spec
// JSON line, then per tensor: name length u32, name bytes, rank u32,
// dims u32 x rank, payload f32 x prod(dims). Little-endian throughout.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace admix

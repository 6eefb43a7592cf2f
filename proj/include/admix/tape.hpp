#pragma once

#include <vector>

#include "admix/tensor.hpp"

namespace admix {

using NodeId = int;

// Reverse-mode autodiff over a linear tape. Nodes are appended in
// topological order; one reverse sweep visits each node once. A single
// tape is built and swept single-threaded; independent tapes may run in
// parallel.
class Tape {
public:
    enum class Op {
        Input,
        Conv2d,
        Dense,
        Relu,
        AvgPool2d,
        Flatten,
        Sum,
        Scale,
        AffineConst,
        MaskBlend,
        ResizeNearest,
        PadConstant,
        AddWeighted,
        SoftmaxCrossEntropy,
    };

    NodeId input(Tensor v, bool requires_grad);

    // Cross-correlation with zero padding. x: [Cin,H,W], kernels:
    // [Cout,Cin,kH,kW], bias: [Cout] or -1 for none.
    NodeId conv2d(NodeId x, NodeId kernels, NodeId bias, int stride, int padding);

    // weight [M,N] * x [N] + bias [M].
    NodeId dense(NodeId x, NodeId weight, NodeId bias);

    NodeId relu(NodeId x);
    NodeId avgpool2d(NodeId x, int k);
    NodeId flatten(NodeId x);
    NodeId sum(NodeId x);

    // a * x.
    NodeId scale(NodeId x, float a);

    // a * x + c with c a constant tensor (not differentiated through).
    NodeId affine_const(NodeId x, float a, const Tensor& c);

    // out[i] = mask[i] != 0 ? x[i] : other[i]; other is constant.
    NodeId mask_blend(NodeId x, const Tensor& other, const Tensor& mask);

    NodeId resize_nearest(NodeId x, int h2, int w2);
    NodeId pad_constant(NodeId x, int top, int bottom, int left, int right, float value);

    // sum_i coeffs[i] * terms[i]; all terms share one shape.
    NodeId add_weighted(const std::vector<NodeId>& terms, const std::vector<float>& coeffs);

    // -log softmax(logits)[label], max-subtraction stabilized; scalar output.
    NodeId softmax_cross_entropy(NodeId logits, int label);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    float scalar(NodeId id) const;

    // Reverse sweep from a scalar loss; returns dLoss/dNode for each
    // requested node. Requested nodes must have requires_grad set.
    std::vector<Tensor> gradients(NodeId loss, const std::vector<NodeId>& wrt);

private:
    struct Node {
        Op op;
        Tensor value;
        std::vector<NodeId> inputs;
        bool requires_grad = false;
        int i0 = 0, i1 = 0, i2 = 0, i3 = 0;  // op-specific ints (stride, pad, k, label, ...)
        float f0 = 0.0f;                     // op-specific scalar (scale factor, pad value)
        std::vector<float> coeffs;           // add_weighted coefficients / blend mask
        Tensor aux;                          // const operand or saved softmax probs
    };

    NodeId push(Node n);
    const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }

    std::vector<Node> nodes_;
};

}  // namespace admix

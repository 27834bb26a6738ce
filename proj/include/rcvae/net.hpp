#pragma once

#include <vector>

#include "rcvae/matrix.hpp"
#include "rcvae/rng.hpp"

namespace rcvae {

enum class Activation { ReLU, Sigmoid, Identity };

const char* activation_name(Activation a);

// One fully connected layer: activation(W * input + b), bias broadcast per
// batch column. Activation is fixed at construction.
struct AffineLayer {
    Matrix weight;  // out x in
    Matrix bias;    // out x 1
    Activation activation = Activation::Identity;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
};

AffineLayer make_affine(std::size_t out, std::size_t in, Activation act);

// Uniform init in +-sqrt(6 / (in + out)); bias zero.
void glorot_init(AffineLayer& layer, Rng& rng);

// input: in x batch -> out x batch. Throws DimensionError on mismatch,
// NumericError if the result is not finite.
Matrix affine_forward(const AffineLayer& layer, const Matrix& input);

// Recorded forward pass over a sequential stack. One backward per forward.
struct StackTape {
    Matrix input;
    std::vector<Matrix> post;  // activation output of each layer
    bool recorded = false;
    bool consumed = false;
};

// Runs the stack on input. If tape is given, records for backward.
// skip_layer (1-based; 0 = none) bypasses that layer, passing its input to
// the next one; only allowed without a tape, and the skipped layer must
// have in_dim == out_dim.
Matrix stack_forward(const std::vector<AffineLayer>& stack, const Matrix& input,
                     StackTape* tape = nullptr, std::size_t skip_layer = 0);

struct StackGrads {
    std::vector<Matrix> weight;  // per layer, shape of layer.weight
    std::vector<Matrix> bias;    // per layer, shape of layer.bias
    Matrix input;                // gradient w.r.t. the stack input
};

// Exact reverse-mode gradients of a scalar loss, given d(loss)/d(output).
// Consumes the tape; calling again (or without a recorded forward) throws
// StateError.
StackGrads stack_backward(const std::vector<AffineLayer>& stack, StackTape& tape,
                          const Matrix& out_grad);

}  // namespace rcvae

#include "rcvae/net.hpp"

#include <cmath>

namespace rcvae {

namespace {

void apply_activation(Matrix& m, Activation act) {
    switch (act) {
        case Activation::ReLU:
            for (double& v : m.data) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::Sigmoid:
            for (double& v : m.data) v = 1.0 / (1.0 + std::exp(-v));
            break;
        case Activation::Identity:
            break;
    }
}

// Derivative expressed through the activation output.
Matrix activation_grad_from_post(const Matrix& post, Activation act) {
    Matrix g(post.rows, post.cols, 1.0);
    switch (act) {
        case Activation::ReLU:
            for (std::size_t i = 0; i < post.data.size(); ++i)
                g.data[i] = post.data[i] > 0.0 ? 1.0 : 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < post.data.size(); ++i)
                g.data[i] = post.data[i] * (1.0 - post.data[i]);
            break;
        case Activation::Identity:
            break;
    }
    return g;
}

}  // namespace

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "?";
}

AffineLayer make_affine(std::size_t out, std::size_t in, Activation act) {
    AffineLayer l;
    l.weight = Matrix(out, in);
    l.bias = Matrix(out, 1);
    l.activation = act;
    return l;
}

void glorot_init(AffineLayer& layer, Rng& rng) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
    for (double& v : layer.weight.data) v = (2.0 * rng.next_unit() - 1.0) * bound;
    for (double& v : layer.bias.data) v = 0.0;
}

Matrix affine_forward(const AffineLayer& layer, const Matrix& input) {
    if (input.rows != layer.in_dim()) {
        throw DimensionError("affine_forward: layer expects " +
                             std::to_string(layer.in_dim()) + " input rows, got " +
                             shape_str(input));
    }
    Matrix out = add_col_broadcast(matmul(layer.weight, input), layer.bias);
    apply_activation(out, layer.activation);
    ensure_finite(out, "affine_forward(" + std::string(activation_name(layer.activation)) + ")");
    return out;
}

Matrix stack_forward(const std::vector<AffineLayer>& stack, const Matrix& input,
                     StackTape* tape, std::size_t skip_layer) {
    if (skip_layer != 0) {
        if (tape) throw StateError("stack_forward: layer skip cannot be recorded on a tape");
        if (skip_layer > stack.size())
            throw DimensionError("stack_forward: skip index " + std::to_string(skip_layer) +
                                 " beyond stack of " + std::to_string(stack.size()));
        const AffineLayer& skipped = stack[skip_layer - 1];
        if (skipped.in_dim() != skipped.out_dim()) {
            throw DimensionError("stack_forward: cannot skip layer " +
                                 std::to_string(skip_layer) + " (" +
                                 std::to_string(skipped.in_dim()) + "->" +
                                 std::to_string(skipped.out_dim()) + ")");
        }
    }
    if (tape) {
        tape->input = input;
        tape->post.clear();
        tape->post.reserve(stack.size());
        tape->recorded = true;
        tape->consumed = false;
    }
    Matrix cur = input;
    for (std::size_t l = 0; l < stack.size(); ++l) {
        if (skip_layer == l + 1) continue;
        cur = affine_forward(stack[l], cur);
        if (tape) tape->post.push_back(cur);
    }
    return cur;
}

StackGrads stack_backward(const std::vector<AffineLayer>& stack, StackTape& tape,
                          const Matrix& out_grad) {
    if (!tape.recorded) throw StateError("stack_backward: no recorded forward pass");
    if (tape.consumed) throw StateError("stack_backward: tape already consumed");
    if (tape.post.size() != stack.size())
        throw StateError("stack_backward: tape does not match stack");
    tape.consumed = true;

    StackGrads g;
    g.weight.resize(stack.size());
    g.bias.resize(stack.size());

    Matrix d_post = out_grad;
    for (std::size_t i = stack.size(); i-- > 0;) {
        const AffineLayer& layer = stack[i];
        const Matrix d_pre =
            hadamard(d_post, activation_grad_from_post(tape.post[i], layer.activation));
        const Matrix& below = (i == 0) ? tape.input : tape.post[i - 1];
        g.weight[i] = matmul(d_pre, transpose(below));
        g.bias[i] = row_sum(d_pre);
        d_post = matmul(transpose(layer.weight), d_pre);
        ensure_finite(g.weight[i], "stack_backward: weight grad layer " + std::to_string(i + 1));
    }
    g.input = d_post;
    return g;
}

}  // namespace rcvae

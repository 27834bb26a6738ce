#pragma once

#include <string>
#include <vector>

#include "rcvae/matrix.hpp"

namespace rcvae {

// Named handle onto a trainable matrix. The path shows up in numeric error
// messages ("decoder.layer2.weight: non-finite gradient").
struct ParamRef {
    std::string path;
    Matrix* value = nullptr;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Standard Adam with bias correction. Moment buffers are laid out in the
// same order as the parameter list the state was built from.
class AdamState {
  public:
    AdamState() = default;
    AdamState(const AdamConfig& cfg, const std::vector<ParamRef>& params);

    // Applies one update; grads must parallel the registration order.
    // Zero gradient leaves a parameter untouched only at t=0 state in the
    // moments sense; the update itself is the plain Adam recurrence.
    void step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads);

    long long steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::vector<std::string> paths_;
    long long t_ = 0;
};

}  // namespace rcvae

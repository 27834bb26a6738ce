#include "rcvae/adam.hpp"

#include <cmath>

namespace rcvae {

AdamState::AdamState(const AdamConfig& cfg, const std::vector<ParamRef>& params)
    : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    paths_.reserve(params.size());
    for (const ParamRef& p : params) {
        m_.emplace_back(p.value->rows, p.value->cols, 0.0);
        v_.emplace_back(p.value->rows, p.value->cols, 0.0);
        paths_.push_back(p.path);
    }
}

void AdamState::step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw DimensionError("adam: expected " + std::to_string(m_.size()) +
                             " parameters, got " + std::to_string(params.size()) + "/" +
                             std::to_string(grads.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].value->same_shape(grads[i])) {
            throw DimensionError("adam: gradient shape " + shape_str(grads[i]) +
                                 " does not match " + paths_[i]);
        }
        for (double g : grads[i].data) {
            if (!std::isfinite(g)) {
                throw NumericError(paths_[i] + ": non-finite gradient");
            }
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i].value;
        const Matrix& g = grads[i];
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            double& m = m_[i].data[j];
            double& v = v_[i].data[j];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g.data[j];
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.data[j] * g.data[j];
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p.data[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
        ensure_finite(p, paths_[i] + " after adam step");
    }
}

}  // namespace rcvae

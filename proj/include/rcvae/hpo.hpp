#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcvae/trainer.hpp"

namespace rcvae {

// Bounded search box. eta is log-uniform; the integer dims round from
// continuous unit-cube proposals and always land back inside their bounds.
struct SearchSpace {
    double eta_min = 1e-5, eta_max = 1e-2;
    std::size_t h_min = 32, h_max = 512;
    std::size_t j_min = 4, j_max = 64;
    std::size_t d_min = 8, d_max = 512;
    std::size_t k_min = 32, k_max = 256;

    static constexpr std::size_t kDims = 5;
    void validate() const;
};

struct HpoPoint {
    double eta = 0;
    std::size_t h = 0, j = 0, d = 0, k = 0;
};

HpoPoint decode_point(const SearchSpace& space, const std::vector<double>& unit);

// Minimizing GP surrogate with expected improvement, over the unit cube.
// RBF kernel with fixed length scale 0.25, signal variance 1, Gaussian
// observation noise (default 1e-6); the Gram matrix gets an escalating
// jitter if Cholesky stumbles. The first max(5, dims+1) suggestions are
// plain uniform draws; afterwards the best of 1024 uniform candidates by EI.
// Everything is deterministic given (seed, history).
class BoState {
  public:
    BoState(std::size_t dims, std::uint64_t seed, double noise = 1e-6);

    std::vector<double> suggest();
    void observe(const std::vector<double>& x, double y);  // ConfigError out of bounds

    std::size_t count() const { return ys_.size(); }
    double best_y() const;
    const std::vector<double>& best_x() const;

    // Posterior at x given current observations. Predictive variance at a
    // noiseless observed point collapses to ~0, and EI is defined as exactly
    // 0 whenever the variance is <= 1e-12.
    void predict(const std::vector<double>& x, double* mu, double* var) const;
    double ei(const std::vector<double>& x) const;

  private:
    void refit() const;

    std::size_t dims_;
    double noise_;
    Rng rng_;
    std::vector<std::vector<double>> xs_;
    std::vector<double> ys_;
    mutable std::vector<double> chol_;   // lower Cholesky of K, row-major n x n
    mutable std::vector<double> alpha_;  // K^-1 (y - mean)
    mutable double y_mean_ = 0;
    mutable bool fitted_ = false;
};

enum class HpoMethod { GpEi, Random };

struct TrialRow {
    std::size_t trial = 0;
    HpoPoint point;
    double val_mae = 0;
    std::string status;  // "ok" | "failed"
};

struct HpoResult {
    HpoPoint best;
    double best_val_mae = 0;
    std::vector<TrialRow> trials;
};

// Everything about the data/model that one trial needs beyond the sampled
// hyperparameters.
struct HpoProblem {
    std::vector<QuasiVideoSample> train_samples;
    std::vector<QuasiVideoSample> val_samples;
    ScalerParams scaler;
    std::size_t height = 0, width = 0;
    std::size_t enc_layers = 16, dec_layers = 16;
    std::size_t trial_epochs = 50;  // truncated budget per trial
    std::size_t patience = 10;
    double match_weight = 0.5;
};

// Runs `budget` trials, each a short training run scored by best validation
// MAE. Failed trials are logged and fed back to the surrogate with a penalty
// of twice the worst observed objective (1e6 before any success). Random
// method shares the very same suggestion stream, so the two methods evaluate
// identical configurations over the random warmup stretch. Trials run
// serially so replays are exact.
HpoResult run_hpo(const HpoProblem& problem, const SearchSpace& space, std::size_t budget,
                  std::uint64_t seed, HpoMethod method = HpoMethod::GpEi);

// Columns: trial,eta,h,J,D,K,val_mae,status.
std::string trials_csv(const std::vector<TrialRow>& rows);

}  // namespace rcvae

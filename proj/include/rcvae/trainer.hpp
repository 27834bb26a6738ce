#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rcvae/dataio.hpp"
#include "rcvae/model.hpp"

namespace rcvae {

struct LossParts {
    double total = 0;
    double mse = 0;
    double kld = 0;
};

// total = MSE + KLD/K. MSE is the mean squared error over every element of
// the batch; KLD sums -1/2 (1 + logvar - mu^2 - exp(logvar)) over batch and
// latent dims. K is normally the batch column count (what train() passes).
LossParts loss_total(const Matrix& xhat, const Matrix& x, const LatentStats& stats,
                     std::size_t k);

// Counter resets to zero on strict improvement, increments otherwise; the
// stop condition fires once the counter reaches patience (patience epochs
// without improvement after the best one).
struct EarlyStopper {
    std::size_t patience = 100;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t counter = 0;

    bool observe(double value, std::size_t epoch);  // true when value improved best
    bool should_stop() const { return counter >= patience; }
};

struct TrainConfig {
    std::size_t max_epochs = 1000;
    std::size_t patience = 100;
    std::size_t batch = 128;  // K
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool early_stop = true;
    // Final-fit mode: merge val into train and carve this fraction back out
    // as the early-stop signal.
    bool merge_val = false;
    double holdout_fraction = 0.05;

    void validate() const;
};

// Dataset view the trainer consumes: features as columns plus the vocab index
// of each column. Unseen labels are matched into the vocab on construction.
struct TrainSet {
    Matrix features;                   // d_x x n
    std::vector<std::size_t> indices;  // vocab index per column
};

TrainSet make_train_set(const std::vector<QuasiVideoSample>& samples, const LabelVocab& vocab,
                        double match_weight);

// Mean absolute error over all scaled features of the set, reconstructions
// drawn with eps from the given fixed seed (same value for every call with
// the same arguments, so epochs are comparable).
double validate(const RcvaeParams& params, const TrainSet& set, std::uint64_t eps_seed);

struct TrainState {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_val_mae = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
    std::vector<double> train_loss;  // mean total loss per epoch
    std::vector<double> val_mae;     // per epoch
};

struct TrainHistory {
    std::uint64_t epochs_run = 0;
    std::uint64_t best_epoch = 0;
    double best_val_mae = 0;
    bool stopped_early = false;
};

struct Checkpoint {
    RcvaeParams params;
    LabelVocab vocab;
    ScalerParams scaler;
    std::size_t height = 0;
    std::size_t width = 0;
    std::string layout_id = kPackLayoutId;
    std::string rng_algorithm = Rng::kAlgorithm;
    std::uint64_t seed = 0;
    TrainHistory history;
};

struct TrainResult {
    Checkpoint checkpoint;  // best-epoch snapshot, not the final one
    TrainState state;
};

// Algorithm: per epoch, a seeded shuffle into K-sized mini-batches, Adam
// updates, then validation; on strict val improvement the parameters are
// snapshotted, otherwise the early-stop counter advances. Aborts with
// NumericError naming the epoch when the loss goes non-finite. The vocab is
// built from the train split only; val labels outside it are matched in.
TrainResult train(const std::vector<QuasiVideoSample>& train_samples,
                  const std::vector<QuasiVideoSample>& val_samples,
                  const RcvaeConfig& mconfig, const TrainConfig& tconfig,
                  const ScalerParams& scaler, std::size_t height, std::size_t width,
                  double match_weight);

// Binary checkpoint, little-endian throughout. Layout: magic "RCVA", u32
// version (=1); six u64 config fields (d_x, D, J, L_enc, L_dec, h); every
// parameter matrix in param_refs order as (u64 rows, u64 cols, row-major
// f64); vocab as u64 count + per-entry length-prefixed UTF-8; eight f64
// scaler values ((min,max) per type V,I,T,Qc); RNG algorithm id
// (length-prefixed) + u64 seed; pack layout (u64 H, u64 W, length-prefixed
// layout id); history (u64 epochs_run, u64 best_epoch, f64 best_val_mae,
// u8 stopped_early). Writes are atomic (temp file + rename); save -> load ->
// save is byte-identical.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);  // FormatError with byte offset

}  // namespace rcvae

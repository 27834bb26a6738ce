#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rcvae/trainer.hpp"

namespace rcvae {

double mae(const std::vector<double>& x, const std::vector<double>& xhat);
double rmse(const std::vector<double>& x, const std::vector<double>& xhat);

struct TypeMetrics {
    double mae = 0;
    double rmse = 0;
};

struct MetricsReport {
    std::string detach = "None";  // ablation row name
    double mae_total = 0;         // over all scaled features
    double rmse_total = 0;
    std::array<TypeMetrics, kNumTypes> per_type{};  // physical units
    std::size_t sample_count = 0;
    std::size_t matched_labels = 0;  // test labels resolved through the matcher
};

enum class AblationTarget { None, EncoderLayer, DecoderLayer, Embedding };

struct AblationSpec {
    enum class Mode { SkipAtInference, Retrain };

    AblationTarget target = AblationTarget::None;
    std::size_t layer = 0;  // 1-based, used by the layer targets
    Mode mode = Mode::SkipAtInference;

    std::string name() const;  // "None", "Encoder_3", "Decoder_1", "Embedding"
};

// SpecError unless the spec is applicable: encoder k in 2..L_enc, decoder k
// in 1..L_dec-1 (the first encoder layer and last decoder layer are never
// removable), and a Decoder_1 skip additionally needs J+D == h so the bypass
// type-checks.
void validate_ablation(const AblationSpec& spec, const RcvaeConfig& config);

// Per-type weights applied to total MAE/RMSE over scaled features; all-equal
// weights reduce to the plain mean over every element.
struct TotalWeights {
    std::array<double, kNumTypes> w{1.0, 1.0, 1.0, 1.0};
};

// Reconstruction metrics over a test set. eps comes from the fixed reporting
// seed; labels absent from the checkpoint vocab are matched to the nearest
// known one (weighted label distance, weight `match_weight`) and counted.
// Totals are computed on scaled features, per-type blocks on unpacked +
// inverse-scaled series in physical units.
MetricsReport report(const Checkpoint& ckpt, const std::vector<QuasiVideoSample>& test,
                     double match_weight, std::uint64_t report_seed,
                     const InferenceMods& mods = {}, const TotalWeights& weights = {});

MetricsReport ablate(const Checkpoint& ckpt, const AblationSpec& spec,
                     const std::vector<QuasiVideoSample>& test, double match_weight,
                     std::uint64_t report_seed, const TotalWeights& weights = {});

// Retrain-mode ablation: rebuild the model with the targeted layer removed
// (or the condition vectors zeroed for the Embedding target) and train from
// scratch with the same hyperparameters before reporting.
MetricsReport ablate_retrain(const AblationSpec& spec,
                             const std::vector<QuasiVideoSample>& train_samples,
                             const std::vector<QuasiVideoSample>& val_samples,
                             const std::vector<QuasiVideoSample>& test,
                             const RcvaeConfig& mconfig, const TrainConfig& tconfig,
                             const ScalerParams& scaler, std::size_t height, std::size_t width,
                             double match_weight, std::uint64_t report_seed);

// The sweep's row order: Decoder_1 (when J+D==h), then ascending k with the
// decoder row before the encoder row at each k, then None, then Embedding.
// A 16/16 model with a valid Decoder_1 gives 32 rows.
std::vector<AblationSpec> sweep_specs(const RcvaeConfig& config);

// Evaluates every sweep spec; workers > 1 evaluates rows in parallel.
std::vector<MetricsReport> ablation_sweep(const Checkpoint& ckpt,
                                          const std::vector<QuasiVideoSample>& test,
                                          double match_weight, std::uint64_t report_seed,
                                          std::size_t workers = 1);

// Columns: detach,mae_total,rmse_total,mae_V,rmse_V,mae_I,rmse_I,mae_T,
// rmse_T,mae_Qc,rmse_Qc.
std::string metrics_csv(const std::vector<MetricsReport>& rows);

}  // namespace rcvae

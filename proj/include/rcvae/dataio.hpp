#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rcvae/labels.hpp"
#include "rcvae/rng.hpp"

namespace rcvae {

// The four series types of one charging cycle, in fixed order.
enum class DataType : std::size_t { Voltage = 0, Current = 1, Temperature = 2, ChargeCap = 3 };

constexpr std::size_t kNumTypes = 4;
const char* data_type_name(DataType t);  // "V", "I", "T", "Qc"

struct CyclePoint {
    double time_s = 0;
    double voltage_v = 0;
    double current_rate_c = 0;
    double temperature_c = 0;
    double charge_capacity_ah = 0;
};

// One charging cycle of one battery. cycle_index is the sample's ECL.
struct CycleSeries {
    std::string battery_id;
    std::int64_t cycle_index = 0;
    std::vector<CyclePoint> points;  // time strictly increasing, >= 2 points
};

struct BatteryRecord {
    std::string battery_id;
    std::int64_t eol = 0;  // cycle at which discharge capacity hits 80% nominal
    std::vector<CycleSeries> cycles;  // ordered by cycle_index, indices unique, all <= eol
};

// --- loading ---------------------------------------------------------------

// Data CSV header: battery_id,cycle_index,time_s,voltage_V,current_rate_C,
// temperature_degC,charge_capacity_Ah. Metadata CSV header: battery_id,eol.
// Rows need not be sorted; points are ordered by time after grouping.
// Duplicate timestamps within a cycle, unknown batteries, or schema
// violations raise ParseError naming the offending row.
std::vector<BatteryRecord> load_csv(const std::string& data_path,
                                    const std::string& metadata_path);

// Drops cycles containing NaN/Inf values or non-increasing time, then clips
// survivors to physical ranges: V [1.5,4.5] V, I [-10,10] C, T [-20,80] degC,
// Qc [0,2] Ah. Returns number of dropped cycles.
std::size_t clean_records(std::vector<BatteryRecord>& records);

// --- synthetic generator ----------------------------------------------------

// Constant-current / constant-voltage charge curves whose amplitude and
// duration drift with cycle_index / EOL, plus per-point noise on V, I and T
// (Qc stays clean so it is monotone by construction). EOL feeds the charge
// rate, capacity and internal resistance directly, so two batteries with
// far-apart EOLs produce visibly different curves at the same cycle.
struct SynthSpec {
    std::size_t n_batteries = 1;
    std::size_t n_cycles = 1;
    std::int64_t eol_min = 300;
    std::int64_t eol_max = 1500;
    std::size_t points_per_cycle = 220;
};

// Scaled-unit-free noise sigmas injected per type (physical units).
std::array<double, kNumTypes> synth_noise_sigma();

std::vector<BatteryRecord> synth_generate(Rng& rng, const SynthSpec& spec);

// --- resample / scale / pack ------------------------------------------------

// Linear interpolation of each series onto L uniform times spanning
// [t_first, t_last]. DataError if the cycle has fewer than 2 points.
std::array<std::vector<double>, kNumTypes> resample(const CycleSeries& series, std::size_t len);

// Per-type min/max observed on the training portion; apply maps affinely to
// [0,1] and clips outside values (counted), invert undoes it exactly on the
// fitted range. A type whose fitted range is a single value is a DataError.
struct ScalerParams {
    std::array<double, kNumTypes> min{};
    std::array<double, kNumTypes> max{};
};

ScalerParams scale_fit(const std::vector<std::array<std::vector<double>, kNumTypes>>& samples);
double scale_apply(const ScalerParams& s, DataType t, double x, std::size_t* clipped = nullptr);
double scale_invert(const ScalerParams& s, DataType t, double y);

// Identifier of the packing convention below, persisted with every artifact
// that stores packed features.
constexpr const char* kPackLayoutId = "channel-depth-height-width/1";

// One packed training sample. Features hold the four scaled series in the
// fixed 5-D block layout (channel, depth, height, width) flattened row-major:
// channels are {V, I, T}, depth 0 is the channel's own series, depth 1 is the
// Qc series replicated into every channel. Feature length is 3*2*H*W.
struct QuasiVideoSample {
    std::vector<double> features;
    LabelKey label;
    std::string battery_id;
};

std::size_t feature_dim(std::size_t height, std::size_t width);

QuasiVideoSample pack(const std::array<std::vector<double>, kNumTypes>& series,
                      const LabelKey& label, const std::string& battery_id,
                      std::size_t height, std::size_t width);

// Inverse of pack. The Qc series comes back as the mean of its three
// replicas (identical for packed data, generally distinct for model output).
std::array<std::vector<double>, kNumTypes> unpack(const std::vector<double>& features,
                                                  std::size_t height, std::size_t width);

// Positions of one type's values inside the flattened feature vector.
// V/I/T own their depth-0 plane; Qc owns all three depth-1 planes.
std::vector<std::size_t> type_positions(DataType t, std::size_t height, std::size_t width);

// --- splitting ---------------------------------------------------------------

// Sample-level split. After a seeded shuffle the first
// floor(count * train_equiv / battery_ref) samples form the train pool and
// the rest the test set; a second seeded shuffle divides the pool 4:1 into
// train and validation (val_fraction of the pool, floored).
struct SplitSpec {
    std::uint64_t seed = 0;
    std::size_t train_equiv = 94;   // batteries' worth of samples in the pool
    std::size_t battery_ref = 124;  // reference battery count the ratio comes from
    double val_fraction = 0.2;
};

struct SplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

SplitResult split_samples(std::size_t sample_count, const SplitSpec& spec);

// --- packed dataset archive ---------------------------------------------------

// Everything downstream commands need, split and scaled. Binary format
// (little-endian): magic "RCVD", u32 version (=1); u64 H, u64 W,
// length-prefixed layout id; eight f64 scaler values ((min,max) per type);
// then per split (train, val, test): u64 count followed by samples as
// length-prefixed battery id, u64 eol, u64 ecl, 6*H*W f64 features.
struct PackedDataset {
    std::size_t height = 0;
    std::size_t width = 0;
    std::string layout_id = kPackLayoutId;
    ScalerParams scaler;
    std::vector<QuasiVideoSample> train, val, test;
};

void save_dataset(const PackedDataset& ds, const std::string& path);  // atomic write
PackedDataset load_dataset(const std::string& path);  // FormatError with byte offset

}  // namespace rcvae

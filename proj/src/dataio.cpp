#include "rcvae/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "rcvae/bytes.hpp"
#include "rcvae/errors.hpp"

namespace rcvae {

const char* data_type_name(DataType t) {
    switch (t) {
        case DataType::Voltage: return "V";
        case DataType::Current: return "I";
        case DataType::Temperature: return "T";
        case DataType::ChargeCap: return "Qc";
    }
    return "?";
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw ParseError(where + ": trailing characters in '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError(where + ": not a number: '" + s + "'");
    }
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw ParseError(where + ": trailing characters in '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError(where + ": not an integer: '" + s + "'");
    }
}

}  // namespace

std::vector<BatteryRecord> load_csv(const std::string& data_path,
                                    const std::string& metadata_path) {
    std::ifstream meta(metadata_path);
    if (!meta) throw DataError("cannot open metadata file: " + metadata_path);
    std::string line;
    if (!std::getline(meta, line)) throw ParseError(metadata_path + ": empty file");
    if (split_fields(line) != std::vector<std::string>{"battery_id", "eol"})
        throw ParseError(metadata_path + ": bad header: " + line);

    std::map<std::string, std::int64_t> eol_by_id;
    std::size_t row = 1;
    while (std::getline(meta, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = split_fields(line);
        std::string where = metadata_path + " row " + std::to_string(row);
        if (f.size() != 2) throw ParseError(where + ": expected 2 fields, got " + std::to_string(f.size()));
        std::int64_t eol = parse_int(f[1], where);
        if (eol <= 0) throw ParseError(where + ": eol must be positive");
        if (!eol_by_id.emplace(f[0], eol).second)
            throw ParseError(where + ": duplicate battery_id '" + f[0] + "'");
    }

    std::ifstream data(data_path);
    if (!data) throw DataError("cannot open data file: " + data_path);
    if (!std::getline(data, line)) throw ParseError(data_path + ": empty file");
    static const std::vector<std::string> kHeader = {
        "battery_id", "cycle_index", "time_s", "voltage_V",
        "current_rate_C", "temperature_degC", "charge_capacity_Ah"};
    if (split_fields(line) != kHeader)
        throw ParseError(data_path + ": bad header: " + line);

    // (battery, cycle) -> points, insertion-ordered per battery
    std::map<std::string, std::map<std::int64_t, std::vector<CyclePoint>>> grouped;
    row = 1;
    while (std::getline(data, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = split_fields(line);
        std::string where = data_path + " row " + std::to_string(row);
        if (f.size() != 7) throw ParseError(where + ": expected 7 fields, got " + std::to_string(f.size()));
        if (!eol_by_id.count(f[0]))
            throw ParseError(where + ": battery_id '" + f[0] + "' missing from metadata");
        std::int64_t cyc = parse_int(f[1], where);
        if (cyc <= 0) throw ParseError(where + ": cycle_index must be positive");
        if (cyc > eol_by_id[f[0]])
            throw ParseError(where + ": cycle_index " + std::to_string(cyc) +
                             " exceeds battery eol " + std::to_string(eol_by_id[f[0]]));
        CyclePoint p;
        p.time_s = parse_double(f[2], where);
        p.voltage_v = parse_double(f[3], where);
        p.current_rate_c = parse_double(f[4], where);
        p.temperature_c = parse_double(f[5], where);
        p.charge_capacity_ah = parse_double(f[6], where);
        grouped[f[0]][cyc].push_back(p);
    }

    std::vector<BatteryRecord> out;
    for (auto& [id, cycles] : grouped) {
        BatteryRecord rec;
        rec.battery_id = id;
        rec.eol = eol_by_id[id];
        for (auto& [cyc, pts] : cycles) {
            std::stable_sort(pts.begin(), pts.end(),
                             [](const CyclePoint& a, const CyclePoint& b) { return a.time_s < b.time_s; });
            for (std::size_t i = 1; i < pts.size(); ++i)
                if (!(pts[i].time_s > pts[i - 1].time_s))
                    throw ParseError(data_path + ": battery '" + id + "' cycle " +
                                     std::to_string(cyc) + ": duplicate time " +
                                     std::to_string(pts[i].time_s));
            if (pts.size() < 2)
                throw ParseError(data_path + ": battery '" + id + "' cycle " +
                                 std::to_string(cyc) + ": fewer than 2 points");
            CycleSeries s;
            s.battery_id = id;
            s.cycle_index = cyc;
            s.points = std::move(pts);
            rec.cycles.push_back(std::move(s));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

bool cycle_is_sane(const CycleSeries& s) {
    double prev_t = -std::numeric_limits<double>::infinity();
    for (const auto& p : s.points) {
        for (double v : {p.time_s, p.voltage_v, p.current_rate_c, p.temperature_c,
                         p.charge_capacity_ah})
            if (!std::isfinite(v)) return false;
        if (!(p.time_s > prev_t)) return false;
        prev_t = p.time_s;
    }
    return s.points.size() >= 2;
}

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

}  // namespace

std::size_t clean_records(std::vector<BatteryRecord>& records) {
    std::size_t dropped = 0;
    for (auto& rec : records) {
        std::vector<CycleSeries> kept;
        kept.reserve(rec.cycles.size());
        for (auto& s : rec.cycles) {
            if (!cycle_is_sane(s)) {
                ++dropped;
                continue;
            }
            for (auto& p : s.points) {
                p.voltage_v = clip(p.voltage_v, 1.5, 4.5);
                p.current_rate_c = clip(p.current_rate_c, -10.0, 10.0);
                p.temperature_c = clip(p.temperature_c, -20.0, 80.0);
                p.charge_capacity_ah = clip(p.charge_capacity_ah, 0.0, 2.0);
            }
            kept.push_back(std::move(s));
        }
        rec.cycles = std::move(kept);
    }
    return dropped;
}

std::array<double, kNumTypes> synth_noise_sigma() {
    return {0.0015, 0.004, 0.05, 0.0};
}

std::vector<BatteryRecord> synth_generate(Rng& rng, const SynthSpec& spec) {
    if (spec.n_batteries == 0 || spec.n_cycles == 0)
        throw DataError("synth_generate: battery and cycle counts must be positive");
    if (spec.eol_min <= 0 || spec.eol_max < spec.eol_min)
        throw DataError("synth_generate: bad eol range");
    if (spec.points_per_cycle < 8)
        throw DataError("synth_generate: need at least 8 points per cycle");

    auto sigma = synth_noise_sigma();
    std::vector<BatteryRecord> out;
    out.reserve(spec.n_batteries);
    for (std::size_t b = 0; b < spec.n_batteries; ++b) {
        BatteryRecord rec;
        char buf[32];
        std::snprintf(buf, sizeof buf, "synth_%03zu", b);
        rec.battery_id = buf;
        std::uint64_t span = static_cast<std::uint64_t>(spec.eol_max - spec.eol_min + 1);
        rec.eol = spec.eol_min + static_cast<std::int64_t>(rng.next_below(span));

        // Degradation-free base parameters, all tied to EOL so the label is
        // actually predictive of the curve shape.
        double eol = static_cast<double>(rec.eol);
        double c_rate_b = clip(2.2 - eol / 1250.0, 1.0, 2.2);
        double cap_b = 1.10 * (0.80 + 0.12 * std::min(eol, 2000.0) / 2000.0);
        double r_b = 0.015 + 12.0 / eol;

        // The first n cycles of the battery's life (early-cycle regime).
        std::int64_t n_cyc = std::min<std::int64_t>(static_cast<std::int64_t>(spec.n_cycles),
                                                    rec.eol);
        for (std::int64_t k = 1; k <= n_cyc; ++k) {
            double d = static_cast<double>(k) / eol;  // degradation fraction in (0,1]
            double r_k = r_b * (1.0 + 0.8 * d);
            double cap_k = cap_b * (1.0 - 0.2 * d);

            // CC phase delivers 80% of capacity at c_rate_b, then CV at 4.2 V
            // with exponentially decaying current until ~cap_k total.
            double cc_cap = 0.8 * cap_k;
            double cc_hours = cc_cap / (c_rate_b * cap_b);
            double tau = 0.25 * (1.0 + 0.5 * d);  // CV decay constant, hours
            double cv_hours = tau * 3.0;
            double total_hours = cc_hours + cv_hours;

            CycleSeries s;
            s.battery_id = rec.battery_id;
            s.cycle_index = k;
            s.points.reserve(spec.points_per_cycle);
            double amb = 25.0;
            for (std::size_t i = 0; i < spec.points_per_cycle; ++i) {
                double t_h = total_hours * static_cast<double>(i) /
                             static_cast<double>(spec.points_per_cycle - 1);
                CyclePoint p;
                p.time_s = t_h * 3600.0;
                double i_rate, q;
                if (t_h <= cc_hours) {
                    i_rate = c_rate_b;
                    q = c_rate_b * cap_b * t_h;
                    // OCV rises with state of charge; IR drop adds on top.
                    double soc = q / cap_k;
                    p.voltage_v = 3.0 + 1.0 * soc + i_rate * cap_b * r_k;
                    if (p.voltage_v > 4.2) p.voltage_v = 4.2;
                } else {
                    double dt = t_h - cc_hours;
                    i_rate = c_rate_b * std::exp(-dt / tau);
                    q = cc_cap + c_rate_b * cap_b * tau * (1.0 - std::exp(-dt / tau));
                    p.voltage_v = 4.2;
                }
                p.current_rate_c = i_rate;
                p.charge_capacity_ah = q;
                // Joule heating above ambient, proportional to I^2 * R.
                double amps = i_rate * cap_b;
                p.temperature_c = amb + 180.0 * amps * amps * r_k;
                // Noise on V/I/T only; Qc stays monotone.
                p.voltage_v += sigma[0] * rng.next_normal();
                p.current_rate_c += sigma[1] * rng.next_normal();
                p.temperature_c += sigma[2] * rng.next_normal();
                s.points.push_back(p);
            }
            rec.cycles.push_back(std::move(s));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::array<std::vector<double>, kNumTypes> resample(const CycleSeries& series, std::size_t len) {
    if (series.points.size() < 2)
        throw DataError("resample: cycle " + std::to_string(series.cycle_index) +
                        " of '" + series.battery_id + "' has fewer than 2 points");
    if (len < 2) throw DataError("resample: target length must be >= 2");
    const auto& pts = series.points;
    double t0 = pts.front().time_s, t1 = pts.back().time_s;
    std::array<std::vector<double>, kNumTypes> out;
    for (auto& v : out) v.resize(len);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < len; ++i) {
        double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(len - 1);
        while (seg + 2 < pts.size() && pts[seg + 1].time_s < t) ++seg;
        double ta = pts[seg].time_s, tb = pts[seg + 1].time_s;
        double w = (t - ta) / (tb - ta);
        w = clip(w, 0.0, 1.0);
        auto lerp = [w](double a, double b) { return a + w * (b - a); };
        out[0][i] = lerp(pts[seg].voltage_v, pts[seg + 1].voltage_v);
        out[1][i] = lerp(pts[seg].current_rate_c, pts[seg + 1].current_rate_c);
        out[2][i] = lerp(pts[seg].temperature_c, pts[seg + 1].temperature_c);
        out[3][i] = lerp(pts[seg].charge_capacity_ah, pts[seg + 1].charge_capacity_ah);
    }
    return out;
}

ScalerParams scale_fit(const std::vector<std::array<std::vector<double>, kNumTypes>>& samples) {
    if (samples.empty()) throw DataError("scale_fit: no samples");
    ScalerParams s;
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        s.min[t] = std::numeric_limits<double>::infinity();
        s.max[t] = -std::numeric_limits<double>::infinity();
    }
    for (const auto& sample : samples)
        for (std::size_t t = 0; t < kNumTypes; ++t)
            for (double v : sample[t]) {
                s.min[t] = std::min(s.min[t], v);
                s.max[t] = std::max(s.max[t], v);
            }
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        if (!std::isfinite(s.min[t]) || !std::isfinite(s.max[t]))
            throw DataError(std::string("scale_fit: non-finite range for ") +
                            data_type_name(static_cast<DataType>(t)));
        if (s.max[t] <= s.min[t])
            throw DataError(std::string("scale_fit: degenerate range for ") +
                            data_type_name(static_cast<DataType>(t)));
    }
    return s;
}

double scale_apply(const ScalerParams& s, DataType t, double x, std::size_t* clipped) {
    std::size_t i = static_cast<std::size_t>(t);
    double y = (x - s.min[i]) / (s.max[i] - s.min[i]);
    if (y < 0.0 || y > 1.0) {
        if (clipped) ++*clipped;
        y = clip(y, 0.0, 1.0);
    }
    return y;
}

double scale_invert(const ScalerParams& s, DataType t, double y) {
    std::size_t i = static_cast<std::size_t>(t);
    return s.min[i] + y * (s.max[i] - s.min[i]);
}

std::size_t feature_dim(std::size_t height, std::size_t width) {
    return 3 * 2 * height * width;
}

QuasiVideoSample pack(const std::array<std::vector<double>, kNumTypes>& series,
                      const LabelKey& label, const std::string& battery_id,
                      std::size_t height, std::size_t width) {
    std::size_t plane = height * width;
    for (std::size_t t = 0; t < kNumTypes; ++t)
        if (series[t].size() != plane)
            throw DimensionError(std::string("pack: ") + data_type_name(static_cast<DataType>(t)) +
                                 " length " + std::to_string(series[t].size()) +
                                 " != H*W = " + std::to_string(plane));
    QuasiVideoSample out;
    out.label = label;
    out.battery_id = battery_id;
    out.features.resize(feature_dim(height, width));
    // layout: channel-major, then depth, then the H*W plane row-major.
    for (std::size_t c = 0; c < 3; ++c) {
        double* ch = out.features.data() + c * 2 * plane;
        const auto& own = series[c];
        const auto& qc = series[3];
        std::copy(own.begin(), own.end(), ch);           // depth 0
        std::copy(qc.begin(), qc.end(), ch + plane);     // depth 1
    }
    return out;
}

std::array<std::vector<double>, kNumTypes> unpack(const std::vector<double>& features,
                                                  std::size_t height, std::size_t width) {
    std::size_t plane = height * width;
    if (features.size() != feature_dim(height, width))
        throw DimensionError("unpack: feature length " + std::to_string(features.size()) +
                             " != 6*H*W = " + std::to_string(feature_dim(height, width)));
    std::array<std::vector<double>, kNumTypes> out;
    for (std::size_t t = 0; t < 3; ++t) {
        const double* ch = features.data() + t * 2 * plane;
        out[t].assign(ch, ch + plane);
    }
    out[3].resize(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        double acc = 0;
        for (std::size_t c = 0; c < 3; ++c) acc += features[c * 2 * plane + plane + i];
        out[3][i] = acc / 3.0;
    }
    return out;
}

std::vector<std::size_t> type_positions(DataType t, std::size_t height, std::size_t width) {
    std::size_t plane = height * width;
    std::vector<std::size_t> pos;
    if (t == DataType::ChargeCap) {
        pos.reserve(3 * plane);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < plane; ++i) pos.push_back(c * 2 * plane + plane + i);
    } else {
        std::size_t c = static_cast<std::size_t>(t);
        pos.reserve(plane);
        for (std::size_t i = 0; i < plane; ++i) pos.push_back(c * 2 * plane + i);
    }
    return pos;
}

namespace {

constexpr char kDatasetMagic[4] = {'R', 'C', 'V', 'D'};
constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace

void save_dataset(const PackedDataset& ds, const std::string& path) {
    if (ds.layout_id != kPackLayoutId)
        throw DataError("save_dataset: unknown layout id '" + ds.layout_id + "'");
    std::size_t d = feature_dim(ds.height, ds.width);
    ByteWriter w;
    w.raw(kDatasetMagic, 4);
    w.u32(kDatasetVersion);
    w.u64(ds.height);
    w.u64(ds.width);
    w.str(ds.layout_id);
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        w.f64(ds.scaler.min[t]);
        w.f64(ds.scaler.max[t]);
    }
    for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
        w.u64(split->size());
        for (const auto& s : *split) {
            if (s.features.size() != d)
                throw DimensionError("save_dataset: sample feature length " +
                                     std::to_string(s.features.size()) + " != 6*H*W = " +
                                     std::to_string(d));
            w.str(s.battery_id);
            w.u64(static_cast<std::uint64_t>(s.label.eol));
            w.u64(static_cast<std::uint64_t>(s.label.ecl));
            for (double v : s.features) w.f64(v);
        }
    }
    write_file_atomic(path, w.bytes());
}

PackedDataset load_dataset(const std::string& path) {
    ByteReader r(read_file_bytes(path), "dataset");
    r.need(4, "magic");
    char magic[4];
    for (auto& ch : magic) ch = static_cast<char>(r.u8("magic"));
    if (std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw FormatError("dataset: bad magic at byte 0");
    std::uint32_t version = r.u32("version");
    if (version != kDatasetVersion)
        throw FormatError("dataset: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kDatasetVersion) + ")");
    PackedDataset ds;
    ds.height = r.u64("height");
    ds.width = r.u64("width");
    if (ds.height == 0 || ds.width == 0 || ds.height > (1u << 16) || ds.width > (1u << 16))
        throw FormatError("dataset: implausible H x W at byte 12");
    ds.layout_id = r.str("layout id");
    if (ds.layout_id != kPackLayoutId)
        throw FormatError("dataset: unknown layout id '" + ds.layout_id + "'");
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        ds.scaler.min[t] = r.f64("scaler min");
        ds.scaler.max[t] = r.f64("scaler max");
    }
    std::size_t d = feature_dim(ds.height, ds.width);
    for (auto* split : {&ds.train, &ds.val, &ds.test}) {
        std::uint64_t count = r.u64("split count");
        split->reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            QuasiVideoSample s;
            s.battery_id = r.str("battery id");
            std::uint64_t eol = r.u64("eol");
            std::uint64_t ecl = r.u64("ecl");
            if (eol == 0 || ecl == 0 || ecl > eol)
                throw FormatError("dataset: bad label " + std::to_string(eol) + "_" +
                                  std::to_string(ecl) + " at byte " + std::to_string(r.offset()));
            s.label = LabelKey{static_cast<std::int64_t>(eol), static_cast<std::int64_t>(ecl)};
            s.features.resize(d);
            for (auto& v : s.features) v = r.f64("features");
            split->push_back(std::move(s));
        }
    }
    r.expect_done();
    return ds;
}

SplitResult split_samples(std::size_t sample_count, const SplitSpec& spec) {
    if (sample_count == 0) throw DataError("split_samples: no samples");
    if (spec.battery_ref == 0 || spec.train_equiv == 0 || spec.train_equiv > spec.battery_ref)
        throw DataError("split_samples: bad pool ratio");
    if (spec.val_fraction < 0.0 || spec.val_fraction >= 1.0)
        throw DataError("split_samples: val_fraction must be in [0,1)");

    std::vector<std::size_t> order(sample_count);
    for (std::size_t i = 0; i < sample_count; ++i) order[i] = i;
    Rng rng(spec.seed);
    Rng first = rng.split(1);
    first.shuffle(order);

    std::size_t pool_n = sample_count * spec.train_equiv / spec.battery_ref;
    SplitResult res;
    res.test.assign(order.begin() + static_cast<std::ptrdiff_t>(pool_n), order.end());

    std::vector<std::size_t> pool(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(pool_n));
    Rng second = rng.split(2);
    second.shuffle(pool);
    std::size_t val_n = static_cast<std::size_t>(static_cast<double>(pool.size()) * spec.val_fraction);
    res.val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(val_n));
    res.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(val_n), pool.end());
    return res;
}

}  // namespace rcvae

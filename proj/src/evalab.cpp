#include "rcvae/evalab.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "rcvae/errors.hpp"

namespace rcvae {

namespace {

void check_pair(const std::vector<double>& x, const std::vector<double>& xhat) {
    if (x.size() != xhat.size())
        throw DimensionError("metric: length mismatch " + std::to_string(x.size()) + " vs " +
                             std::to_string(xhat.size()));
    if (x.empty()) throw DimensionError("metric: empty input");
}

}  // namespace

double mae(const std::vector<double>& x, const std::vector<double>& xhat) {
    check_pair(x, xhat);
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - xhat[i]);
    return acc / static_cast<double>(x.size());
}

double rmse(const std::vector<double>& x, const std::vector<double>& xhat) {
    check_pair(x, xhat);
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - xhat[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.size()));
}

std::string AblationSpec::name() const {
    switch (target) {
        case AblationTarget::None: return "None";
        case AblationTarget::Embedding: return "Embedding";
        case AblationTarget::EncoderLayer: return "Encoder_" + std::to_string(layer);
        case AblationTarget::DecoderLayer: return "Decoder_" + std::to_string(layer);
    }
    return "?";
}

void validate_ablation(const AblationSpec& spec, const RcvaeConfig& config) {
    switch (spec.target) {
        case AblationTarget::None:
        case AblationTarget::Embedding:
            return;
        case AblationTarget::EncoderLayer:
            if (spec.layer < 2 || spec.layer > config.enc_layers)
                throw SpecError("ablation: encoder layer " + std::to_string(spec.layer) +
                                " is not removable (valid: 2.." +
                                std::to_string(config.enc_layers) + ")");
            return;
        case AblationTarget::DecoderLayer:
            if (spec.layer < 1 || spec.layer + 1 > config.dec_layers)
                throw SpecError("ablation: decoder layer " + std::to_string(spec.layer) +
                                " is not removable (valid: 1.." +
                                std::to_string(config.dec_layers - 1) + ")");
            if (spec.mode == AblationSpec::Mode::SkipAtInference && spec.layer == 1 &&
                config.latent_dim + config.embed_dim != config.hidden)
                throw SpecError("ablation: Decoder_1 skip needs J+D == h (" +
                                std::to_string(config.latent_dim) + "+" +
                                std::to_string(config.embed_dim) +
                                " != " + std::to_string(config.hidden) + ")");
            return;
    }
    throw SpecError("ablation: unknown target");
}

namespace {

InferenceMods mods_for(const AblationSpec& spec) {
    InferenceMods mods;
    switch (spec.target) {
        case AblationTarget::None: break;
        case AblationTarget::Embedding: mods.zero_embedding = true; break;
        case AblationTarget::EncoderLayer: mods.skip_encoder = spec.layer; break;
        case AblationTarget::DecoderLayer: mods.skip_decoder = spec.layer; break;
    }
    return mods;
}

}  // namespace

MetricsReport report(const Checkpoint& ckpt, const std::vector<QuasiVideoSample>& test,
                     double match_weight, std::uint64_t report_seed,
                     const InferenceMods& mods, const TotalWeights& weights) {
    if (test.empty()) throw DataError("report: empty test set");
    const RcvaeParams& params = ckpt.params;

    MetricsReport rep;
    rep.sample_count = test.size();
    for (const auto& s : test)
        if (!ckpt.vocab.find(s.label)) ++rep.matched_labels;

    TrainSet set = make_train_set(test, ckpt.vocab, match_weight);
    Matrix v(params.config.embed_dim, set.indices.size());
    for (std::size_t b = 0; b < set.indices.size(); ++b)
        for (std::size_t d = 0; d < params.config.embed_dim; ++d)
            v.at(d, b) = params.embedding.at(set.indices[b], d);
    LatentStats stats = encode(params, set.features, v, mods);
    Rng eps_rng(report_seed);
    Matrix eps = eps_rng.normal_matrix(stats.mu.rows, stats.mu.cols);
    Matrix xhat = decode(params, reparameterize(stats, eps), v, mods);

    // Totals on scaled features, weighted per element type.
    std::array<std::vector<std::size_t>, kNumTypes> pos;
    for (std::size_t t = 0; t < kNumTypes; ++t)
        pos[t] = type_positions(static_cast<DataType>(t), ckpt.height, ckpt.width);
    std::vector<double> elem_w(set.features.rows, 1.0);
    for (std::size_t t = 0; t < kNumTypes; ++t)
        for (std::size_t i : pos[t]) elem_w[i] = weights.w[t];
    double wsum = 0, wabs = 0, wsq = 0;
    for (std::size_t b = 0; b < xhat.cols; ++b)
        for (std::size_t i = 0; i < xhat.rows; ++i) {
            double d = xhat.at(i, b) - set.features.at(i, b);
            wsum += elem_w[i];
            wabs += elem_w[i] * std::abs(d);
            wsq += elem_w[i] * d * d;
        }
    rep.mae_total = wabs / wsum;
    rep.rmse_total = std::sqrt(wsq / wsum);

    // Per-type blocks: unpack, inverse-scale, accumulate in physical units.
    std::array<double, kNumTypes> abs_acc{}, sq_acc{};
    std::array<std::size_t, kNumTypes> n_acc{};
    for (std::size_t b = 0; b < xhat.cols; ++b) {
        std::vector<double> got(xhat.rows), want(xhat.rows);
        for (std::size_t i = 0; i < xhat.rows; ++i) {
            got[i] = xhat.at(i, b);
            want[i] = set.features.at(i, b);
        }
        auto got_series = unpack(got, ckpt.height, ckpt.width);
        auto want_series = unpack(want, ckpt.height, ckpt.width);
        for (std::size_t t = 0; t < kNumTypes; ++t) {
            auto dt = static_cast<DataType>(t);
            for (std::size_t i = 0; i < got_series[t].size(); ++i) {
                double d = scale_invert(ckpt.scaler, dt, got_series[t][i]) -
                           scale_invert(ckpt.scaler, dt, want_series[t][i]);
                abs_acc[t] += std::abs(d);
                sq_acc[t] += d * d;
                ++n_acc[t];
            }
        }
    }
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        rep.per_type[t].mae = abs_acc[t] / static_cast<double>(n_acc[t]);
        rep.per_type[t].rmse = std::sqrt(sq_acc[t] / static_cast<double>(n_acc[t]));
    }
    return rep;
}

MetricsReport ablate(const Checkpoint& ckpt, const AblationSpec& spec,
                     const std::vector<QuasiVideoSample>& test, double match_weight,
                     std::uint64_t report_seed, const TotalWeights& weights) {
    if (spec.mode != AblationSpec::Mode::SkipAtInference)
        throw SpecError("ablate: retrain mode goes through ablate_retrain");
    validate_ablation(spec, ckpt.params.config);
    MetricsReport rep = report(ckpt, test, match_weight, report_seed, mods_for(spec), weights);
    rep.detach = spec.name();
    return rep;
}

MetricsReport ablate_retrain(const AblationSpec& spec,
                             const std::vector<QuasiVideoSample>& train_samples,
                             const std::vector<QuasiVideoSample>& val_samples,
                             const std::vector<QuasiVideoSample>& test,
                             const RcvaeConfig& mconfig, const TrainConfig& tconfig,
                             const ScalerParams& scaler, std::size_t height, std::size_t width,
                             double match_weight, std::uint64_t report_seed) {
    validate_ablation(spec, mconfig);
    RcvaeConfig reduced = mconfig;
    if (spec.target == AblationTarget::EncoderLayer) reduced.enc_layers -= 1;
    if (spec.target == AblationTarget::DecoderLayer) reduced.dec_layers -= 1;
    TrainResult tr = train(train_samples, val_samples, reduced, tconfig, scaler, height, width,
                           match_weight);
    InferenceMods mods;
    if (spec.target == AblationTarget::Embedding) mods.zero_embedding = true;
    MetricsReport rep = report(tr.checkpoint, test, match_weight, report_seed, mods);
    rep.detach = spec.name();
    return rep;
}

std::vector<AblationSpec> sweep_specs(const RcvaeConfig& config) {
    std::vector<AblationSpec> specs;
    auto add_if_valid = [&](AblationTarget target, std::size_t layer) {
        AblationSpec s;
        s.target = target;
        s.layer = layer;
        try {
            validate_ablation(s, config);
        } catch (const SpecError&) {
            return;
        }
        specs.push_back(s);
    };
    add_if_valid(AblationTarget::DecoderLayer, 1);
    std::size_t top = std::max(config.enc_layers, config.dec_layers);
    for (std::size_t k = 2; k <= top; ++k) {
        add_if_valid(AblationTarget::DecoderLayer, k);
        add_if_valid(AblationTarget::EncoderLayer, k);
    }
    specs.push_back(AblationSpec{});  // None
    AblationSpec emb;
    emb.target = AblationTarget::Embedding;
    specs.push_back(emb);
    return specs;
}

std::vector<MetricsReport> ablation_sweep(const Checkpoint& ckpt,
                                          const std::vector<QuasiVideoSample>& test,
                                          double match_weight, std::uint64_t report_seed,
                                          std::size_t workers) {
    std::vector<AblationSpec> specs = sweep_specs(ckpt.params.config);
    std::vector<MetricsReport> rows(specs.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i)
            rows[i] = ablate(ckpt, specs[i], test, match_weight, report_seed);
        return rows;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(workers);
    for (std::size_t w = 0; w < std::min(workers, specs.size()); ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < specs.size(); i += workers)
                    rows[i] = ablate(ckpt, specs[i], test, match_weight, report_seed);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return rows;
}

std::string metrics_csv(const std::vector<MetricsReport>& rows) {
    std::ostringstream out;
    out << "detach,mae_total,rmse_total,mae_V,rmse_V,mae_I,rmse_I,mae_T,rmse_T,mae_Qc,rmse_Qc\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        out << r.detach << ',' << num(r.mae_total) << ',' << num(r.rmse_total);
        for (std::size_t t = 0; t < kNumTypes; ++t)
            out << ',' << num(r.per_type[t].mae) << ',' << num(r.per_type[t].rmse);
        out << '\n';
    }
    return out.str();
}

}  // namespace rcvae

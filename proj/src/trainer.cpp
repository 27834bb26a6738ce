#include "rcvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rcvae/bytes.hpp"
#include "rcvae/errors.hpp"

namespace rcvae {

LossParts loss_total(const Matrix& xhat, const Matrix& x, const LatentStats& stats,
                     std::size_t k) {
    if (!xhat.same_shape(x))
        throw DimensionError("loss_total: target shape " + shape_str(x) + " != output " +
                             shape_str(xhat));
    if (!stats.mu.same_shape(stats.logvar) || stats.mu.cols != x.cols)
        throw DimensionError("loss_total: stats shape " + shape_str(stats.mu) +
                             " inconsistent with batch of " + std::to_string(x.cols));
    if (k < 1) throw DimensionError("loss_total: K must be >= 1");
    ensure_finite(xhat, "loss_total xhat");
    ensure_finite(stats.mu, "loss_total mu");
    ensure_finite(stats.logvar, "loss_total logvar");

    LossParts parts;
    double se = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        double d = xhat.data[i] - x.data[i];
        se += d * d;
    }
    parts.mse = se / (static_cast<double>(k) * static_cast<double>(x.rows));

    double kld = 0;
    for (std::size_t i = 0; i < stats.mu.data.size(); ++i) {
        double mu = stats.mu.data[i], lv = stats.logvar.data[i];
        kld += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
    }
    parts.kld = kld;
    parts.total = parts.mse + parts.kld / static_cast<double>(k);
    return parts;
}

bool EarlyStopper::observe(double value, std::size_t epoch) {
    if (value < best) {
        best = value;
        best_epoch = epoch;
        counter = 0;
        return true;
    }
    ++counter;
    return false;
}

void TrainConfig::validate() const {
    if (batch < 1) throw ConfigError("train config: batch size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
    if (early_stop && patience >= max_epochs)
        throw ConfigError("train config: patience must be < max_epochs");
    if (lr <= 0) throw ConfigError("train config: learning rate must be positive");
    if (merge_val && (holdout_fraction <= 0.0 || holdout_fraction >= 1.0))
        throw ConfigError("train config: holdout_fraction must be in (0,1)");
}

TrainSet make_train_set(const std::vector<QuasiVideoSample>& samples, const LabelVocab& vocab,
                        double match_weight) {
    if (samples.empty()) throw DataError("make_train_set: no samples");
    std::size_t d = samples[0].features.size();
    TrainSet set;
    set.features = Matrix(d, samples.size());
    set.indices.resize(samples.size());
    for (std::size_t b = 0; b < samples.size(); ++b) {
        if (samples[b].features.size() != d)
            throw DimensionError("make_train_set: sample " + std::to_string(b) +
                                 " has feature length " +
                                 std::to_string(samples[b].features.size()) + ", expected " +
                                 std::to_string(d));
        for (std::size_t i = 0; i < d; ++i) set.features.at(i, b) = samples[b].features[i];
        auto idx = vocab.find(samples[b].label);
        set.indices[b] = idx ? *idx : match_similar(vocab, samples[b].label, match_weight);
    }
    return set;
}

double validate(const RcvaeParams& params, const TrainSet& set, std::uint64_t eps_seed) {
    if (set.indices.empty()) throw DataError("validate: empty set");
    Matrix v(params.config.embed_dim, set.indices.size());
    for (std::size_t b = 0; b < set.indices.size(); ++b)
        for (std::size_t d = 0; d < params.config.embed_dim; ++d)
            v.at(d, b) = params.embedding.at(set.indices[b], d);
    LatentStats stats = encode(params, set.features, v);
    Rng eps_rng(eps_seed);
    Matrix eps = eps_rng.normal_matrix(stats.mu.rows, stats.mu.cols);
    Matrix xhat = decode(params, reparameterize(stats, eps), v);
    double acc = 0;
    for (std::size_t i = 0; i < xhat.data.size(); ++i)
        acc += std::abs(xhat.data[i] - set.features.data[i]);
    return acc / static_cast<double>(xhat.data.size());
}

TrainResult train(const std::vector<QuasiVideoSample>& train_samples,
                  const std::vector<QuasiVideoSample>& val_samples,
                  const RcvaeConfig& mconfig, const TrainConfig& tconfig,
                  const ScalerParams& scaler, std::size_t height, std::size_t width,
                  double match_weight) {
    mconfig.validate();
    tconfig.validate();
    if (train_samples.empty()) throw DataError("train: empty training set");

    std::vector<QuasiVideoSample> tr = train_samples;
    std::vector<QuasiVideoSample> va = val_samples;
    Rng root(tconfig.seed);
    if (tconfig.merge_val) {
        // Final fit: fold the validation samples in, then carve a small
        // holdout back out as the stopping signal.
        tr.insert(tr.end(), va.begin(), va.end());
        va.clear();
        std::vector<std::size_t> order(tr.size());
        for (std::size_t i = 0; i < tr.size(); ++i) order[i] = i;
        Rng hs = root.split(7);
        hs.shuffle(order);
        std::size_t hold = std::max<std::size_t>(
            1, static_cast<std::size_t>(static_cast<double>(tr.size()) * tconfig.holdout_fraction));
        if (hold >= tr.size()) throw DataError("train: holdout swallowed the training set");
        std::vector<QuasiVideoSample> merged;
        merged.reserve(tr.size() - hold);
        for (std::size_t i = hold; i < order.size(); ++i) merged.push_back(tr[order[i]]);
        for (std::size_t i = 0; i < hold; ++i) va.push_back(tr[order[i]]);
        tr = std::move(merged);
    }
    if (va.empty()) throw DataError("train: empty validation set");

    std::vector<LabelKey> train_labels;
    train_labels.reserve(tr.size());
    for (const auto& s : tr) train_labels.push_back(s.label);
    LabelVocab vocab = LabelVocab::build(train_labels);

    TrainSet train_set = make_train_set(tr, vocab, match_weight);
    TrainSet val_set = make_train_set(va, vocab, match_weight);
    if (train_set.features.rows != mconfig.d_x)
        throw DimensionError("train: packed feature length " +
                             std::to_string(train_set.features.rows) + " != configured d_x " +
                             std::to_string(mconfig.d_x));

    Rng init_rng = root.split(10);
    RcvaeParams params = init_params(mconfig, vocab.size(), init_rng);
    AdamConfig acfg;
    acfg.learning_rate = tconfig.lr;
    auto refs = params.param_refs();
    AdamState adam(acfg, refs);

    const std::uint64_t val_eps_seed = root.split(20).seed();
    const std::size_t n = train_set.indices.size();

    TrainState state;
    EarlyStopper stopper;
    stopper.patience = tconfig.patience;
    RcvaeParams best = params;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= tconfig.max_epochs; ++epoch) {
        Rng shuffle_rng = root.split(1000 + epoch);
        shuffle_rng.shuffle(order);
        Rng eps_rng = root.split(2000 + epoch);

        double epoch_loss = 0;
        for (std::size_t start = 0; start < n; start += tconfig.batch) {
            std::size_t k = std::min(tconfig.batch, n - start);
            Matrix xb(train_set.features.rows, k);
            std::vector<std::size_t> idx(k);
            for (std::size_t b = 0; b < k; ++b) {
                std::size_t src = order[start + b];
                idx[b] = train_set.indices[src];
                for (std::size_t i = 0; i < xb.rows; ++i)
                    xb.at(i, b) = train_set.features.at(i, src);
            }
            Matrix eps = eps_rng.normal_matrix(mconfig.latent_dim, k);
            ForwardResult res = forward(params, xb, idx, eps);
            LossParts parts = loss_total(res.xhat, xb, res.stats, k);
            if (!std::isfinite(parts.total))
                throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));
            epoch_loss += parts.total * static_cast<double>(k);
            std::vector<Matrix> grads = backward(params, res, xb);
            adam.step(refs, grads);
        }
        state.train_loss.push_back(epoch_loss / static_cast<double>(n));

        double vm = validate(params, val_set, val_eps_seed);
        if (!std::isfinite(vm))
            throw NumericError("train: validation diverged at epoch " + std::to_string(epoch));
        state.val_mae.push_back(vm);
        state.epochs_run = epoch;
        if (stopper.observe(vm, epoch)) best = params;
        if (tconfig.early_stop && stopper.should_stop()) {
            state.stopped_early = true;
            break;
        }
    }
    state.best_epoch = stopper.best_epoch;
    state.best_val_mae = stopper.best;

    TrainResult result;
    result.checkpoint.params = std::move(best);
    result.checkpoint.vocab = vocab;
    result.checkpoint.scaler = scaler;
    result.checkpoint.height = height;
    result.checkpoint.width = width;
    result.checkpoint.seed = tconfig.seed;
    result.checkpoint.history.epochs_run = state.epochs_run;
    result.checkpoint.history.best_epoch = state.best_epoch;
    result.checkpoint.history.best_val_mae = state.best_val_mae;
    result.checkpoint.history.stopped_early = state.stopped_early;
    result.state = std::move(state);
    return result;
}

// --- checkpoint serialization -----------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'C', 'V', 'A'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    const RcvaeConfig& c = ckpt.params.config;
    w.u64(c.d_x);
    w.u64(c.embed_dim);
    w.u64(c.latent_dim);
    w.u64(c.enc_layers);
    w.u64(c.dec_layers);
    w.u64(c.hidden);
    RcvaeParams& p = const_cast<RcvaeParams&>(ckpt.params);
    for (const ParamRef& ref : p.param_refs()) w.matrix(*ref.value);
    w.u64(ckpt.vocab.size());
    for (const LabelKey& key : ckpt.vocab.keys()) w.str(key.str());
    for (std::size_t t = 0; t < kNumTypes; ++t) {
        w.f64(ckpt.scaler.min[t]);
        w.f64(ckpt.scaler.max[t]);
    }
    w.str(ckpt.rng_algorithm);
    w.u64(ckpt.seed);
    w.u64(ckpt.height);
    w.u64(ckpt.width);
    w.str(ckpt.layout_id);
    w.u64(ckpt.history.epochs_run);
    w.u64(ckpt.history.best_epoch);
    w.f64(ckpt.history.best_val_mae);
    w.u8(ckpt.history.stopped_early ? 1 : 0);

    write_file_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::string& path) {
    ByteReader r(read_file_bytes(path), "checkpoint");

    r.need(4, "magic");
    char magic[4];
    for (auto& ch : magic) ch = static_cast<char>(r.u8("magic"));
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic at byte 0");
    std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kVersion) + ")");

    RcvaeConfig c;
    c.d_x = r.u64("d_x");
    c.embed_dim = r.u64("embed_dim");
    c.latent_dim = r.u64("latent_dim");
    c.enc_layers = r.u64("enc_layers");
    c.dec_layers = r.u64("dec_layers");
    c.hidden = r.u64("hidden");
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: bad config: ") + e.what());
    }

    Checkpoint ckpt;
    // Rebuild the skeleton with a throwaway RNG, then overwrite every matrix
    // from the file; vocab size comes later, so start from 1 row and replace.
    Rng dummy(0);
    ckpt.params = init_params(c, 1, dummy);
    for (const ParamRef& ref : ckpt.params.param_refs()) {
        Matrix m = r.matrix(ref.path.c_str());
        if (ref.path != "embedding" && !m.same_shape(*ref.value))
            throw FormatError("checkpoint: shape mismatch for " + ref.path + ": file has " +
                              shape_str(m) + ", config implies " + shape_str(*ref.value));
        if (ref.path == "embedding" && m.cols != c.embed_dim)
            throw FormatError("checkpoint: embedding width " + std::to_string(m.cols) +
                              " != config embed_dim " + std::to_string(c.embed_dim));
        *ref.value = std::move(m);
    }

    std::uint64_t vocab_n = r.u64("vocab count");
    if (vocab_n == 0) throw FormatError("checkpoint: empty vocab");
    std::vector<LabelKey> keys;
    keys.reserve(vocab_n);
    for (std::uint64_t i = 0; i < vocab_n; ++i) {
        std::string s = r.str("vocab entry");
        try {
            keys.push_back(parse_label(s));
        } catch (const ParseError& e) {
            throw FormatError(std::string("checkpoint: bad vocab entry: ") + e.what());
        }
    }
    ckpt.vocab = LabelVocab::build(keys);
    if (ckpt.vocab.size() != vocab_n)
        throw FormatError("checkpoint: duplicate vocab entries");
    if (ckpt.params.embedding.rows != vocab_n)
        throw FormatError("checkpoint: embedding rows " +
                          std::to_string(ckpt.params.embedding.rows) + " != vocab size " +
                          std::to_string(vocab_n));

    for (std::size_t t = 0; t < kNumTypes; ++t) {
        ckpt.scaler.min[t] = r.f64("scaler min");
        ckpt.scaler.max[t] = r.f64("scaler max");
    }
    ckpt.rng_algorithm = r.str("rng algorithm");
    if (ckpt.rng_algorithm != Rng::kAlgorithm)
        throw FormatError("checkpoint: unknown rng algorithm '" + ckpt.rng_algorithm + "'");
    ckpt.seed = r.u64("seed");
    ckpt.height = r.u64("height");
    ckpt.width = r.u64("width");
    if (feature_dim(ckpt.height, ckpt.width) != c.d_x)
        throw FormatError("checkpoint: pack layout " + std::to_string(ckpt.height) + "x" +
                          std::to_string(ckpt.width) + " inconsistent with d_x " +
                          std::to_string(c.d_x));
    ckpt.layout_id = r.str("layout id");
    if (ckpt.layout_id != kPackLayoutId)
        throw FormatError("checkpoint: unknown pack layout '" + ckpt.layout_id + "'");
    ckpt.history.epochs_run = r.u64("epochs_run");
    ckpt.history.best_epoch = r.u64("best_epoch");
    ckpt.history.best_val_mae = r.f64("best_val_mae");
    ckpt.history.stopped_early = r.u8("stopped_early") != 0;
    r.expect_done();
    return ckpt;
}

}  // namespace rcvae

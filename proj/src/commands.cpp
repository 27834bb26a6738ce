#include "rcvae/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rcvae/bytes.hpp"
#include "rcvae/errors.hpp"
#include "rcvae/evalab.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rcvae {

void RunConfig::validate() const {
    if (run_name.empty() || out_root.empty())
        throw ConfigError("config: run_name and out_root must be nonempty");
    if (height * width != seq_len)
        throw ConfigError("config: H*W = " + std::to_string(height * width) +
                          " != sequence length " + std::to_string(seq_len));
    if (!synthetic && (data_csv.empty() || metadata_csv.empty()))
        throw ConfigError("config: csv source needs data_csv and metadata_csv");
    if (hpo_method != "gp_ei" && hpo_method != "random")
        throw ConfigError("config: hpo method must be gp_ei or random");
    if (match_weight < 0.0 || match_weight > 1.0)
        throw ConfigError("config: match_weight must be in [0,1]");
    if (workers < 1) throw ConfigError("config: workers must be >= 1");
    RcvaeConfig mc{feature_dim(height, width), embed_dim, latent_dim,
                   enc_layers, dec_layers, hidden};
    mc.validate();
    train.validate();
    space.validate();
}

namespace {

void get_to(const json& obj, const char* key, std::size_t& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number_unsigned())
        throw ConfigError(std::string("config: ") + key + " must be a non-negative integer");
    out = obj[key].get<std::size_t>();
}

void get_to(const json& obj, const char* key, std::int64_t& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number_integer())
        throw ConfigError(std::string("config: ") + key + " must be an integer");
    out = obj[key].get<std::int64_t>();
}

void get_to(const json& obj, const char* key, double& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number())
        throw ConfigError(std::string("config: ") + key + " must be a number");
    out = obj[key].get<double>();
}

void get_to(const json& obj, const char* key, bool& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_boolean())
        throw ConfigError(std::string("config: ") + key + " must be a boolean");
    out = obj[key].get<bool>();
}

void get_to(const json& obj, const char* key, std::string& out) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_string())
        throw ConfigError(std::string("config: ") + key + " must be a string");
    out = obj[key].get<std::string>();
}

void reject_unknown(const json& obj, const char* where, std::set<std::string> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError(std::string("config: unknown key '") + it.key() + "' in " + where);
}

}  // namespace

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");

    RunConfig c;
    reject_unknown(root, "top level",
                   {"run_name", "out_root", "data", "pack", "split", "model", "train", "hpo",
                    "match_weight", "analyze", "report_seed", "workers"});
    get_to(root, "run_name", c.run_name);
    get_to(root, "out_root", c.out_root);
    get_to(root, "match_weight", c.match_weight);
    get_to(root, "report_seed", c.report_seed);
    get_to(root, "workers", c.workers);

    if (root.contains("data")) {
        const json& d = root["data"];
        reject_unknown(d, "data",
                       {"synthetic", "batteries", "early_cycles", "eol_min", "eol_max",
                        "points_per_cycle", "data_csv", "metadata_csv"});
        get_to(d, "synthetic", c.synthetic);
        get_to(d, "batteries", c.synth.n_batteries);
        get_to(d, "early_cycles", c.synth.n_cycles);
        get_to(d, "eol_min", c.synth.eol_min);
        get_to(d, "eol_max", c.synth.eol_max);
        get_to(d, "points_per_cycle", c.synth.points_per_cycle);
        get_to(d, "data_csv", c.data_csv);
        get_to(d, "metadata_csv", c.metadata_csv);
    }
    if (root.contains("pack")) {
        const json& p = root["pack"];
        reject_unknown(p, "pack", {"length", "height", "width"});
        get_to(p, "length", c.seq_len);
        get_to(p, "height", c.height);
        get_to(p, "width", c.width);
    }
    if (root.contains("split")) {
        const json& s = root["split"];
        reject_unknown(s, "split", {"seed", "train_equiv", "battery_ref", "val_fraction"});
        get_to(s, "seed", c.split.seed);
        get_to(s, "train_equiv", c.split.train_equiv);
        get_to(s, "battery_ref", c.split.battery_ref);
        get_to(s, "val_fraction", c.split.val_fraction);
    }
    if (root.contains("model")) {
        const json& m = root["model"];
        reject_unknown(m, "model",
                       {"embed_dim", "latent_dim", "enc_layers", "dec_layers", "hidden"});
        get_to(m, "embed_dim", c.embed_dim);
        get_to(m, "latent_dim", c.latent_dim);
        get_to(m, "enc_layers", c.enc_layers);
        get_to(m, "dec_layers", c.dec_layers);
        get_to(m, "hidden", c.hidden);
    }
    if (root.contains("train")) {
        const json& t = root["train"];
        reject_unknown(t, "train",
                       {"max_epochs", "patience", "batch", "lr", "seed", "early_stop",
                        "merge_val", "holdout_fraction"});
        get_to(t, "max_epochs", c.train.max_epochs);
        get_to(t, "patience", c.train.patience);
        get_to(t, "batch", c.train.batch);
        get_to(t, "lr", c.train.lr);
        get_to(t, "seed", c.train.seed);
        get_to(t, "early_stop", c.train.early_stop);
        get_to(t, "merge_val", c.train.merge_val);
        get_to(t, "holdout_fraction", c.train.holdout_fraction);
    }
    if (root.contains("hpo")) {
        const json& h = root["hpo"];
        reject_unknown(h, "hpo",
                       {"budget", "trial_epochs", "patience", "seed", "method", "space"});
        get_to(h, "budget", c.hpo_budget);
        get_to(h, "trial_epochs", c.hpo_trial_epochs);
        get_to(h, "patience", c.hpo_patience);
        get_to(h, "seed", c.hpo_seed);
        get_to(h, "method", c.hpo_method);
        if (h.contains("space")) {
            const json& s = h["space"];
            reject_unknown(s, "hpo.space",
                           {"eta_min", "eta_max", "h_min", "h_max", "j_min", "j_max", "d_min",
                            "d_max", "k_min", "k_max"});
            get_to(s, "eta_min", c.space.eta_min);
            get_to(s, "eta_max", c.space.eta_max);
            get_to(s, "h_min", c.space.h_min);
            get_to(s, "h_max", c.space.h_max);
            get_to(s, "j_min", c.space.j_min);
            get_to(s, "j_max", c.space.j_max);
            get_to(s, "d_min", c.space.d_min);
            get_to(s, "d_max", c.space.d_max);
            get_to(s, "k_min", c.space.k_min);
            get_to(s, "k_max", c.space.k_max);
        }
    }
    if (root.contains("analyze")) {
        const json& a = root["analyze"];
        reject_unknown(a, "analyze",
                       {"perplexity", "iterations", "clusters", "seed", "learning_rate"});
        get_to(a, "perplexity", c.tsne.perplexity);
        get_to(a, "iterations", c.tsne.iterations);
        get_to(a, "learning_rate", c.tsne.learning_rate);
        get_to(a, "clusters", c.clusters);
        get_to(a, "seed", c.tsne.seed);
    }
    c.validate();
    return c;
}

void apply_master_seed(RunConfig& config, std::uint64_t seed) {
    Rng root(seed);
    config.split.seed = root.split(1).seed();
    config.train.seed = root.split(2).seed();
    config.hpo_seed = root.split(3).seed();
    config.report_seed = root.split(4).seed();
    config.tsne.seed = root.split(5).seed();
}

std::string config_json(const RunConfig& c) {
    json root;
    root["run_name"] = c.run_name;
    root["out_root"] = c.out_root;
    root["data"] = {{"synthetic", c.synthetic},
                    {"batteries", c.synth.n_batteries},
                    {"early_cycles", c.synth.n_cycles},
                    {"eol_min", c.synth.eol_min},
                    {"eol_max", c.synth.eol_max},
                    {"points_per_cycle", c.synth.points_per_cycle},
                    {"data_csv", c.data_csv},
                    {"metadata_csv", c.metadata_csv}};
    root["pack"] = {{"length", c.seq_len}, {"height", c.height}, {"width", c.width}};
    root["split"] = {{"seed", c.split.seed},
                     {"train_equiv", c.split.train_equiv},
                     {"battery_ref", c.split.battery_ref},
                     {"val_fraction", c.split.val_fraction}};
    root["model"] = {{"embed_dim", c.embed_dim},
                     {"latent_dim", c.latent_dim},
                     {"enc_layers", c.enc_layers},
                     {"dec_layers", c.dec_layers},
                     {"hidden", c.hidden}};
    root["train"] = {{"max_epochs", c.train.max_epochs},
                     {"patience", c.train.patience},
                     {"batch", c.train.batch},
                     {"lr", c.train.lr},
                     {"seed", c.train.seed},
                     {"early_stop", c.train.early_stop},
                     {"merge_val", c.train.merge_val},
                     {"holdout_fraction", c.train.holdout_fraction}};
    root["hpo"] = {{"budget", c.hpo_budget},
                   {"trial_epochs", c.hpo_trial_epochs},
                   {"patience", c.hpo_patience},
                   {"seed", c.hpo_seed},
                   {"method", c.hpo_method},
                   {"space",
                    {{"eta_min", c.space.eta_min},
                     {"eta_max", c.space.eta_max},
                     {"h_min", c.space.h_min},
                     {"h_max", c.space.h_max},
                     {"j_min", c.space.j_min},
                     {"j_max", c.space.j_max},
                     {"d_min", c.space.d_min},
                     {"d_max", c.space.d_max},
                     {"k_min", c.space.k_min},
                     {"k_max", c.space.k_max}}}};
    root["match_weight"] = c.match_weight;
    root["analyze"] = {{"perplexity", c.tsne.perplexity},
                       {"iterations", c.tsne.iterations},
                       {"learning_rate", c.tsne.learning_rate},
                       {"clusters", c.clusters},
                       {"seed", c.tsne.seed}};
    root["report_seed"] = c.report_seed;
    root["workers"] = c.workers;
    return root.dump(2) + "\n";
}

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, std::vector<char>(text.begin(), text.end()));
}

// Timestamps live here and only here; every other artifact is byte-stable
// across reruns.
void log_line(const RunConfig& config, const std::string& msg) {
    std::ofstream log(config.out_dir() + "/log.txt", std::ios::app);
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    log << stamp << "Z " << msg << '\n';
}

void prepare_run_dir(const RunConfig& config) {
    fs::create_directories(config.out_dir());
    write_text_atomic(config.out_dir() + "/effective_config.json", config_json(config));
}

std::string num_str(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

RcvaeConfig model_config(const RunConfig& c) {
    return RcvaeConfig{feature_dim(c.height, c.width), c.embed_dim, c.latent_dim,
                       c.enc_layers, c.dec_layers, c.hidden};
}

std::string dataset_path(const RunConfig& c) { return c.out_dir() + "/dataset.bin"; }
std::string checkpoint_path(const RunConfig& c) { return c.out_dir() + "/checkpoint.rcva"; }

// Best hyperparameters handed from cmd_hpo to cmd_train.
std::string hparams_path(const RunConfig& c) { return c.out_dir() + "/best_hparams.json"; }

}  // namespace

void cmd_preprocess(const RunConfig& config) {
    prepare_run_dir(config);

    std::vector<BatteryRecord> records;
    if (config.synthetic) {
        Rng rng = Rng(config.split.seed).split(5);
        records = synth_generate(rng, config.synth);
    } else {
        records = load_csv(config.data_csv, config.metadata_csv);
        std::size_t dropped = clean_records(records);
        if (dropped) log_line(config, "preprocess: dropped " + std::to_string(dropped) +
                                          " unusable cycles");
    }
    if (records.empty()) throw DataError("preprocess: no batteries in source");

    // Resample every early cycle, keeping battery/cycle provenance.
    struct Raw {
        std::array<std::vector<double>, kNumTypes> series;
        LabelKey label;
        std::string battery_id;
    };
    std::vector<Raw> raws;
    for (const auto& rec : records) {
        for (const auto& cyc : rec.cycles) {
            // Early-cycle cut for csv sources; the generator already stops at n.
            if (!config.synthetic &&
                cyc.cycle_index > static_cast<std::int64_t>(config.synth.n_cycles))
                continue;
            Raw r;
            r.series = resample(cyc, config.seq_len);
            r.label = LabelKey{rec.eol, cyc.cycle_index};
            r.battery_id = rec.battery_id;
            raws.push_back(std::move(r));
        }
    }
    if (raws.empty()) throw DataError("preprocess: no cycles survived the early-cycle cut");

    SplitResult split = split_samples(raws.size(), config.split);

    // Scaler fitted on the train+val pool only; test stays untouched.
    std::vector<std::array<std::vector<double>, kNumTypes>> pool;
    pool.reserve(split.train.size() + split.val.size());
    for (std::size_t i : split.train) pool.push_back(raws[i].series);
    for (std::size_t i : split.val) pool.push_back(raws[i].series);
    ScalerParams scaler = scale_fit(pool);

    PackedDataset ds;
    ds.height = config.height;
    ds.width = config.width;
    ds.scaler = scaler;
    std::size_t clipped = 0;
    auto pack_one = [&](std::size_t i) {
        std::array<std::vector<double>, kNumTypes> scaled;
        for (std::size_t t = 0; t < kNumTypes; ++t) {
            scaled[t].resize(raws[i].series[t].size());
            for (std::size_t p = 0; p < scaled[t].size(); ++p)
                scaled[t][p] = scale_apply(scaler, static_cast<DataType>(t),
                                           raws[i].series[t][p], &clipped);
        }
        return pack(scaled, raws[i].label, raws[i].battery_id, config.height, config.width);
    };
    for (std::size_t i : split.train) ds.train.push_back(pack_one(i));
    for (std::size_t i : split.val) ds.val.push_back(pack_one(i));
    for (std::size_t i : split.test) ds.test.push_back(pack_one(i));
    save_dataset(ds, dataset_path(config));

    // Manifest rows in original sample order.
    std::vector<const char*> tag(raws.size(), "train");
    for (std::size_t i : split.val) tag[i] = "val";
    for (std::size_t i : split.test) tag[i] = "test";
    std::ostringstream manifest;
    manifest << "sample,battery_id,eol,ecl,split\n";
    for (std::size_t i = 0; i < raws.size(); ++i)
        manifest << i << ',' << raws[i].battery_id << ',' << raws[i].label.eol << ','
                 << raws[i].label.ecl << ',' << tag[i] << '\n';
    write_text_atomic(config.out_dir() + "/manifest.csv", manifest.str());

    std::ostringstream sc;
    sc << "type,min,max\n";
    for (std::size_t t = 0; t < kNumTypes; ++t)
        sc << data_type_name(static_cast<DataType>(t)) << ',' << num_str(scaler.min[t]) << ','
           << num_str(scaler.max[t]) << '\n';
    write_text_atomic(config.out_dir() + "/scaler.csv", sc.str());

    log_line(config, "preprocess: " + std::to_string(raws.size()) + " samples -> " +
                         std::to_string(ds.train.size()) + "/" + std::to_string(ds.val.size()) +
                         "/" + std::to_string(ds.test.size()) + " train/val/test, " +
                         std::to_string(clipped) + " values clipped");
}

void cmd_hpo(const RunConfig& config) {
    prepare_run_dir(config);
    PackedDataset ds = load_dataset(dataset_path(config));

    HpoProblem problem;
    problem.train_samples = ds.train;
    problem.val_samples = ds.val;
    problem.scaler = ds.scaler;
    problem.height = ds.height;
    problem.width = ds.width;
    problem.enc_layers = config.enc_layers;
    problem.dec_layers = config.dec_layers;
    problem.trial_epochs = config.hpo_trial_epochs;
    problem.patience = config.hpo_patience;
    problem.match_weight = config.match_weight;

    HpoMethod method = config.hpo_method == "random" ? HpoMethod::Random : HpoMethod::GpEi;
    HpoResult result = run_hpo(problem, config.space, config.hpo_budget, config.hpo_seed, method);
    write_text_atomic(config.out_dir() + "/hpo_trials.csv", trials_csv(result.trials));

    json best;
    best["eta"] = result.best.eta;
    best["h"] = result.best.h;
    best["J"] = result.best.j;
    best["D"] = result.best.d;
    best["K"] = result.best.k;
    best["val_mae"] = result.best_val_mae;
    write_text_atomic(hparams_path(config), best.dump(2) + "\n");
    log_line(config, "hpo: best val MAE " + num_str(result.best_val_mae) + " at eta=" +
                         num_str(result.best.eta) + " h=" + std::to_string(result.best.h) +
                         " J=" + std::to_string(result.best.j) + " D=" +
                         std::to_string(result.best.d) + " K=" + std::to_string(result.best.k));
}

void cmd_train(const RunConfig& config) {
    prepare_run_dir(config);
    PackedDataset ds = load_dataset(dataset_path(config));

    RcvaeConfig mc = model_config(config);
    TrainConfig tc = config.train;
    if (fs::exists(hparams_path(config))) {
        std::ifstream in(hparams_path(config));
        json best = json::parse(in);
        mc.embed_dim = best.at("D").get<std::size_t>();
        mc.latent_dim = best.at("J").get<std::size_t>();
        mc.hidden = best.at("h").get<std::size_t>();
        tc.lr = best.at("eta").get<double>();
        tc.batch = best.at("K").get<std::size_t>();
        log_line(config, "train: adopting tuned hyperparameters from best_hparams.json");
    }

    TrainResult result = train(ds.train, ds.val, mc, tc, ds.scaler, ds.height, ds.width,
                               config.match_weight);
    save_checkpoint(result.checkpoint, checkpoint_path(config));
    log_line(config, "train: " + std::to_string(result.state.epochs_run) + " epochs, best " +
                         num_str(result.state.best_val_mae) + " at epoch " +
                         std::to_string(result.state.best_epoch) +
                         (result.state.stopped_early ? " (early stop)" : ""));
}

void cmd_generate(const RunConfig& config, std::int64_t eol, std::int64_t ecl,
                  std::size_t count) {
    prepare_run_dir(config);
    Checkpoint ckpt = load_checkpoint(checkpoint_path(config));
    LabelKey query{eol, ecl};
    if (eol < 1 || ecl < 1 || ecl > eol)
        throw ConfigError("generate: need 1 <= ecl <= eol");
    if (count < 1) throw ConfigError("generate: count must be >= 1");

    Rng rng(config.report_seed);
    LabelKey matched;
    Matrix batch = generate(ckpt.params, ckpt.vocab, query, count, rng, config.match_weight,
                            &matched);
    if (!(matched == query))
        log_line(config, "generate: unseen label " + query.str() + " matched to " +
                             matched.str());

    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> feat(batch.rows);
        for (std::size_t i = 0; i < batch.rows; ++i) feat[i] = batch.at(i, s);
        auto series = unpack(feat, ckpt.height, ckpt.width);
        std::ostringstream csv;
        csv << "t_index,voltage_V,current_rate_C,temperature_degC,charge_capacity_Ah\n";
        for (std::size_t i = 0; i < series[0].size(); ++i) {
            csv << i;
            for (std::size_t t = 0; t < kNumTypes; ++t)
                csv << ',' << num_str(scale_invert(ckpt.scaler, static_cast<DataType>(t),
                                                   series[t][i]));
            csv << '\n';
        }
        char name[96];
        std::snprintf(name, sizeof name, "/generated_%lld_%lld_s%03zu.csv",
                      static_cast<long long>(eol), static_cast<long long>(ecl), s);
        write_text_atomic(config.out_dir() + name, csv.str());
    }
    log_line(config, "generate: " + std::to_string(count) + " samples for " + query.str() +
                         " via " + matched.str());
}

void cmd_evaluate(const RunConfig& config) {
    prepare_run_dir(config);
    Checkpoint ckpt = load_checkpoint(checkpoint_path(config));
    PackedDataset ds = load_dataset(dataset_path(config));
    if (ds.test.empty()) throw DataError("evaluate: dataset has no test split");

    MetricsReport rep = report(ckpt, ds.test, config.match_weight, config.report_seed);
    write_text_atomic(config.out_dir() + "/metrics.csv", metrics_csv({rep}));
    if (rep.matched_labels)
        log_line(config, "evaluate: " + std::to_string(rep.matched_labels) +
                             " test labels resolved through the similarity matcher");
    log_line(config, "evaluate: total MAE " + num_str(rep.mae_total) + ", RMSE " +
                         num_str(rep.rmse_total) + " over " + std::to_string(rep.sample_count) +
                         " samples");
}

void cmd_ablate(const RunConfig& config) {
    prepare_run_dir(config);
    Checkpoint ckpt = load_checkpoint(checkpoint_path(config));
    PackedDataset ds = load_dataset(dataset_path(config));
    if (ds.test.empty()) throw DataError("ablate: dataset has no test split");

    std::vector<MetricsReport> rows = ablation_sweep(ckpt, ds.test, config.match_weight,
                                                     config.report_seed, config.workers);
    write_text_atomic(config.out_dir() + "/ablation.csv", metrics_csv(rows));
    log_line(config, "ablate: " + std::to_string(rows.size()) + " rows");
}

void cmd_analyze(const RunConfig& config) {
    prepare_run_dir(config);
    Checkpoint ckpt = load_checkpoint(checkpoint_path(config));
    std::size_t n = ckpt.vocab.size();
    if (n < 4) throw DataError("analyze: vocab of " + std::to_string(n) +
                               " labels is too small for t-SNE (need 4)");

    TsneConfig tsne = config.tsne;
    double limit = (static_cast<double>(n) - 1.0) / 3.0;
    if (tsne.perplexity >= limit) {
        tsne.perplexity = std::max(1.0, limit - 1e-3);
        log_line(config, "analyze: perplexity clamped to " + num_str(tsne.perplexity) +
                             " for vocab of " + std::to_string(n));
    }
    TsneResult proj = tsne_2d(ckpt.params.embedding, tsne);
    if (proj.degenerate_fallback)
        log_line(config, "analyze: embedding rows are all identical; emitted noise layout");

    std::size_t k = std::min(config.clusters, n);
    std::vector<std::size_t> assign = kmeans(proj.points, k, tsne.seed);
    std::vector<ClusterAnnotation> notes = annotate(assign, ckpt.vocab, config.match_weight);
    if (notes.size() < k)
        log_line(config, "analyze: " + std::to_string(k - notes.size()) +
                             " empty clusters dropped from annotations");

    write_text_atomic(config.out_dir() + "/embedding_points.csv",
                      points_csv(ckpt.vocab, proj.points, assign));
    write_text_atomic(config.out_dir() + "/annotations.csv", annotations_csv(notes));
    write_text_atomic(config.out_dir() + "/embedding.svg",
                      scatter_svg(proj.points, assign, notes));
    log_line(config, "analyze: " + std::to_string(n) + " labels -> " + std::to_string(k) +
                         " clusters" +
                         (proj.kl.empty() ? "" : ", final KL " + num_str(proj.kl.back())));
}

}  // namespace rcvae

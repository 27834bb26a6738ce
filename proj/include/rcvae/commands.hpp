#pragma once

#include <cstdint>
#include <string>

#include "rcvae/dataio.hpp"
#include "rcvae/embedviz.hpp"
#include "rcvae/hpo.hpp"
#include "rcvae/trainer.hpp"

namespace rcvae {

// One config file drives every subcommand; flags override single fields.
struct RunConfig {
    std::string run_name = "default";
    std::string out_root = "run";

    // data source: synthetic generator or CSV pair
    bool synthetic = true;
    SynthSpec synth;          // n_cycles doubles as the early-cycle count n
    std::string data_csv;
    std::string metadata_csv;

    // packing: L points resampled per cycle arranged H x W (H*W == L)
    std::size_t seq_len = 256;
    std::size_t height = 16;
    std::size_t width = 16;
    SplitSpec split;

    // model/backbone
    std::size_t embed_dim = 32;
    std::size_t latent_dim = 8;
    std::size_t enc_layers = 4;
    std::size_t dec_layers = 4;
    std::size_t hidden = 64;

    TrainConfig train;

    // hpo
    std::size_t hpo_budget = 10;
    std::size_t hpo_trial_epochs = 30;
    std::size_t hpo_patience = 10;
    std::uint64_t hpo_seed = 0;
    std::string hpo_method = "gp_ei";  // or "random"
    SearchSpace space;

    double match_weight = 0.5;

    // analyze
    TsneConfig tsne;
    std::size_t clusters = 6;

    std::uint64_t report_seed = 0;
    std::size_t workers = 1;

    std::string out_dir() const { return out_root + "/" + run_name; }
    void validate() const;  // ConfigError
};

// Parse the JSON file; unknown keys are rejected so typos surface early.
RunConfig parse_config(const std::string& path);

// One master seed re-keys every stage deterministically (split, training,
// hpo, reporting, analysis).
void apply_master_seed(RunConfig& config, std::uint64_t seed);

// Serialized form of the effective config, written into the run directory.
std::string config_json(const RunConfig& config);

// Subcommands. Each writes its artifacts under config.out_dir() and appends
// one line per notable event to log.txt (the only file timestamps touch).
void cmd_preprocess(const RunConfig& config);
void cmd_hpo(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_generate(const RunConfig& config, std::int64_t eol, std::int64_t ecl,
                  std::size_t count);
void cmd_evaluate(const RunConfig& config);
void cmd_ablate(const RunConfig& config);
void cmd_analyze(const RunConfig& config);

}  // namespace rcvae

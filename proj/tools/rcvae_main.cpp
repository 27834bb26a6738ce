#include <cstdio>
#include <string>

#include "rcvae/commands.hpp"
#include "rcvae/errors.hpp"

#include "CLI11.hpp"

namespace {

// 0 success | 2 config or data | 3 missing artifact | 4 numeric failure
int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const rcvae::MissingArtifactError*>(&e)) return 3;
    if (dynamic_cast<const rcvae::NumericError*>(&e)) return 4;
    if (dynamic_cast<const rcvae::Error*>(&e)) return 2;
    return 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rcvae — conditional generation of battery charging data"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::size_t workers = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required();
        cmd->add_option("--seed", seed, "master seed overriding every stage seed")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--workers", workers, "parallel workers for sweeps");
    };

    CLI::App* preprocess = app.add_subcommand("preprocess", "build the packed dataset + manifest");
    CLI::App* hpo = app.add_subcommand("hpo", "tune hyperparameters on the train/val splits");
    CLI::App* train = app.add_subcommand("train", "fit the model and write a checkpoint");
    CLI::App* generate = app.add_subcommand("generate", "sample curves for a condition");
    CLI::App* evaluate = app.add_subcommand("evaluate", "score reconstructions on the test split");
    CLI::App* ablate = app.add_subcommand("ablate", "layer-skip and embedding ablation sweep");
    CLI::App* analyze = app.add_subcommand("analyze", "project and cluster the embedding table");
    for (CLI::App* cmd : {preprocess, hpo, train, generate, evaluate, ablate, analyze})
        add_common(cmd);

    std::int64_t gen_eol = 0, gen_ecl = 0;
    std::size_t gen_count = 1;
    generate->add_option("--eol", gen_eol, "target end of life (cycles)")->required();
    generate->add_option("--ecl", gen_ecl, "target completed cycles")->required();
    generate->add_option("--count", gen_count, "samples to generate");

    CLI11_PARSE(app, argc, argv);

    try {
        rcvae::RunConfig config = rcvae::parse_config(config_path);
        if (seed_given) rcvae::apply_master_seed(config, seed);
        if (workers) config.workers = workers;

        if (*preprocess) rcvae::cmd_preprocess(config);
        if (*hpo) rcvae::cmd_hpo(config);
        if (*train) rcvae::cmd_train(config);
        if (*generate) rcvae::cmd_generate(config, gen_eol, gen_ecl, gen_count);
        if (*evaluate) rcvae::cmd_evaluate(config);
        if (*ablate) rcvae::cmd_ablate(config);
        if (*analyze) rcvae::cmd_analyze(config);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
}

// odecast: buffer-free streaming forecaster with a latent-ODE backbone.
//
// Subcommands cover the full experiment pipeline: offline warm-up, online
// streaming with per-step updates, ablations, reference baselines, cutout
// mask previews, and re-rendering of saved run artifacts.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "odecast/errors.hpp"
#include "odecast/pipeline.hpp"

namespace {

void add_common_options(CLI::App* cmd, odecast::RunConfig& config) {
    cmd->fallthrough();

    const char* data_dir_env = std::getenv("ODECAST_DATA_DIR");
    const std::string data_dir = data_dir_env ? data_dir_env : "";

    cmd->add_option("--data", config.data_path, "CSV file with a header row")
        ->transform([data_dir](std::string path) {
            if (!data_dir.empty() && !path.empty() && path.front() != '/' &&
                !std::ifstream(path).good())
                return data_dir + "/" + path;
            return path;
        });
    cmd->add_option("--synthetic", config.synthetic,
                    "synthetic source: sine|constant|step|random_walk|mean_shift");
    cmd->add_option("--length", config.synthetic_length, "synthetic series length");
    cmd->add_option("--dataset-name", config.dataset_name, "label used in tables and run dirs");
    cmd->add_option("--timestamp-col", config.schema.timestamp_column,
                    "timestamp column name (default: date)");
    cmd->add_option("--target-col", config.schema.target_column,
                    "target column (default: last column; for ECL pick the client column)");
    cmd->add_option("--features", config.schema.feature_columns,
                    "explicit feature column list (default: all non-timestamp)");
    cmd->add_option("--task", config.task, "uni | multi-uni | multi-multi")
        ->check(CLI::IsMember({"uni", "multi-uni", "multi-multi"}));
    cmd->add_option("--lag", config.lag, "look-back window length");
    cmd->add_option("--horizon", config.horizon, "forecast steps per prediction");
    cmd->add_option("--hidden-dim", config.hidden_dim, "recurrent/hidden width");
    cmd->add_option("--latent-dim", config.latent_dim, "latent width");
    cmd->add_option("--seed", config.seed, "global seed");
    cmd->add_option("--train-fraction", config.train_fraction, "chronological warm-up fraction");
    cmd->add_option("--lr", config.lr, "learning rate (warm-up and online)");
    cmd->add_option("--batch-size", config.warmup.batch_size, "warm-up batch size");
    cmd->add_option("--max-epochs", config.warmup.max_epochs, "warm-up epoch cap");
    cmd->add_option("--patience", config.warmup.patience, "early-stopping patience (epochs)");
    cmd->add_flag("!--no-til", config.til_enabled, "disable the temporal isolation layer");
    cmd->add_flag("!--no-kl", config.kl_enabled, "drop the KL term from the online loss");
    cmd->add_flag("!--no-l1", config.l1_enabled, "drop the L1 term from the online loss");
    cmd->add_option("--cutout", config.cutout, "fraction of points removed per attribute");
    cmd->add_option("--adwin-delta", config.adwin_delta, "ADWIN confidence parameter");
    cmd->add_option("--adwin-max-window", config.adwin_max_window, "ADWIN window cap");
    cmd->add_option("--out", config.out_dir, "output directory");
    cmd->add_option("--checkpoint", config.checkpoint, "checkpoint file to write/read");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"buffer-free streaming time-series forecaster (latent-ODE + isolation LSTM)"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key-value config file with a [subcommand] section; flags take precedence");

    odecast::RunConfig config;

    CLI::App* warmup = app.add_subcommand("warmup", "train the VAE-ODE on the historical prefix");
    add_common_options(warmup, config);

    CLI::App* stream = app.add_subcommand("stream", "predict-then-update over the stream split");
    add_common_options(stream, config);

    CLI::App* ablate = app.add_subcommand("ablate", "isolation-layer / loss-term ablation grid");
    add_common_options(ablate, config);

    CLI::App* baseline = app.add_subcommand("baseline", "persistence or frozen-model reference");
    add_common_options(baseline, config);
    baseline->add_option("--mode", config.baseline_mode, "persistence | frozen")
        ->check(CLI::IsMember({"persistence", "frozen"}));

    CLI::App* cutout = app.add_subcommand("cutout", "preview the irregular-sampling mask");
    add_common_options(cutout, config);

    CLI::App* report = app.add_subcommand("report", "re-render artifacts from a saved trace");
    add_common_options(report, config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (warmup->parsed()) odecast::cmd_warmup(config);
        if (stream->parsed()) odecast::cmd_stream(config);
        if (ablate->parsed()) odecast::cmd_ablate(config);
        if (baseline->parsed()) odecast::cmd_baseline(config);
        if (cutout->parsed()) odecast::cmd_cutout(config);
        if (report->parsed()) odecast::cmd_rerender(config);
    } catch (const odecast::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const odecast::ConfigMismatchError& e) {
        std::cerr << "config mismatch: " << e.what() << "\n";
        return 3;
    } catch (const odecast::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "egcn_cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "egcn/train.hpp"

namespace egcn::cli {

namespace {

namespace fs = std::filesystem;

struct common_options {
    std::string config_path;
    std::string data_path;
    std::string out_dir = "egcn-out";
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, common_options& opts, bool with_config = true) {
    if (with_config) {
        cmd->add_option("--config", opts.config_path, "JSON config file (keys mirror the run settings)");
        cmd->add_option("--set", opts.overrides, "key=value overrides applied after the config file");
    }
    cmd->add_option("--data", opts.data_path, "dataset manifest path (overrides the config's dataset)");
    cmd->add_option("--out-dir", opts.out_dir, "directory receiving every artifact");
}

train_config resolve_config(const common_options& opts) {
    train_config cfg;
    if (!opts.config_path.empty()) cfg = config_from_json_file(opts.config_path);
    for (const std::string& kv : opts.overrides) apply_override(cfg, kv);
    if (!opts.data_path.empty()) cfg.dataset_path = opts.data_path;
    return cfg;
}

dataset load_for(const train_config& cfg) {
    if (cfg.dataset_path.empty()) {
        throw parameter_error("no dataset given (set \"dataset\" in the config or pass --data)");
    }
    std::vector<std::string> warnings;
    dataset d = load_dataset(cfg.dataset_path, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
    return d;
}

void write_run_manifest(const train_config& cfg, const std::string& verb, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    nlohmann::json j;
    j["command"] = verb;
    j["config"] = nlohmann::json::parse(config_to_json(cfg));
    j["out_dir"] = out_dir.string();
    std::ofstream out(out_dir / "run_manifest.json");
    if (!out) throw data_error("cannot write run manifest in '" + out_dir.string() + "'");
    out << j.dump(2) << "\n";
}

int cmd_train(const common_options& opts) {
    train_config cfg = resolve_config(opts);
    dataset data = load_for(cfg);
    write_run_manifest(cfg, "train", opts.out_dir);
    train_result res = train(data, cfg);
    write_curves(res.curves, fs::path(opts.out_dir) / "curves.csv");

    std::vector<result_row> rows;
    rows.push_back({data.manifest.name, "train", "final_train_loss", res.final_train_loss, 0.0});
    if (!std::isnan(res.final_val_metric)) {
        rows.push_back({data.manifest.name, "train", "final_val_" + res.val_metric_name,
                        res.final_val_metric, 0.0});
    }
    write_results(rows, fs::path(opts.out_dir) / "final_metrics.csv");

    std::cout << "train: " << data.manifest.name << " epochs=" << cfg.max_epochs
              << " final_train_loss=" << format_double(res.final_train_loss);
    if (!std::isnan(res.final_val_metric)) {
        std::cout << " final_val_" << res.val_metric_name << "="
                  << format_double(res.final_val_metric);
    }
    std::cout << "\nartifacts in " << opts.out_dir << "\n";
    return 0;
}

int cmd_cv(const common_options& opts) {
    train_config cfg = resolve_config(opts);
    dataset data = load_for(cfg);
    write_run_manifest(cfg, "cv", opts.out_dir);
    cv_result res = cross_validate(data, cfg);

    const std::string method = cfg.freeze_metric ? "frozen" : "evolving";
    std::vector<result_row> rows;
    for (std::size_t t = 0; t < res.task_names.size(); ++t) {
        rows.push_back({data.manifest.name, method, res.task_names[t], res.per_task_mean[t],
                        res.per_task_std[t]});
    }
    rows.push_back({data.manifest.name, method, "ALL", res.mean, res.std_dev});
    write_results(rows, fs::path(opts.out_dir) / "cv_results.csv");

    std::cout << "cv: " << data.manifest.name << " " << cfg.folds << "-fold " << res.metric_name
              << " = " << format_double(res.mean) << " +/- " << format_double(res.std_dev) << "\n"
              << "results in " << opts.out_dir << "/cv_results.csv\n";
    return 0;
}

int cmd_ablate(const common_options& opts, index_t num_seeds) {
    train_config cfg = resolve_config(opts);
    dataset data = load_for(cfg);
    write_run_manifest(cfg, "ablate", opts.out_dir);
    std::vector<std::uint64_t> seeds;
    for (index_t s = 0; s < num_seeds; ++s) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(s));
    std::vector<ablate_row> rows = ablate(data, cfg, seeds);

    fs::create_directories(opts.out_dir);
    std::ofstream out(fs::path(opts.out_dir) / "ablation.csv");
    if (!out) throw data_error("cannot write ablation.csv");
    out << "seed,val_metric_evolving,val_metric_frozen,evolving_wins,epochs_to_frozen_final,epoch_fraction\n";
    index_t wins = 0;
    for (const ablate_row& r : rows) {
        out << r.seed << "," << format_double(r.val_metric_evolving) << ","
            << format_double(r.val_metric_frozen) << "," << (r.evolving_wins ? 1 : 0) << ","
            << r.epochs_to_frozen_final << "," << format_double(r.epoch_fraction) << "\n";
        if (r.evolving_wins) ++wins;
    }
    std::cout << "ablate: evolving wins " << wins << "/" << rows.size()
              << " seeds; comparison in " << opts.out_dir << "/ablation.csv\n";
    return 0;
}

int cmd_inspect(const common_options& opts, const std::string& sample_id, index_t layer,
                const std::string& epochs_csv) {
    train_config cfg = resolve_config(opts);
    dataset data = load_for(cfg);

    snapshot_plan plan;
    plan.sample_id = sample_id;
    plan.layer = layer;
    std::stringstream ss(epochs_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        index_t e = 0;
        try {
            e = std::stoll(item);
        } catch (const std::exception&) {
            throw parameter_error("inspect-laplacian: bad epoch '" + item + "'");
        }
        if (e < 0 || e > cfg.max_epochs) {
            throw parameter_error("inspect-laplacian: epoch " + std::to_string(e) +
                                  " outside [0, max_epochs=" + std::to_string(cfg.max_epochs) + "]");
        }
        plan.epochs.push_back(e);
    }
    if (plan.epochs.empty()) throw parameter_error("inspect-laplacian: no epochs given");

    write_run_manifest(cfg, "inspect-laplacian", opts.out_dir);
    train_result res = train(data, cfg, &plan);
    for (const snapshot_record& rec : res.snapshots) {
        std::ostringstream name;
        name << "snapshot_" << rec.meta.sample_id << "_layer" << rec.meta.layer << "_epoch"
             << rec.meta.epoch << ".csv";
        write_snapshot(rec.matrix, rec.meta, fs::path(opts.out_dir) / name.str());
    }
    write_curves(res.curves, fs::path(opts.out_dir) / "curves.csv");
    std::cout << "inspect-laplacian: wrote " << res.snapshots.size() << " snapshots to "
              << opts.out_dir << "\n";
    return 0;
}

int cmd_validate(const common_options& opts) {
    std::string path = opts.data_path;
    if (path.empty() && !opts.config_path.empty()) {
        path = resolve_config(opts).dataset_path;
    }
    if (path.empty()) throw parameter_error("validate-data: pass --data or a config with a dataset");
    lint_report report = lint_dataset(path);
    for (const std::string& e : report.errors) std::cout << "error: " << e << "\n";
    for (const std::string& w : report.warnings) std::cout << "warning: " << w << "\n";
    std::cout << report.errors.size() << " errors, " << report.warnings.size() << " warnings, "
              << report.samples_ok << " samples ok\n";
    return report.errors.empty() ? 0 : 2;
}

int cmd_synth(const std::string& out_dir, const std::string& name, index_t samples,
              const std::string& nodes_range, index_t feature_dim, std::uint64_t seed) {
    index_t lo = 6, hi = 12;
    const auto colon = nodes_range.find(':');
    try {
        if (colon == std::string::npos) {
            lo = hi = std::stoll(nodes_range);
        } else {
            lo = std::stoll(nodes_range.substr(0, colon));
            hi = std::stoll(nodes_range.substr(colon + 1));
        }
    } catch (const std::exception&) {
        throw parameter_error("synth-data: bad --nodes range '" + nodes_range + "' (use LO:HI)");
    }
    dataset d = synthesize_hidden_metric_dataset(samples, lo, hi, feature_dim, seed);
    d.manifest.name = name;
    const fs::path manifest_path = fs::path(out_dir) / (name + ".json");
    write_dataset(d, manifest_path);
    std::cout << "synth-data: wrote " << d.samples.size() << " samples to " << manifest_path.string()
              << "\n";
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Evolving graph convolutional network trainer"};
    app.require_subcommand(1);

    common_options train_opts, cv_opts, ablate_opts, inspect_opts, validate_opts;
    index_t ablate_seeds = 5;
    std::string inspect_sample, inspect_epochs = "5,10,15,20";
    index_t inspect_layer = 0;
    std::string synth_out = "egcn-out", synth_name = "hidden-metric-synth", synth_nodes = "6:12";
    index_t synth_samples = 600, synth_dim = 6;
    std::uint64_t synth_seed = 7;

    CLI::App* train_cmd = app.add_subcommand("train", "train a model and write curve records");
    add_common(train_cmd, train_opts);

    CLI::App* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation with mean +/- std results");
    add_common(cv_cmd, cv_opts);

    CLI::App* ablate_cmd =
        app.add_subcommand("ablate", "paired evolving vs frozen-metric runs over seeds");
    add_common(ablate_cmd, ablate_opts);
    ablate_cmd->add_option("--seeds", ablate_seeds, "number of paired seeds")->check(CLI::PositiveNumber);

    CLI::App* inspect_cmd =
        app.add_subcommand("inspect-laplacian", "record similarity snapshots for one sample");
    add_common(inspect_cmd, inspect_opts);
    inspect_cmd->add_option("--sample", inspect_sample, "sample id to inspect")->required();
    inspect_cmd->add_option("--layer", inspect_layer, "SGC-LL layer index");
    inspect_cmd->add_option("--epochs", inspect_epochs, "comma-separated epoch list");

    CLI::App* validate_cmd = app.add_subcommand("validate-data", "lint a dataset file");
    add_common(validate_cmd, validate_opts);

    CLI::App* synth_cmd = app.add_subcommand("synth-data", "generate the hidden-metric synthetic dataset");
    synth_cmd->add_option("--out-dir", synth_out, "output directory");
    synth_cmd->add_option("--name", synth_name, "dataset name (file basename)");
    synth_cmd->add_option("--samples", synth_samples, "number of samples")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--nodes", synth_nodes, "node count range LO:HI");
    synth_cmd->add_option("--feature-dim", synth_dim, "node feature dimension")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth_seed, "generator seed");

    std::vector<std::string> argv_copy = args;
    try {
        std::vector<const char*> argv;
        argv.push_back("egcn");
        for (const std::string& a : argv_copy) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (cv_cmd->parsed()) return cmd_cv(cv_opts);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_opts, ablate_seeds);
        if (inspect_cmd->parsed()) {
            return cmd_inspect(inspect_opts, inspect_sample, inspect_layer, inspect_epochs);
        }
        if (validate_cmd->parsed()) return cmd_validate(validate_opts);
        if (synth_cmd->parsed()) {
            return cmd_synth(synth_out, synth_name, synth_samples, synth_nodes, synth_dim, synth_seed);
        }
    } catch (const parameter_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const structural_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const capacity_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace egcn::cli

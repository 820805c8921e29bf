// mpmoe: command-line front end for the gated expert blend.
//
//   mpmoe gen       synthetic panel from a YAML spec
//   mpmoe train     multi-seed training run directory
//   mpmoe eval      re-score a checkpoint on a panel
//   mpmoe sweep     lambda sensitivity table
//   mpmoe ablate    full / w/o MP / w/o MSE table
//   mpmoe baseline  ensemble-mean, least-squares and raw expert scores
//   mpmoe penalty   D_min matrix of the training split
//
// Exit codes: 0 success, 2 usage or configuration, 3 data, 4 runtime.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpmoe/mpmoe.hpp"

namespace fs = std::filesystem;
using namespace mpmoe;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int verbosity = 1;

void note(const std::string& msg) {
    if (verbosity > 0) std::cerr << "mpmoe: " << msg << '\n';
}

// Output root: --out, else $MPMOE_OUT/<fallback>, else ./<fallback>.
fs::path output_root(const std::string& flag, const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("MPMOE_OUT"); env && *env) return fs::path(env) / fallback;
    return fallback;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path.string(), text);
}

struct TrainFlags {
    TrainConfig config;
    std::string data;
    std::string schema;
    std::string out;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    auto& c = f.config;
    cmd->add_option("--data", f.data, "Panel file (comma-separated, header row)")->required();
    cmd->add_option("--schema", f.schema, "YAML column mapping (timestamp, observed, experts, features)");
    cmd->add_option("--out", f.out, "Output directory (default $MPMOE_OUT/<command> or ./<command>)");
    cmd->add_option("--lambda", c.lambda, "Weight of the matrix-profile term, in [0,1]")->capture_default_str();
    cmd->add_option("--m", c.m, "Window length in hours")->capture_default_str();
    cmd->add_option("--delta", c.delta, "Maximum shift in hours")->capture_default_str();
    cmd->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--batch", c.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--seeds", c.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
    cmd->add_option("--split", c.split, "Chronological train fraction")->capture_default_str();
    cmd->add_option("--hidden-dims", c.hidden_dims, "Comma-separated hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--dtw-band", c.dtw_band, "Sakoe-Chiba half-width for DTW (default unconstrained)");
    cmd->add_flag("--gate-experts", c.gate_includes_experts, "Also feed normalized expert values to the gate");
    cmd->add_flag("!--no-shuffle", c.shuffle, "Disable per-epoch shuffling");
}

LoadResult load_data(const std::string& path, const std::string& schema_path) {
    std::optional<Schema> schema;
    if (!schema_path.empty()) schema = Schema::from_yaml_file(schema_path);
    auto loaded = load_panel(path, schema);
    if (loaded.dropped_rows > 0)
        note("dropped " + std::to_string(loaded.dropped_rows) + " row(s) with missing values");
    return loaded;
}

DtwOptions dtw_options(const TrainConfig& c) { return {c.dtw_band}; }

int cmd_gen(const std::string& spec_path, std::uint64_t seed, std::optional<std::size_t> length, const std::string& out) {
    SyntheticSpec spec = spec_path.empty() ? standard_spec() : load_synthetic_spec(spec_path);
    if (length) spec.length = *length;
    const auto panel = generate_synthetic(spec, seed);
    const fs::path path = out.empty() ? output_root("", "panel.csv") : fs::path(out);
    std::ostringstream text;
    write_panel(text, panel);
    write_file(path, text.str());
    note("wrote " + std::to_string(panel.rows()) + " rows to " + path.string());
    return 0;
}

void write_seed_artifacts(const fs::path& dir, const ForecastPanel& panel, const PreparedData& data,
                          const TrainConfig& cfg, const TrainedRun& run) {
    fs::create_directories(dir);
    Checkpoint ck{run.model, data.stats, panel.expert_names, panel.feature_names, cfg, run.result.seed};
    write_file(dir / "checkpoint.json", dump(checkpoint_to_json(ck)));
    std::ostringstream log;
    write_loss_log(log, run.result.epochs);
    write_file(dir / "loss_log.csv", log.str());
    write_file(dir / "metrics.json", dump(report_to_json(run.result.report, dtw_options(cfg))));
    std::ostringstream fc;
    write_forecast_dump(fc, panel, run.evaluation);
    write_file(dir / "forecast.csv", fc.str());
}

int cmd_train(TrainFlags& f) {
    validate(f.config);
    const auto panel = load_data(f.data, f.schema).panel;
    const fs::path root = output_root(f.out, "train");
    fs::create_directories(root);
    write_file(root / "config.json", dump(json{{"schema", "mpmoe.config"},
                                               {"version", kConfigVersion},
                                               {"data", f.data},
                                               {"train", config_to_json(f.config)}}));
    const PreparedData data = prepare(panel, f.config);
    note("penalty matrix: " + std::to_string(data.penalties.samples()) + " windows x " +
         std::to_string(data.penalties.experts()) + " experts");
    std::vector<RunResult> runs;
    for (auto seed : f.config.seeds) {
        TrainedRun run;
        try {
            run = train_prepared(panel, data, f.config, seed);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.epoch(), "seed " + std::to_string(seed) + ": " + e.what());
        }
        write_seed_artifacts(root / ("seed_" + std::to_string(seed)), panel, data, f.config, run);
        note("seed " + std::to_string(seed) + ": mae_1h=" + format_double(run.result.report.mae_1h) +
             " dtw=" + format_double(run.result.report.dtw) + " (" + format_double(run.result.wall_seconds) + " s)");
        runs.push_back(std::move(run.result));
    }
    const Aggregate agg = aggregate_runs(std::move(runs), f.config.lambda);
    std::ostringstream summary;
    write_summary_header(summary, agg);
    write_summary_rows(summary, "train", agg);
    write_file(root / "summary.csv", summary.str());
    write_file(root / "aggregate.json", dump(aggregate_to_json(agg)));
    note("run directory: " + root.string());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path, const std::string& schema,
             const std::string& out, const std::string& forecast_out) {
    const Checkpoint ck = checkpoint_from_json(read_json_file(checkpoint_path));
    const auto panel = load_data(data_path, schema).panel;
    if (panel.expert_names != ck.expert_names) {
        std::string have, want;
        for (const auto& n : panel.expert_names) have += (have.empty() ? "" : ",") + n;
        for (const auto& n : ck.expert_names) want += (want.empty() ? "" : ",") + n;
        throw SchemaMismatchError("checkpoint experts [" + want + "] do not match data experts [" + have + "]");
    }
    if (panel.feature_names != ck.feature_names) throw SchemaMismatchError("checkpoint features do not match data");
    const auto s = split(panel, SplitSpec{ck.config.split});
    const auto e = evaluate(ck.model, panel, s.test, ck.stats, ck.config.gate_includes_experts, dtw_options(ck.config));
    const std::string text = dump(report_to_json(e.report, dtw_options(ck.config)));
    if (out.empty()) std::cout << text;
    else write_file(out, text);
    if (!forecast_out.empty()) {
        std::ostringstream fc;
        write_forecast_dump(fc, panel, e);
        write_file(forecast_out, fc.str());
    }
    return 0;
}

std::string lambda_label(double l) { return "lambda=" + format_double(l); }

int cmd_sweep(TrainFlags& f, std::vector<double> lambdas) {
    validate(f.config);
    for (double l : lambdas) check_lambda(l);
    const auto panel = load_data(f.data, f.schema).panel;
    const fs::path root = output_root(f.out, "sweep");
    const auto aggs = sweep_lambda(panel, f.config, lambdas);
    std::vector<std::pair<std::string, Aggregate>> rows;
    std::ostringstream summary;
    for (const auto& a : aggs) {
        if (rows.empty()) write_summary_header(summary, a);
        write_summary_rows(summary, lambda_label(a.lambda), a);
        rows.emplace_back(lambda_label(a.lambda), a);
    }
    std::ostringstream table;
    write_aggregate_table(table, rows);
    write_file(root / "sweep.csv", table.str());
    write_file(root / "sweep_seeds.csv", summary.str());
    json j = json::array();
    for (const auto& a : aggs) j.push_back(aggregate_to_json(a));
    write_file(root / "sweep.json", dump(j));
    write_file(root / "config.json", dump(json{{"schema", "mpmoe.config"},
                                               {"version", kConfigVersion},
                                               {"data", f.data},
                                               {"lambdas", lambdas},
                                               {"train", config_to_json(f.config)}}));
    std::cout << table.str();
    return 0;
}

int cmd_ablate(TrainFlags& f) {
    validate(f.config);
    const auto panel = load_data(f.data, f.schema).panel;
    const fs::path root = output_root(f.out, "ablate");
    const auto arms = ablate(panel, f.config);
    std::vector<std::pair<std::string, Aggregate>> rows;
    std::ostringstream summary;
    for (const auto& arm : arms) {
        if (rows.empty()) write_summary_header(summary, arm.aggregate);
        write_summary_rows(summary, arm.label, arm.aggregate);
        rows.emplace_back(arm.label, arm.aggregate);
    }
    std::ostringstream table;
    write_aggregate_table(table, rows);
    write_file(root / "ablation.csv", table.str());
    write_file(root / "ablation_seeds.csv", summary.str());
    json j = json::object();
    for (const auto& arm : arms) j[arm.label] = aggregate_to_json(arm.aggregate);
    write_file(root / "ablation.json", dump(j));
    write_file(root / "config.json", dump(json{{"schema", "mpmoe.config"},
                                               {"version", kConfigVersion},
                                               {"data", f.data},
                                               {"train", config_to_json(f.config)}}));
    std::cout << "label,dtw_median,dtw_mean,dtw_std\n";
    for (const auto& arm : arms) {
        const auto& d = arm.aggregate.at("dtw");
        std::cout << arm.label << ',' << cell(d.median) << ',' << cell(d.mean) << ',' << cell(d.std) << '\n';
    }
    return 0;
}

void report_row(std::ostream& out, const std::string& label, const MetricsReport& r) {
    out << label << ',' << format_double(r.mae_1h);
    for (int h : kAccumulationHorizons) out << ',' << cell(r.mae_acc.at(h));
    out << ',' << format_double(r.dtw);
    for (double t : kCsiThresholds) out << ',' << cell(r.csi.at(t));
    out << ',' << cell(r.csi_m) << '\n';
}

int cmd_baseline(TrainFlags& f) {
    validate(f.config);
    const auto panel = load_data(f.data, f.schema).panel;
    const fs::path root = output_root(f.out, "baseline");
    const auto b = baseline_eval(panel, split(panel, SplitSpec{f.config.split}), dtw_options(f.config));
    std::ostringstream table;
    table << "label,mae_1h,mae_12h,mae_24h,mae_48h,dtw,csi_1,csi_3,csi_5,csi_m\n";
    report_row(table, "ensemble_mean", b.ensemble_mean);
    report_row(table, "least_squares", b.least_squares);
    for (const auto& [name, r] : b.experts) report_row(table, "expert_" + name, r);
    write_file(root / "baselines.csv", table.str());
    json j;
    j["ensemble_mean"] = report_to_json(b.ensemble_mean, dtw_options(f.config));
    j["least_squares"] = report_to_json(b.least_squares, dtw_options(f.config));
    j["least_squares_weights"] = std::vector<double>(b.blend.weights.data(), b.blend.weights.data() + b.blend.weights.size());
    j["least_squares_ridge_fallback"] = b.blend.ridge_fallback;
    json ex = json::object();
    for (const auto& [name, r] : b.experts) ex[name] = report_to_json(r, dtw_options(f.config));
    j["experts"] = ex;
    write_file(root / "baselines.json", dump(j));
    if (b.blend.ridge_fallback) note("least-squares normal equations were singular; ridge fallback used");
    std::cout << table.str();
    return 0;
}

int cmd_penalty(TrainFlags& f) {
    validate(f.config);
    const auto panel = load_data(f.data, f.schema).panel;
    const fs::path root = output_root(f.out, "penalty");
    const auto data = prepare(panel, f.config);
    std::ostringstream out;
    write_penalty_matrix(out, data.penalties, panel.expert_names);
    write_file(root / "penalty.csv", out.str());
    std::cout << "expert,mean_dmin,zero_fraction\n";
    const auto& v = data.penalties.values();
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
        const double zeros = (v.col(k).array() == 0.0).cast<double>().mean();
        std::cout << panel.expert_names[static_cast<std::size_t>(k)] << ',' << format_double(v.col(k).mean()) << ','
                  << format_double(zeros) << '\n';
    }
    note("penalty matrix hash " + std::to_string(data.penalties.content_hash()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matrix-profile guided mixture of precipitation experts"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

    std::string spec_path, gen_out;
    std::uint64_t gen_seed = 0;
    std::optional<std::size_t> gen_length;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic panel");
    gen->add_option("--spec", spec_path, "YAML synthetic spec (default: built-in standard basin)")
        ->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
    gen->add_option("--length", gen_length, "Override the number of hourly rows");
    gen->add_option("--out", gen_out, "Output file (default $MPMOE_OUT/panel.csv or ./panel.csv)");

    TrainFlags train_flags, sweep_flags, ablate_flags, base_flags, pen_flags;
    auto* train = app.add_subcommand("train", "Train one gate per seed and write a run directory");
    add_train_flags(train, train_flags);

    std::string ck_path, eval_data, eval_schema, eval_out, eval_forecast;
    auto* ev = app.add_subcommand("eval", "Score a checkpoint on the test split of a panel");
    ev->add_option("--checkpoint", ck_path, "checkpoint.json from a run directory")->required();
    ev->add_option("--data", eval_data, "Panel file")->required();
    ev->add_option("--schema", eval_schema, "YAML column mapping");
    ev->add_option("--out", eval_out, "Metrics report path (default stdout)");
    ev->add_option("--forecast", eval_forecast, "Also write the forecast dump here");

    std::vector<double> lambdas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    auto* sweep = app.add_subcommand("sweep", "Retrain across lambda values");
    add_train_flags(sweep, sweep_flags);
    sweep->add_option("--lambdas", lambdas, "Comma-separated lambda grid")->delimiter(',')->capture_default_str();

    auto* abl = app.add_subcommand("ablate", "Full model vs w/o MP (lambda=0) vs w/o MSE (lambda=1)");
    add_train_flags(abl, ablate_flags);

    auto* base = app.add_subcommand("baseline", "Ensemble-mean, least-squares and per-expert scores");
    add_train_flags(base, base_flags);

    auto* pen = app.add_subcommand("penalty", "Write the D_min matrix of the training split");
    add_train_flags(pen, pen_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }
    if (quiet) verbosity = 0;

    try {
        if (*gen) return cmd_gen(spec_path, gen_seed, gen_length, gen_out);
        if (*train) return cmd_train(train_flags);
        if (*ev) return cmd_eval(ck_path, eval_data, eval_schema, eval_out, eval_forecast);
        if (*sweep) return cmd_sweep(sweep_flags, lambdas);
        if (*abl) return cmd_ablate(ablate_flags);
        if (*base) return cmd_baseline(base_flags);
        if (*pen) return cmd_penalty(pen_flags);
    } catch (const ConfigError& e) {
        std::cerr << "mpmoe: configuration error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "mpmoe: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const DivergenceError& e) {
        std::cerr << "mpmoe: training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "mpmoe: error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

#pragma once

// Versioned JSON documents (train config, metrics report, checkpoint) and
// flat comma-separated tables for logs, sweeps and forecast dumps.

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpmoe/dataset.hpp"
#include "mpmoe/error.hpp"
#include "mpmoe/gating.hpp"
#include "mpmoe/metrics.hpp"
#include "mpmoe/trainer.hpp"

namespace mpmoe {

using json = nlohmann::ordered_json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kReportVersion = 1;
inline constexpr int kConfigVersion = 1;

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> read_optional(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline std::string threshold_key(double t) { return format_double(t); }

} // namespace detail

// ---------------------------------------------------------------------------
// TrainConfig

inline json config_to_json(const TrainConfig& c) {
    json j;
    j["lambda"] = c.lambda;
    j["m"] = c.m;
    j["delta"] = c.delta;
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["seeds"] = c.seeds;
    j["split"] = c.split;
    j["hidden_dims"] = c.hidden_dims;
    j["activation"] = to_string(c.activation);
    j["shuffle"] = c.shuffle;
    j["gate_includes_experts"] = c.gate_includes_experts;
    j["dtw_band"] = c.dtw_band ? json(*c.dtw_band) : json(nullptr);
    return j;
}

inline TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    try {
        c.lambda = j.at("lambda").get<double>();
        c.m = j.at("m").get<int>();
        c.delta = j.at("delta").get<int>();
        c.lr = j.at("lr").get<double>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.epochs = j.at("epochs").get<std::size_t>();
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        c.split = j.at("split").get<double>();
        c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
        c.activation = parse_activation(j.at("activation").get<std::string>());
        c.shuffle = j.at("shuffle").get<bool>();
        c.gate_includes_experts = j.at("gate_includes_experts").get<bool>();
        if (j.contains("dtw_band") && !j.at("dtw_band").is_null()) c.dtw_band = j.at("dtw_band").get<std::size_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid train config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// MetricsReport

inline json report_to_json(const MetricsReport& r, const DtwOptions& dtw = {}) {
    json j;
    j["schema"] = "mpmoe.metrics";
    j["version"] = kReportVersion;
    j["conventions"] = {
        {"dtw", dtw.band ? "sakoe-chiba band " + std::to_string(*dtw.band) +
                               ", absolute-difference cost, accumulated (not path-normalized)"
                         : "unconstrained, absolute-difference cost, accumulated (not path-normalized)"},
        {"mae_acc", "trailing rolling sums at every valid position of the test series"},
        {"csi", "exceedance is value >= threshold; null when hits+misses+false alarms = 0"},
        {"csi_m", "mean over defined thresholds; null when none is defined"},
    };
    j["n_test"] = r.n_test;
    j["mae_1h"] = r.mae_1h;
    json acc = json::object();
    for (const auto& [h, v] : r.mae_acc) acc[std::to_string(h)] = detail::optional_number(v);
    j["mae_acc"] = acc;
    j["dtw"] = r.dtw;
    json c = json::object();
    for (const auto& [t, v] : r.csi) c[detail::threshold_key(t)] = detail::optional_number(v);
    j["csi"] = c;
    j["csi_m"] = detail::optional_number(r.csi_m);
    j["mean_gate_weights"] = r.mean_gate_weights;
    return j;
}

inline MetricsReport report_from_json(const json& j) {
    MetricsReport r;
    try {
        if (j.at("schema") != "mpmoe.metrics" || j.at("version").get<int>() != kReportVersion)
            throw DataError("unsupported metrics report schema/version");
        r.n_test = j.at("n_test").get<std::size_t>();
        r.mae_1h = j.at("mae_1h").get<double>();
        for (const auto& [k, v] : j.at("mae_acc").items()) r.mae_acc[std::stoi(k)] = detail::read_optional(v);
        r.dtw = j.at("dtw").get<double>();
        for (const auto& [k, v] : j.at("csi").items()) r.csi[std::stod(k)] = detail::read_optional(v);
        r.csi_m = detail::read_optional(j.at("csi_m"));
        r.mean_gate_weights = j.at("mean_gate_weights").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid metrics report: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Checkpoint

struct Checkpoint {
    GatingModel model;
    NormalizationStats stats;
    std::vector<std::string> expert_names;
    std::vector<std::string> feature_names;
    TrainConfig config;
    std::uint64_t seed = 0;
};

inline json checkpoint_to_json(const Checkpoint& c) {
    json j;
    j["schema"] = "mpmoe.checkpoint";
    j["version"] = kCheckpointVersion;
    j["layer_dims"] = c.model.dims;
    j["activation"] = to_string(c.model.activation);
    json layers = json::array();
    for (const auto& l : c.model.layers) {
        json lj;
        lj["rows"] = l.weights.rows();
        lj["cols"] = l.weights.cols();
        lj["weights"] = std::vector<double>(l.weights.data(), l.weights.data() + l.weights.size());  // row-major
        lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["normalization"] = {
        {"std_kind", NormalizationStats::std_kind},
        {"mean", std::vector<double>(c.stats.mean.data(), c.stats.mean.data() + c.stats.mean.size())},
        {"std", std::vector<double>(c.stats.std.data(), c.stats.std.data() + c.stats.std.size())},
    };
    j["expert_names"] = c.expert_names;
    j["feature_names"] = c.feature_names;
    j["seed"] = c.seed;
    j["config"] = config_to_json(c.config);
    return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint c;
    try {
        if (j.at("schema") != "mpmoe.checkpoint") throw DataError("not a checkpoint document");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                            std::to_string(kCheckpointVersion) + ")");
        c.model.dims = j.at("layer_dims").get<std::vector<std::size_t>>();
        c.model.activation = parse_activation(j.at("activation").get<std::string>());
        const auto& layers = j.at("layers");
        if (c.model.dims.size() < 2 || layers.size() + 1 != c.model.dims.size())
            throw DataError("checkpoint layer count does not match layer_dims");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& lj = layers[l];
            const auto rows = lj.at("rows").get<Eigen::Index>(), cols = lj.at("cols").get<Eigen::Index>();
            if (rows != static_cast<Eigen::Index>(c.model.dims[l]) || cols != static_cast<Eigen::Index>(c.model.dims[l + 1]))
                throw DataError("checkpoint layer " + std::to_string(l) + " has inconsistent shape");
            auto w = lj.at("weights").get<std::vector<double>>();
            auto b = lj.at("bias").get<std::vector<double>>();
            if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(cols))
                throw DataError("checkpoint layer " + std::to_string(l) + " has wrong parameter count");
            DenseLayer layer{Eigen::Map<Matrix>(w.data(), rows, cols), Eigen::Map<Vector>(b.data(), cols)};
            if (!layer.weights.allFinite() || !layer.bias.allFinite())
                throw DataError("checkpoint layer " + std::to_string(l) + " has non-finite parameters");
            c.model.layers.push_back(std::move(layer));
        }
        auto mean = j.at("normalization").at("mean").get<std::vector<double>>();
        auto sd = j.at("normalization").at("std").get<std::vector<double>>();
        if (mean.size() != c.model.dims.front() || sd.size() != mean.size())
            throw DataError("checkpoint normalization does not match input width");
        c.stats.mean = Eigen::Map<Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        c.stats.std = Eigen::Map<Vector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
        c.expert_names = j.at("expert_names").get<std::vector<std::string>>();
        c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        if (c.expert_names.size() != c.model.dims.back())
            throw DataError("checkpoint expert list does not match output width");
        c.seed = j.at("seed").get<std::uint64_t>();
        c.config = config_from_json(j.at("config"));
    } catch (const json::exception& e) {
        throw DataError(std::string("corrupted checkpoint: ") + e.what());
    }
    return c;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("cannot parse '" + path + "': " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Delimited tables

// epoch,total,mse_term,mp_term,lambda
inline void write_loss_log(std::ostream& out, const std::vector<LossBreakdown>& epochs) {
    out << "epoch,total,mse_term,mp_term,lambda\n";
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        const auto& l = epochs[e];
        out << e << ',' << format_double(l.total) << ',' << format_double(l.mse_term) << ','
            << format_double(l.mp_term) << ',' << format_double(l.lambda) << '\n';
    }
}

// timestamp,observed,forecast,gate_<expert>...
inline void write_forecast_dump(std::ostream& out, const ForecastPanel& panel, const Evaluation& e) {
    out << "timestamp,observed,forecast";
    for (const auto& n : panel.expert_names) out << ",gate_" << n;
    out << '\n';
    for (std::size_t i = 0; i < e.rows.size(); ++i) {
        const auto row = e.rows.begin + i;
        const auto r = static_cast<Eigen::Index>(i);
        out << format_timestamp(panel.timestamps[row]) << ',' << format_double(panel.observed(static_cast<Eigen::Index>(row)))
            << ',' << format_double(e.forecast(r));
        for (Eigen::Index k = 0; k < e.gates.cols(); ++k) out << ',' << format_double(e.gates(r, k));
        out << '\n';
    }
}

inline std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); }

// One row per seed plus mean/std/median rows; `label` prefixes every row.
inline void write_summary_header(std::ostream& out, const Aggregate& a) {
    out << "label,lambda,row";
    for (const auto& k : a.keys) out << ',' << k;
    out << '\n';
}

inline void write_summary_rows(std::ostream& out, const std::string& label, const Aggregate& a) {
    for (const auto& r : a.runs) {
        out << label << ',' << format_double(a.lambda) << ",seed_" << r.seed;
        for (const auto& [k, v] : flatten(r)) out << ',' << cell(v);
        out << '\n';
    }
    for (const char* stat : {"mean", "std", "median"}) {
        out << label << ',' << format_double(a.lambda) << ',' << stat;
        for (const auto& k : a.keys) {
            const auto& s = a.at(k);
            const auto& v = std::string(stat) == "mean" ? s.mean : std::string(stat) == "std" ? s.std : s.median;
            out << ',' << cell(v);
        }
        out << '\n';
    }
}

// Tidy table: one row per aggregate with mean/std/median of every metric.
inline void write_aggregate_table(std::ostream& out, const std::vector<std::pair<std::string, Aggregate>>& rows) {
    if (rows.empty()) return;
    out << "label,lambda,n_seeds";
    for (const auto& k : rows.front().second.keys) out << ',' << k << "_mean," << k << "_std," << k << "_median";
    out << '\n';
    for (const auto& [label, a] : rows) {
        out << label << ',' << format_double(a.lambda) << ',' << a.runs.size();
        for (const auto& k : a.keys) {
            const auto& s = a.at(k);
            out << ',' << cell(s.mean) << ',' << cell(s.std) << ',' << cell(s.median);
        }
        out << '\n';
    }
}

inline json aggregate_to_json(const Aggregate& a) {
    json j;
    j["lambda"] = a.lambda;
    j["seeds"] = json::array();
    for (const auto& r : a.runs) j["seeds"].push_back(r.seed);
    json m = json::object();
    for (const auto& k : a.keys) {
        const auto& s = a.at(k);
        m[k] = {{"mean", detail::optional_number(s.mean)},
                {"std", detail::optional_number(s.std)},
                {"median", detail::optional_number(s.median)},
                {"defined", s.defined}};
    }
    j["metrics"] = m;
    return j;
}

} // namespace mpmoe

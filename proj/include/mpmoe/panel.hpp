#pragma once

// ForecastPanel: the aligned hourly table of expert forecasts, gating
// features and gauge observations, plus its delimited-text reader/writer.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <yaml-cpp/yaml.h>

#include "mpmoe/error.hpp"

namespace mpmoe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Hours since 1970-01-01T00:00Z.
using EpochHours = std::int64_t;

struct ForecastPanel {
    std::vector<EpochHours> timestamps;
    Matrix experts;   // N x K, mm/h
    Matrix features;  // N x F, physical units
    Vector observed;  // N, mm/h
    std::vector<std::string> expert_names;
    std::vector<std::string> feature_names;

    std::size_t rows() const noexcept { return timestamps.size(); }
    std::size_t num_experts() const noexcept { return expert_names.size(); }
    std::size_t num_features() const noexcept { return feature_names.size(); }

    bool operator==(const ForecastPanel& o) const {
        return timestamps == o.timestamps && experts == o.experts && features == o.features &&
               observed == o.observed && expert_names == o.expert_names &&
               feature_names == o.feature_names;
    }
};

// Throws DataError when any panel invariant is violated.
inline void validate(const ForecastPanel& p) {
    const auto n = static_cast<Eigen::Index>(p.rows());
    if (p.experts.rows() != n || p.features.rows() != n || p.observed.size() != n)
        throw DataError("panel row counts disagree");
    if (p.experts.cols() != static_cast<Eigen::Index>(p.num_experts()))
        throw DataError("expert column count does not match expert_names");
    if (p.features.cols() != static_cast<Eigen::Index>(p.num_features()))
        throw DataError("feature column count does not match feature_names");
    for (std::size_t i = 1; i < p.rows(); ++i) {
        if (p.timestamps[i] - p.timestamps[i - 1] != 1)
            throw TimeGapError("timestamps are not uniformly hourly between rows " +
                               std::to_string(i - 1) + " and " + std::to_string(i));
    }
    if (!p.experts.allFinite() || !p.features.allFinite() || !p.observed.allFinite())
        throw DataError("panel contains non-finite values");
    if ((p.experts.array() < 0.0).any() || (p.observed.array() < 0.0).any())
        throw DataError("rainfall values must be non-negative");
}

// ---------------------------------------------------------------------------
// Timestamps

inline std::string format_timestamp(EpochHours h) {
    using namespace std::chrono;
    const auto tp = sys_time<hours>{hours{h}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const auto hh = (tp - day).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:00:00Z", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(hh));
    return buf;
}

namespace detail {

inline bool parse_int(std::string_view s, long long& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

} // namespace detail

// Accepts integer epoch hours or ISO-8601 "YYYY-MM-DDTHH[:MM[:SS]][Z]".
inline std::optional<EpochHours> parse_timestamp(std::string_view s) {
    s = detail::trim(s);
    long long v = 0;
    if (detail::parse_int(s, v)) return v;
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() < 13 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' '))
        return std::nullopt;
    long long y, mo, d, hh, mi = 0, se = 0;
    if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), mo) ||
        !detail::parse_int(s.substr(8, 2), d) || !detail::parse_int(s.substr(11, 2), hh))
        return std::nullopt;
    if (s.size() >= 16) {
        if (s[13] != ':' || !detail::parse_int(s.substr(14, 2), mi)) return std::nullopt;
    }
    if (s.size() >= 19) {
        if (s[16] != ':' || !detail::parse_int(s.substr(17, 2), se)) return std::nullopt;
    }
    if (s.size() != 13 && s.size() != 16 && s.size() != 19) return std::nullopt;
    if (mi != 0 || se != 0 || hh < 0 || hh > 23) return std::nullopt;  // hourly only
    using namespace std::chrono;
    const year_month_day ymd{year{static_cast<int>(y)}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd}.time_since_epoch().count() * 24 + hh;
}

// ---------------------------------------------------------------------------
// Number formatting: shortest representation that round-trips exactly.

inline std::string format_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Column schema

struct Schema {
    std::string timestamp = "timestamp";
    std::vector<std::string> experts;
    std::vector<std::string> features;
    std::string observed = "observed";

    static constexpr std::string_view expert_prefix = "exp_";
    static constexpr std::string_view feature_prefix = "feat_";

    // Schema mapping file (YAML): timestamp, experts, features, observed.
    static Schema from_yaml_file(const std::string& path) {
        YAML::Node root;
        try {
            root = YAML::LoadFile(path);
        } catch (const YAML::Exception& e) {
            throw ConfigError("cannot read schema file '" + path + "': " + e.what());
        }
        Schema s;
        try {
            if (root["timestamp"]) s.timestamp = root["timestamp"].as<std::string>();
            if (root["observed"]) s.observed = root["observed"].as<std::string>();
            if (root["experts"]) s.experts = root["experts"].as<std::vector<std::string>>();
            if (root["features"]) s.features = root["features"].as<std::vector<std::string>>();
        } catch (const YAML::Exception& e) {
            throw ConfigError("invalid schema file '" + path + "': " + e.what());
        }
        return s;
    }

    // Default naming convention used by write_panel: exp_* and feat_* columns.
    static Schema infer(const std::vector<std::string>& header) {
        Schema s;
        for (const auto& h : header) {
            if (h.starts_with(expert_prefix)) s.experts.push_back(h);
            else if (h.starts_with(feature_prefix)) s.features.push_back(h);
        }
        return s;
    }
};

struct LoadResult {
    ForecastPanel panel;
    std::size_t dropped_rows = 0;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool is_missing_token(std::string_view s) {
    return s.empty() || s == "NA" || s == "na" || s == "null" || s == "NULL";
}

// Returns false for a missing/non-finite cell; throws on unparseable text.
inline bool parse_cell(std::string_view s, double& out, std::size_t line_no) {
    if (is_missing_token(s)) return false;
    const char* b = s.data();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, s.data() + s.size(), out);
    if (ptr != s.data() + s.size() || (ec != std::errc{} && ec != std::errc::result_out_of_range))
        throw MalformedFileError("line " + std::to_string(line_no) + ": cannot parse '" +
                                 std::string(s) + "' as a number");
    return std::isfinite(out);
}

inline std::string strip_prefix(const std::string& name, std::string_view prefix) {
    return name.starts_with(prefix) ? name.substr(prefix.size()) : name;
}

} // namespace detail

// Reads a comma-separated panel. Rows with missing or non-finite values are
// dropped and counted; the surviving rows must still be uniformly hourly.
inline LoadResult load_panel(std::istream& in, std::optional<Schema> schema = std::nullopt) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw MalformedFileError("empty file: missing header row");
    ++line_no;
    std::vector<std::string> header;
    for (auto h : detail::split_csv(line)) header.emplace_back(h);

    Schema s = schema ? *schema : Schema::infer(header);
    if (s.experts.size() < 2) throw MissingColumnError("schema must name at least 2 expert columns");
    if (s.features.empty()) throw MissingColumnError("schema must name at least 1 feature column");

    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
    auto locate = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw MissingColumnError("missing declared column '" + name + "'");
        return it->second;
    };
    const std::size_t ts_col = locate(s.timestamp);
    const std::size_t obs_col = locate(s.observed);
    std::vector<std::size_t> exp_cols, feat_cols;
    for (const auto& e : s.experts) exp_cols.push_back(locate(e));
    for (const auto& f : s.features) feat_cols.push_back(locate(f));

    const std::size_t k = exp_cols.size(), f = feat_cols.size();
    std::vector<EpochHours> ts;
    std::vector<double> ex, fe, ob;
    std::size_t dropped = 0;
    std::vector<double> erow(k), frow(f);

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv(line);
        if (cells.size() != header.size())
            throw MalformedFileError("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " fields, found " +
                                     std::to_string(cells.size()));
        auto t = parse_timestamp(cells[ts_col]);
        if (!t)
            throw MalformedFileError("line " + std::to_string(line_no) + ": bad timestamp '" +
                                     std::string(cells[ts_col]) + "'");
        bool ok = true;
        double obs = 0.0;
        ok &= detail::parse_cell(cells[obs_col], obs, line_no);
        for (std::size_t j = 0; j < k; ++j) ok &= detail::parse_cell(cells[exp_cols[j]], erow[j], line_no);
        for (std::size_t j = 0; j < f; ++j) ok &= detail::parse_cell(cells[feat_cols[j]], frow[j], line_no);
        if (!ok) {
            ++dropped;
            continue;
        }
        ts.push_back(*t);
        ob.push_back(obs);
        ex.insert(ex.end(), erow.begin(), erow.end());
        fe.insert(fe.end(), frow.begin(), frow.end());
    }

    LoadResult r;
    r.dropped_rows = dropped;
    auto& p = r.panel;
    const auto n = static_cast<Eigen::Index>(ts.size());
    p.timestamps = std::move(ts);
    p.experts = Eigen::Map<Matrix>(ex.data(), n, static_cast<Eigen::Index>(k));
    p.features = Eigen::Map<Matrix>(fe.data(), n, static_cast<Eigen::Index>(f));
    p.observed = Eigen::Map<Vector>(ob.data(), n);
    for (const auto& e : s.experts) p.expert_names.push_back(detail::strip_prefix(e, Schema::expert_prefix));
    for (const auto& x : s.features) p.feature_names.push_back(detail::strip_prefix(x, Schema::feature_prefix));
    validate(p);
    return r;
}

inline LoadResult load_panel(const std::string& path, std::optional<Schema> schema = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return load_panel(in, std::move(schema));
}

// Writes the panel in the default exp_/feat_ convention, values in
// round-trip precision, timestamps as ISO-8601.
inline void write_panel(std::ostream& out, const ForecastPanel& p) {
    out << "timestamp";
    for (const auto& e : p.expert_names) out << ',' << Schema::expert_prefix << e;
    for (const auto& f : p.feature_names) out << ',' << Schema::feature_prefix << f;
    out << ",observed\n";
    for (std::size_t i = 0; i < p.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << format_timestamp(p.timestamps[i]);
        for (Eigen::Index j = 0; j < p.experts.cols(); ++j) out << ',' << format_double(p.experts(r, j));
        for (Eigen::Index j = 0; j < p.features.cols(); ++j) out << ',' << format_double(p.features(r, j));
        out << ',' << format_double(p.observed(r)) << '\n';
    }
}

inline void write_panel(const std::string& path, const ForecastPanel& p) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_panel(out, p);
}

} // namespace mpmoe

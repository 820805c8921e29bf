#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace mpmoe;

namespace {

struct Fixture {
    ForecastPanel panel;
    TrainConfig config;
    TrainedRun run;
    NormalizationStats stats;
};

const Fixture& trained() {
    static const Fixture f = [] {
        Fixture x;
        x.panel = generate_synthetic(standard_spec(400), 21);
        x.config.epochs = 3;
        x.config.hidden_dims = {8, 8, 4};
        x.config.dtw_band = 12;
        x.run = train(x.panel, x.config, 2024);
        x.stats = prepare(x.panel, x.config).stats;
        return x;
    }();
    return f;
}

Checkpoint make_checkpoint() {
    const auto& f = trained();
    return Checkpoint{f.run.model, f.stats, f.panel.expert_names, f.panel.feature_names, f.config, 2024};
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

} // namespace

TEST(ConfigJson, RoundTripsEveryField) {
    TrainConfig c;
    c.lambda = 0.25;
    c.seeds = {3, 9};
    c.hidden_dims = {5, 7};
    c.activation = Activation::tanh;
    c.shuffle = false;
    c.gate_includes_experts = true;
    c.dtw_band = 6;
    EXPECT_EQ(config_from_json(json::parse(config_to_json(c).dump())), c);
    EXPECT_EQ(config_from_json(config_to_json(TrainConfig{})), TrainConfig{});
    auto broken = config_to_json(c);
    broken.erase("lr");
    EXPECT_THROW(config_from_json(broken), DataError);
}

TEST(ReportJson, RoundTripsIncludingUndefinedScores) {
    const auto& r = trained().run.result.report;
    EXPECT_EQ(report_from_json(json::parse(dump(report_to_json(r)))), r);
    MetricsReport sparse;
    sparse.mae_acc = {{12, 1.5}, {24, std::nullopt}, {48, std::nullopt}};
    sparse.csi = {{1.0, 0.5}, {3.0, std::nullopt}, {5.0, std::nullopt}};
    sparse.csi_m = 0.5;
    const auto j = report_to_json(sparse);
    EXPECT_TRUE(j.at("mae_acc").at("48").is_null());
    EXPECT_TRUE(j.at("csi").at("3").is_null());
    EXPECT_EQ(report_from_json(j), sparse);
}

TEST(ReportJson, StatesTheDtwConvention) {
    const auto& r = trained().run.result.report;
    EXPECT_NE(report_to_json(r).at("conventions").at("dtw").get<std::string>().find("unconstrained"), std::string::npos);
    EXPECT_NE(report_to_json(r, DtwOptions{12}).at("conventions").at("dtw").get<std::string>().find("band 12"),
              std::string::npos);
}

TEST(Checkpoint, RoundTripReproducesTheForecastExactly) {
    const auto& f = trained();
    const auto back = checkpoint_from_json(json::parse(dump(checkpoint_to_json(make_checkpoint()))));
    EXPECT_EQ(back.model, f.run.model);
    EXPECT_EQ(back.stats.mean, f.stats.mean);
    EXPECT_EQ(back.stats.std, f.stats.std);
    EXPECT_EQ(back.expert_names, f.panel.expert_names);
    EXPECT_EQ(back.feature_names, f.panel.feature_names);
    EXPECT_EQ(back.config, f.config);
    EXPECT_EQ(back.seed, 2024u);

    const auto s = split(f.panel, SplitSpec{f.config.split});
    const auto e = evaluate(back.model, f.panel, s.test, back.stats, false, DtwOptions{back.config.dtw_band});
    EXPECT_EQ(e.report, f.run.result.report);
    EXPECT_EQ(e.forecast, f.run.evaluation.forecast);
}

TEST(Checkpoint, UnsupportedVersionIsRejected) {
    auto j = checkpoint_to_json(make_checkpoint());
    j["version"] = kCheckpointVersion + 1;
    try {
        checkpoint_from_json(j);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
}

TEST(Checkpoint, CorruptionsAreDataErrors) {
    const auto good = checkpoint_to_json(make_checkpoint());
    auto expect_bad = [](json j) { EXPECT_THROW(checkpoint_from_json(j), DataError) << j.dump().substr(0, 80); };

    auto j = good;
    j["schema"] = "something.else";
    expect_bad(j);
    j = good;
    j["layers"].erase(1);
    expect_bad(j);
    j = good;
    j["layers"][0]["weights"].erase(0);
    expect_bad(j);
    j = good;
    j["layers"][0]["rows"] = 99;
    expect_bad(j);
    j = good;
    j["layers"][2]["bias"][0] = "x";
    expect_bad(j);
    j = good;
    j["normalization"]["mean"].erase(0);
    expect_bad(j);
    j = good;
    j["expert_names"].erase(0);
    expect_bad(j);
    j = good;
    j.erase("config");
    expect_bad(j);
}

TEST(Checkpoint, UnreadableFilesAreDataErrors) {
    const auto dir = std::filesystem::temp_directory_path() / "mpmoe_serialization_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "truncated.json").string();
    const auto text = dump(checkpoint_to_json(make_checkpoint()));
    write_text_file(path, text.substr(0, text.size() / 2));
    EXPECT_THROW(read_json_file(path), DataError);
    EXPECT_THROW(read_json_file((dir / "absent.json").string()), DataError);
    std::filesystem::remove_all(dir);
}

TEST(Tables, LossLogHasOneRowPerEpoch) {
    const auto& r = trained().run.result;
    std::ostringstream out;
    write_loss_log(out, r.epochs);
    const auto lines = lines_of(out.str());
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "epoch,total,mse_term,mp_term,lambda");
    EXPECT_EQ(lines[1].substr(0, 2), "0,");
    EXPECT_EQ(lines[3].substr(lines[3].rfind(',') + 1), "0.6");
}

TEST(Tables, ForecastDumpCoversTheTestSplit) {
    const auto& f = trained();
    std::ostringstream out;
    write_forecast_dump(out, f.panel, f.run.evaluation);
    const auto lines = lines_of(out.str());
    ASSERT_EQ(lines.size(), 1u + 120u);
    EXPECT_EQ(lines[0].substr(0, 27), "timestamp,observed,forecast");
    EXPECT_NE(lines[0].find(",gate_" + f.panel.expert_names.back()), std::string::npos);
    EXPECT_EQ(lines[1].substr(0, 20), format_timestamp(f.panel.timestamps[280]));
    // every row: timestamp, observed, forecast, one gate per expert; gates sum to one
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::vector<std::string> cells;
        for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
        ASSERT_EQ(cells.size(), 3u + f.panel.num_experts());
        double sum = 0.0;
        for (std::size_t k = 3; k < cells.size(); ++k) sum += std::stod(cells[k]);
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Tables, SummaryRowsCarrySeedAndStatisticRows) {
    const auto& f = trained();
    auto cfg = f.config;
    cfg.seeds = {0, 1};
    const auto a = run_seeds(f.panel, cfg);
    std::ostringstream out;
    write_summary_header(out, a);
    write_summary_rows(out, "lambda=0.6", a);
    const auto lines = lines_of(out.str());
    ASSERT_EQ(lines.size(), 1u + 2u + 3u);
    EXPECT_EQ(lines[0].substr(0, 17), "label,lambda,row,");
    EXPECT_EQ(lines[1].substr(0, 22), "lambda=0.6,0.6,seed_0,");
    EXPECT_EQ(lines[3].substr(0, 20), "lambda=0.6,0.6,mean,");
    EXPECT_EQ(lines[5].substr(0, 22), "lambda=0.6,0.6,median,");
    const auto j = aggregate_to_json(a);
    EXPECT_EQ(j.at("seeds"), json::array({0, 1}));
    EXPECT_EQ(j.at("metrics").at("dtw").at("mean").get<double>(), *a.at("dtw").mean);
}

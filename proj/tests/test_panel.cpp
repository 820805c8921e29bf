#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace mpmoe;

namespace {

std::string panel_text(const std::vector<std::string>& rows) {
    std::string s = "timestamp,exp_a,exp_b,feat_x,observed\n";
    for (const auto& r : rows) s += r + "\n";
    return s;
}

LoadResult load_text(const std::string& text, std::optional<Schema> schema = std::nullopt) {
    std::istringstream in(text);
    return load_panel(in, std::move(schema));
}

} // namespace

TEST(Timestamp, FormatsKnownInstants) {
    EXPECT_EQ(format_timestamp(0), "1970-01-01T00:00:00Z");
    EXPECT_EQ(format_timestamp(438288), "2020-01-01T00:00:00Z");
    // 2020 is a leap year: 2020-02-29 is day 59 of the year
    EXPECT_EQ(format_timestamp(438288 + 59 * 24 + 13), "2020-02-29T13:00:00Z");
    EXPECT_EQ(format_timestamp(-1), "1969-12-31T23:00:00Z");
}

TEST(Timestamp, ParsesIsoAndEpochHours) {
    EXPECT_EQ(parse_timestamp("2020-01-01T00:00:00Z"), 438288);
    EXPECT_EQ(parse_timestamp("2020-01-01T05"), 438293);
    EXPECT_EQ(parse_timestamp("2020-01-01 05:00"), 438293);
    EXPECT_EQ(parse_timestamp("438288"), 438288);
    EXPECT_EQ(parse_timestamp(" \"12\" "), 12);
    EXPECT_FALSE(parse_timestamp("2020-01-01T05:30:00Z"));
    EXPECT_FALSE(parse_timestamp("2020-02-30T00:00:00Z"));
    EXPECT_FALSE(parse_timestamp("yesterday"));
}

TEST(Timestamp, RoundTripsOverSeveralYears) {
    for (EpochHours h = 430000; h < 470000; h += 37) EXPECT_EQ(parse_timestamp(format_timestamp(h)), h);
}

TEST(FormatDouble, RoundTripsExactly) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5, 0.0}) {
        const auto s = format_double(v);
        EXPECT_EQ(std::stod(s), v) << s;
    }
}

TEST(LoadPanel, ReadsPrefixedColumnsAndStripsPrefixes) {
    const auto r = load_text(panel_text({"0,1,2,0.5,1.5", "1,3,4,0.25,2.5", "2,0,0,0,0"}));
    EXPECT_EQ(r.dropped_rows, 0u);
    const auto& p = r.panel;
    ASSERT_EQ(p.rows(), 3u);
    EXPECT_EQ(p.expert_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(p.feature_names, (std::vector<std::string>{"x"}));
    EXPECT_EQ(p.experts(1, 1), 4.0);
    EXPECT_EQ(p.features(0, 0), 0.5);
    EXPECT_EQ(p.observed(1), 2.5);
}

TEST(LoadPanel, DropsMissingRowsAtTheEdges) {
    // two missing rows at the head and one at the tail: survivors stay hourly
    const auto r = load_text(panel_text({"0,NA,2,0.5,1", "1,1,2,nan,1", "2,1,2,0.5,1", "3,1,2,0.5,1",
                                         "4,1,2,0.5,1", "5,1,2,0.5,"}));
    EXPECT_EQ(r.dropped_rows, 3u);
    EXPECT_EQ(r.panel.rows(), 3u);
    EXPECT_EQ(r.panel.timestamps.front(), 2);
}

TEST(LoadPanel, InteriorDropThatOpensAGapIsRejected) {
    EXPECT_THROW(load_text(panel_text({"0,1,1,0,1", "1,1,1,0,null", "2,1,1,0,1"})), TimeGapError);
}

TEST(LoadPanel, TwoHourGapIsRejected) {
    EXPECT_THROW(load_text(panel_text({"0,1,1,0,1", "2,1,1,0,1"})), TimeGapError);
}

TEST(LoadPanel, MalformedInputs) {
    EXPECT_THROW(load_text(""), MalformedFileError);
    EXPECT_THROW(load_text(panel_text({"0,1,1,0"})), MalformedFileError);
    EXPECT_THROW(load_text(panel_text({"0,1,abc,0,1"})), MalformedFileError);
    EXPECT_THROW(load_text(panel_text({"noon,1,1,0,1"})), MalformedFileError);
}

TEST(LoadPanel, NegativeRainfallIsRejected) {
    EXPECT_THROW(load_text(panel_text({"0,1,-1,0,1"})), DataError);
}

TEST(LoadPanel, ExplicitSchemaSelectsAndOrdersColumns) {
    Schema s;
    s.timestamp = "time";
    s.observed = "gauge";
    s.experts = {"wrf2", "wrf1"};
    s.features = {"rh"};
    const std::string text = "time,wrf1,wrf2,rh,gauge,unused\n"
                             "2020-01-01T00:00:00Z,1,2,80,0.5,x\n"
                             "2020-01-01T01:00:00Z,3,4,81,0.7,y\n";
    const auto p = load_text(text, s).panel;
    EXPECT_EQ(p.expert_names, (std::vector<std::string>{"wrf2", "wrf1"}));
    EXPECT_EQ(p.experts(1, 0), 4.0);
    EXPECT_EQ(p.timestamps.front(), 438288);

    s.features = {"missing_col"};
    EXPECT_THROW(load_text(text, s), MissingColumnError);
}

TEST(LoadPanel, NeedsTwoExpertsAndOneFeature) {
    EXPECT_THROW(load_text("timestamp,exp_a,feat_x,observed\n0,1,1,1\n"), MissingColumnError);
    EXPECT_THROW(load_text("timestamp,exp_a,exp_b,observed\n0,1,1,1\n"), MissingColumnError);
}

TEST(WritePanel, WriteThenLoadIsIdentity) {
    std::mt19937_64 rng(5);
    auto p = fixtures::make_panel(fixtures::random_series(rng, 40), {fixtures::random_series(rng, 40), fixtures::random_series(rng, 40)},
                                 {fixtures::random_series(rng, 40, -3, 3)});
    for (auto& t : p.timestamps) t += 438288;
    std::ostringstream out;
    write_panel(out, p);
    const auto back = load_text(out.str());
    EXPECT_EQ(back.dropped_rows, 0u);
    EXPECT_EQ(back.panel, p);
}

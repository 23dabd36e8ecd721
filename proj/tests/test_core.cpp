#include <catch2/catch_amalgamated.hpp>

#include "alphacast/core.hpp"
#include "alphacast/hash.hpp"
#include "alphacast/time.hpp"
#include "support/fixtures.hpp"
#include "support/matchers.hpp"

using namespace alphacast;
using Catch::Matchers::WithinAbs;

TEST_CASE("instant parsing and canonical formatting") {
    CHECK(parse_instant("1970-01-01") == 0);
    CHECK(parse_instant("1970-01-02") == 86400);
    CHECK(parse_instant("2016-01-01 00:00") == 1451606400);
    CHECK(parse_instant("2016-01-01T00:00") == 1451606400);
    CHECK(parse_instant("2016-01-01 00:00:30") == 1451606430);
    CHECK(format_instant(1451606400) == "2016-01-01 00:00:00");
    CHECK(format_instant(parse_instant("1999-12-31 23:59:59")) == "1999-12-31 23:59:59");
    CHECK(format_instant(-1) == "1969-12-31 23:59:59");

    for (const char* bad : {"2016", "2016-13-01", "2016-01-32", "2016-01-01 25:00",
                            "2016-01-01x00:00", "2016-01-01 00:00:00.5"}) {
        CHECK_THROWS_MATCHES(parse_instant(bad), Error, ErrorKindIs(ErrorKind::parse_error));
    }
}

TEST_CASE("frequency parsing and seasonal periods") {
    CHECK(parse_frequency("1h").step_seconds == 3600);
    CHECK(parse_frequency("15min").step_seconds == 900);
    CHECK(parse_frequency("1d").step_seconds == 86400);
    CHECK(parse_frequency("30s").step_seconds == 30);
    CHECK(parse_frequency("1h").text == "1h");
    CHECK_THROWS_MATCHES(parse_frequency("h"), Error, ErrorKindIs(ErrorKind::parse_error));
    CHECK_THROWS_MATCHES(parse_frequency("0h"), Error, ErrorKindIs(ErrorKind::parse_error));
    CHECK_THROWS_MATCHES(parse_frequency("5fortnights"), Error,
                         ErrorKindIs(ErrorKind::parse_error));

    CHECK(season_period(parse_frequency("1h")) == 24);
    CHECK(season_period(parse_frequency("15min")) == 96);
    CHECK(season_period(parse_frequency("1d")) == 7);
    CHECK(season_period(parse_frequency("2d")) == 2);
    CHECK(season_period(parse_frequency("13h")) == 2); // 86400/46800 < 2 -> floor 1 -> min 2
}

TEST_CASE("window enumeration covers the documented layout") {
    auto series = fixtures::make_series("y", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    SECTION("length 10, H=3, L=2, stride 1 gives 6 windows with anchors 2..7") {
        auto windows = enumerate_windows(series, {0, 10}, 3, 2, 1);
        REQUIRE(windows.size() == 6);
        for (std::size_t i = 0; i < windows.size(); ++i) {
            CHECK(windows[i].anchor_index == i + 2);
            CHECK(windows[i].channel == "y");
            REQUIRE(windows[i].lookback.size() == 3);
            REQUIRE(windows[i].future.has_value());
            REQUIRE(windows[i].future->size() == 2);
            CHECK(windows[i].lookback.back() == double(i + 2));
            CHECK(windows[i].future->front() == double(i + 3));
        }
    }

    SECTION("stride skips anchors") {
        auto windows = enumerate_windows(series, {0, 10}, 3, 2, 3);
        REQUIRE(windows.size() == 2);
        CHECK(windows[0].anchor_index == 2);
        CHECK(windows[1].anchor_index == 5);
    }

    SECTION("sub-range offsets the anchors") {
        auto windows = enumerate_windows(series, {2, 10}, 3, 2, 1);
        REQUIRE(windows.size() == 4);
        CHECK(windows.front().anchor_index == 4);
        CHECK(windows.back().anchor_index == 7);
    }

    SECTION("range shorter than H + L is an error") {
        CHECK_THROWS_MATCHES(enumerate_windows(series, {0, 4}, 3, 2, 1), Error,
                             ErrorKindIs(ErrorKind::range_too_short));
    }

    SECTION("degenerate parameters are rejected") {
        CHECK_THROWS_MATCHES(enumerate_windows(series, {0, 10}, 0, 2, 1), Error,
                             ErrorKindIs(ErrorKind::invalid_argument));
        CHECK_THROWS_MATCHES(enumerate_windows(series, {0, 10}, 3, 2, 0), Error,
                             ErrorKindIs(ErrorKind::invalid_argument));
        CHECK_THROWS_MATCHES(enumerate_windows(series, {0, 11}, 3, 2, 1), Error,
                             ErrorKindIs(ErrorKind::invalid_argument));
    }
}

TEST_CASE("task input slicing produces the d x (H+L) block") {
    const std::size_t n = 400;
    std::vector<double> endo(n), e0(n), e1(n);
    for (std::size_t i = 0; i < n; ++i) {
        endo[i] = double(i);
        e0[i] = 1000.0 + double(i);
        e1[i] = 2000.0 + double(i);
    }
    auto ds = fixtures::make_dataset(endo, {e0, e1}, 300, 50, 50);

    SECTION("d=2, H=168, L=24 gives a 2 x 192 block and 168 lookback values") {
        ForecastTask task{168, 24, 199, "forecast"};
        auto inputs = slice_task_inputs(ds, task);
        REQUIRE(inputs.exo_matrix.size() == 2);
        CHECK(inputs.exo_matrix[0].size() == 192);
        CHECK(inputs.exo_matrix[1].size() == 192);
        CHECK(inputs.endo_lookback.size() == 168);
        CHECK(inputs.timestamps.size() == 192);
        CHECK(inputs.endo_lookback.front() == 32.0); // anchor 199, lookback starts at 32
        CHECK(inputs.endo_lookback.back() == 199.0);
        CHECK(inputs.exo_matrix[0].front() == 1032.0);
        CHECK(inputs.exo_matrix[0].back() == 1223.0); // covers the horizon
        REQUIRE(inputs.truth.has_value());
        CHECK(inputs.truth->front() == 200.0);
        CHECK(inputs.truth->size() == 24);
    }

    SECTION("horizon past the data end needs no exogenous channels") {
        ForecastTask task{168, 24, n - 1, "forecast"};
        CHECK_THROWS_MATCHES(slice_task_inputs(ds, task), Error,
                             ErrorKindIs(ErrorKind::missing_covariate));

        auto plain = fixtures::make_dataset(endo, {}, 300, 50, 50);
        auto inputs = slice_task_inputs(plain, task);
        CHECK_FALSE(inputs.truth.has_value());
        REQUIRE(inputs.timestamps.size() == 192);
        // horizon timestamps continue on the fixed grid
        CHECK(inputs.timestamps.back() - inputs.timestamps.front() == 191 * 3600);
    }

    SECTION("anchor too early for the lookback is rejected") {
        ForecastTask task{168, 24, 100, "forecast"};
        CHECK_THROWS_MATCHES(slice_task_inputs(ds, task), Error,
                             ErrorKindIs(ErrorKind::invalid_argument));
    }

    SECTION("task_truth tracks horizon visibility") {
        CHECK(task_truth(ds, ForecastTask{168, 24, 199, ""}).has_value());
        CHECK_FALSE(task_truth(ds, ForecastTask{168, 24, n - 24, ""}).has_value());
        auto t = task_truth(ds, ForecastTask{168, 24, n - 25, ""});
        REQUIRE(t.has_value());
        CHECK(t->back() == double(n - 1));
    }
}

TEST_CASE("dataset fingerprints react to any content change") {
    auto base = fixtures::make_dataset(fixtures::noisy(1, 64), {fixtures::noisy(2, 64)}, 40, 12, 12);
    const auto fp = base.fingerprint();
    CHECK(fp == base.fingerprint()); // stable

    auto value_changed = base;
    value_changed.endogenous.values[10] += 1e-9;
    CHECK(value_changed.fingerprint() != fp);

    auto renamed = base;
    renamed.exogenous[0].name = "other";
    CHECK(renamed.fingerprint() != fp);

    auto resplit = base;
    resplit.splits.train.end -= 1;
    CHECK(resplit.fingerprint() != fp);
}

TEST_CASE("fnv1a hashing is stable and hex rendering is fixed-width") {
    CHECK(hash_string("") == 14695981039346656037ull);
    CHECK(hash_string("a") == Fnv1a{}.str("a").value());
    CHECK(hash_string("ab") != hash_string("ba"));
    CHECK(to_hex(0) == "0000000000000000");
    CHECK(to_hex(0x1a2b3c4d5e6f7081ull) == "1a2b3c4d5e6f7081");
    CHECK(Fnv1a{}.f64(0.5).value() == Fnv1a{}.f64(0.5).value());
    CHECK(Fnv1a{}.f64(0.5).value() != Fnv1a{}.f64(-0.5).value());
}

#include "hevems/cycle.hpp"
#include "hevems/error.hpp"
#include "hevems/io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hevems;

namespace {

std::string error_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const ValidationError &e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(CycleParse, SingleColumn) {
    const auto c = parse_cycle_csv("0\n1\n2", 1.0);
    EXPECT_EQ(c.speeds, (std::vector<double>{0, 1, 2}));
    EXPECT_EQ(c.dt, 1.0);
}

TEST(CycleParse, TimeColumnHeaderAndCrlf) {
    const auto c = parse_cycle_csv("t,v\r\n0,0.5\r\n0.5,1.5\r\n1.0,2\r\n", 0.5);
    EXPECT_EQ(c.speeds, (std::vector<double>{0.5, 1.5, 2}));
    EXPECT_EQ(c.dt, 0.5);
}

TEST(CycleParse, KmhConversion) {
    const auto c = parse_cycle_csv("v\n0\n36\n", 1.0, true);
    EXPECT_DOUBLE_EQ(c.speeds[1], 10.0);
}

TEST(CycleParse, NegativeSpeedNamesRow) {
    const auto msg = error_of([] { parse_cycle_csv("0\n-1\n2", 1.0); });
    EXPECT_NE(msg.find("negative speed at row 2"), std::string::npos) << msg;
}

TEST(CycleParse, NonUniformSampling) {
    const auto msg = error_of([] { parse_cycle_csv("0,0\n1,1\n3,2\n", 1.0); });
    EXPECT_NE(msg.find("non-uniform sampling"), std::string::npos) << msg;
}

TEST(CycleParse, EmptyAndMissingFiles) {
    EXPECT_THROW(parse_cycle_csv("", 1.0), ValidationError);
    EXPECT_THROW(parse_cycle_csv("t,v\n", 1.0), ValidationError);
    EXPECT_THROW(load_cycle("/nonexistent/cycle.csv"), ValidationError);
}

TEST(CycleParse, RejectsSingleSampleAndBadPeriod) {
    EXPECT_THROW(parse_cycle_csv("3\n", 1.0), ValidationError);
    EXPECT_THROW(make_cycle("x", 0.0, {0, 1}), ValidationError);
    EXPECT_THROW(parse_cycle_csv("0\nabc\n", 1.0), ValidationError);
}

TEST(CycleWindow, Examples) {
    const auto c = make_cycle("c", 1.0, {0, 1, 2, 3});
    EXPECT_EQ(window(c, 1, 2).speeds, (std::vector<double>{1, 2}));
    EXPECT_EQ(window(c, 0, c.size()), c);
    EXPECT_THROW(window(make_cycle("c", 1.0, {0, 1}), 1, 2), ValidationError);
    EXPECT_THROW(window(c, 0, 1), ValidationError);
}

TEST(CycleStats, Examples) {
    auto s = cycle_stats(make_cycle("c", 1.0, {0, 1, 2}));
    EXPECT_EQ(s.duration, 2.0);
    EXPECT_EQ(s.max_speed, 2.0);
    EXPECT_EQ(s.mean_abs_accel, 1.0);
    EXPECT_EQ(s.mean_speed, 1.0);

    s = cycle_stats(make_cycle("c", 1.0, {5, 5, 5}));
    EXPECT_EQ(s.mean_abs_accel, 0.0);

    s = cycle_stats(make_cycle("c", 0.5, {0, 2}));
    EXPECT_EQ(s.duration, 0.5);
    EXPECT_EQ(s.mean_abs_accel, 4.0);
}

TEST(CycleProperties, WriteLoadRoundTripIsBitExact) {
    const auto dir = support::scratch_dir("cycle_roundtrip");
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    std::uniform_int_distribution<int> len(2, 200);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        for (auto &x : v) {
            x = u(rng);
        }
        const double dt = trial % 2 ? 1.0 : 0.1;
        const auto c = make_cycle("rt", dt, v);
        write_cycle(dir / "c.csv", c);
        const auto back = load_cycle(dir / "c.csv", dt);
        EXPECT_EQ(back.speeds, c.speeds);
    }
}

TEST(CycleProperties, WindowIdentityAndDuration) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(2 + trial);
        for (auto &x : v) {
            x = u(rng);
        }
        const auto c = make_cycle("w", 0.25 * (1 + trial % 4), v);
        EXPECT_EQ(window(c, 0, c.size()), c);
        EXPECT_EQ(cycle_stats(c).duration, static_cast<double>(c.size() - 1) * c.dt);
    }
}

TEST(CycleResample, LinearInterpolation) {
    const auto c = make_cycle("r", 0.5, {0, 1, 2, 3, 4});
    const auto r = resample(c, 1.0);
    EXPECT_EQ(r.speeds, (std::vector<double>{0, 2, 4}));
    const auto up = resample(make_cycle("r", 2.0, {0, 4}), 1.0);
    EXPECT_EQ(up.speeds, (std::vector<double>{0, 2, 4}));
}

TEST(StandardCycles, LoadWithExpectedShape) {
    struct Expect {
        const char *name;
        std::size_t size;
        double max_kmh;
    };
    for (const auto &e : {Expect{"nedc", 1181, 120.0}, Expect{"ftp75", 1875, 91.2}, Expect{"wltc_jp", 1478, 97.4}}) {
        const auto c = standard_cycle(e.name);
        EXPECT_EQ(c.size(), e.size) << e.name;
        EXPECT_NEAR(cycle_stats(c).max_speed * 3.6, e.max_kmh, 0.5) << e.name;
        EXPECT_EQ(c.speeds.front(), 0.0);
        EXPECT_EQ(c.speeds.back(), 0.0);
    }
    EXPECT_THROW(standard_cycle("jc09"), ValidationError);
}

TEST(Io, FormatDoubleRoundTrips) {
    for (double x : {0.1, 1.0 / 3.0, 12345.678, 1e-300, -2.5}) {
        EXPECT_EQ(std::stod(io::format_double(x)), x);
    }
}

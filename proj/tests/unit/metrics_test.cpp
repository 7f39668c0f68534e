#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mcanc/metrics.hpp"
#include "support/test_support.hpp"

using namespace mcanc;

namespace {

// 4 samples per block at a nominal 4 Hz rate with 1 s blocks.
constexpr double kRate = 4.0;

}  // namespace

TEST(NrSeries, NoCancellationIsZeroDb) {
    NrSeries s;
    for (int n = 0; n < 4; ++n) {
        const std::vector<double> d{0.5 + n, -1.0};
        s.accumulate(d, d, kRate);
    }
    ASSERT_EQ(s.blocks(), 1u);
    EXPECT_EQ(s.nr_db[0], 0.0);
}

TEST(NrSeries, HundredfoldPowerDropIsTwentyDb) {
    NrSeries s;
    for (int n = 0; n < 4; ++n) {
        const std::vector<double> d{1.0, 2.0};
        const std::vector<double> e{0.1, 0.2};
        accumulate(s, d, e, kRate);
    }
    EXPECT_NEAR(s.nr_db[0], 20.0, 1e-12);
    EXPECT_NEAR(s.dist_power[0], 5.0, 1e-15);
    EXPECT_NEAR(s.err_power[0], 0.05, 1e-15);
}

TEST(NrSeries, PerfectCancellationIsInfinity) {
    NrSeries s;
    for (int n = 0; n < 4; ++n) s.accumulate(std::vector<double>{1.0}, std::vector<double>{0.0}, kRate);
    EXPECT_EQ(s.nr_db[0], std::numeric_limits<double>::infinity());
    std::ostringstream out;
    write_nr_csv(out, s);
    EXPECT_NE(out.str().find(",inf,"), std::string::npos);
}

TEST(NrSeries, DegenerateRatios) {
    EXPECT_EQ(noise_reduction_db(0.0, 1.0), -std::numeric_limits<double>::infinity());
    EXPECT_EQ(noise_reduction_db(0.0, 0.0), 0.0);
}

TEST(NrSeries, PartialBlockClosesOnFinish) {
    NrSeries s;
    for (int n = 0; n < 6; ++n) s.accumulate(std::vector<double>{1.0}, std::vector<double>{1.0}, kRate);
    EXPECT_EQ(s.blocks(), 1u);
    s.finish();
    EXPECT_EQ(s.blocks(), 2u);
    s.finish();
    EXPECT_EQ(s.blocks(), 2u);
}

TEST(NrSeries, PerMicrophoneColumns) {
    NrSeries s;
    for (int n = 0; n < 4; ++n) s.accumulate(std::vector<double>{1.0, 1.0}, std::vector<double>{0.1, 1.0}, kRate);
    ASSERT_EQ(s.nr_db_per_mic.size(), 1u);
    EXPECT_NEAR(s.nr_db_per_mic[0][0], 20.0, 1e-12);
    EXPECT_EQ(s.nr_db_per_mic[0][1], 0.0);
    std::ostringstream out;
    write_nr_csv(out, s, true);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "block,seconds,nr_db,err_power,dist_power,nr_db_1,nr_db_2");
}

TEST(NrSeries, ChannelMismatchIsShapeError) {
    NrSeries s;
    EXPECT_THROW(s.accumulate(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, kRate), ShapeError);
}

TEST(EmitCsv, EmptyRunWritesHeadersOnly) {
    std::ostringstream out;
    emit_csv(out, NrSeries{}, ErrorLog{}, 2);
    EXPECT_EQ(out.str(), "n,e_1,e_2\n\nblock,seconds,nr_db,err_power,dist_power\n");
}

TEST(EmitCsv, SingleTwentyDbBlock) {
    NrSeries s;
    for (int n = 0; n < 4; ++n) s.accumulate(std::vector<double>{1.0}, std::vector<double>{0.1}, kRate);
    std::ostringstream out;
    write_nr_csv(out, s);
    const auto text = out.str();
    const auto row = text.substr(text.find('\n') + 1);
    EXPECT_EQ(row.rfind("0,1.0,20,", 0), 0u) << row;
}

TEST(EmitCsv, ErrorTableRows) {
    ErrorLog log;
    log.append(std::vector<double>{0.5, -0.25});
    log.append(std::vector<double>{0.1, 0.0});
    std::ostringstream out;
    write_errors_csv(out, log, 2);
    EXPECT_EQ(out.str(), "n,e_1,e_2\n0,0.5,-0.25\n1,0.10000000000000001,0\n");
}

TEST(EmitCsv, RoundTripRecomputesNrFromPowers) {
    std::mt19937_64 rng(1);
    NrSeries s(0.5);
    for (int n = 0; n < 4000; ++n) {
        const auto d = fixtures::normal_vector(rng, 3);
        auto e = fixtures::normal_vector(rng, 3);
        for (double& v : e) v *= std::exp(-n / 1000.0);
        s.accumulate(d, e, 1000.0);
    }
    std::stringstream io;
    write_nr_csv(io, s);
    const auto table = read_nr_csv(io);
    ASSERT_EQ(table.nr_db.size(), 8u);
    for (std::size_t b = 0; b < table.nr_db.size(); ++b) {
        EXPECT_NEAR(10.0 * std::log10(table.dist_power[b] / table.err_power[b]), table.nr_db[b], 1e-12);
        EXPECT_EQ(table.nr_db[b], s.nr_db[b]);
        EXPECT_DOUBLE_EQ(table.seconds[b], 0.5 * static_cast<double>(b + 1));
    }
}

TEST(EmitCsv, FailingSinkIsIoError) {
    std::ostringstream out;
    out.setstate(std::ios::badbit);
    EXPECT_THROW(write_nr_csv(out, NrSeries{}), IoError);
    EXPECT_THROW(write_errors_csv(out, ErrorLog{}, 1), IoError);
}

TEST(MetricsProperty, NrIsScaleInvariant) {
    std::mt19937_64 rng(2);
    for (double c : {-3.0, 0.01, 1e4}) {
        NrSeries a, b;
        std::mt19937_64 local(rng());
        for (int n = 0; n < 8; ++n) {
            const auto d = fixtures::normal_vector(local, 2);
            const auto e = fixtures::normal_vector(local, 2);
            auto dc = d, ec = e;
            for (double& v : dc) v *= c;
            for (double& v : ec) v *= c;
            a.accumulate(d, e, kRate);
            b.accumulate(dc, ec, kRate);
        }
        for (std::size_t i = 0; i < a.blocks(); ++i) EXPECT_NEAR(a.nr_db[i], b.nr_db[i], 1e-10);
    }
}

TEST(MetricsProperty, ConcatenatedRunsConcatenateBlocks) {
    std::mt19937_64 rng(3);
    const auto d = fixtures::normal_signal(rng, 24, 2);
    const auto e = fixtures::normal_signal(rng, 24, 2);
    NrSeries whole, first, second;
    for (std::size_t n = 0; n < 24; ++n) {
        whole.accumulate(d[n], e[n], kRate);
        (n < 12 ? first : second).accumulate(d[n], e[n], kRate);
    }
    auto joined = first.nr_db;
    joined.insert(joined.end(), second.nr_db.begin(), second.nr_db.end());
    EXPECT_EQ(whole.nr_db, joined);
}

TEST(ReadNrCsv, RejectsBadHeader) {
    std::istringstream in("x,y\n1,2\n");
    EXPECT_THROW(read_nr_csv(in), FormatError);
}

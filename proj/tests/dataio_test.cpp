#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "lavarnet/datagen.hpp"
#include "lavarnet/dataio.hpp"
#include "lavarnet/errors.hpp"
#include "lavarnet/random.hpp"

using namespace lavarnet;

namespace {

CsvTable parse(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in, "fixture");
}

SeriesMatrix random_series(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    SeriesMatrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(-3.0, 3.0);
    return m;
}

double column_mean(const SeriesMatrix& m, std::size_t c, std::size_t begin, std::size_t end) {
    double s = 0;
    for (std::size_t r = begin; r < end; ++r) s += m(r, c);
    return s / static_cast<double>(end - begin);
}

}  // namespace

TEST(LoadCsv, ReadsKnownMatrix) {
    const CsvTable t = parse("a,b\n1,2\n3.5,-4\n1e-3,0\n");
    ASSERT_EQ(t.names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.values, SeriesMatrix(3, 2, {1, 2, 3.5, -4, 1e-3, 0}));
    EXPECT_EQ(t.column_index("b"), 1u);
}

TEST(LoadCsv, EmptyCellIsMissing) {
    const CsvTable t = parse("a,b\n1,\n,4\r\n");
    EXPECT_TRUE(is_missing(t.values(0, 1)));
    EXPECT_TRUE(is_missing(t.values(1, 0)));
    EXPECT_EQ(t.values(0, 0), 1.0);
    EXPECT_EQ(t.values(1, 1), 4.0);
}

TEST(LoadCsv, ReportsRaggedRowAndBadCell) {
    try {
        parse("a,b\n1,2\n3\n");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
    try {
        parse("a,b\n1,2\n3,x7\n");
        FAIL();
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
    }
}

TEST(LoadCsv, HenonRoundTripIsBitwise) {
    const HenonChain chain = gen_henon_chain(4, 300, 0.3, 1000, 17);
    CsvTable table{{"x1", "x2", "x3", "x4"}, chain.series};
    std::stringstream buf;
    write_csv(buf, table);
    const CsvTable back = parse_csv(buf);
    EXPECT_EQ(back.names, table.names);
    ASSERT_EQ(back.values.rows(), 300u);
    const auto a = table.values.values();
    const auto b = back.values.values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
}

TEST(Interpolate, Midpoint) {
    SeriesMatrix s(3, 1, {0.0, kMissing, 2.0});
    EXPECT_EQ(linear_interpolate_missing(s)(1, 0), 1.0);
}

TEST(Interpolate, NothingMissingIsUnchanged) {
    const SeriesMatrix s = random_series(20, 3, 5);
    EXPECT_EQ(linear_interpolate_missing(s), s);
}

TEST(Interpolate, EdgesTakeNearestObserved) {
    SeriesMatrix s(5, 1, {kMissing, kMissing, 3.0, 5.0, kMissing});
    const SeriesMatrix out = linear_interpolate_missing(s);
    EXPECT_EQ(out(0, 0), 3.0);
    EXPECT_EQ(out(1, 0), 3.0);
    EXPECT_EQ(out(4, 0), 5.0);
}

TEST(Interpolate, RandomGapsMatchTwoPointLine) {
    Rng rng(99);
    SeriesMatrix truth = random_series(200, 3, 7);
    SeriesMatrix holed = truth;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t r = 1; r + 1 < 200; ++r)
            if (rng.uniform() < 0.3) holed(r, c) = kMissing;
    const SeriesMatrix out = linear_interpolate_missing(holed);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t r = 0; r < 200; ++r) {
            if (!is_missing(holed(r, c))) {
                EXPECT_EQ(out(r, c), holed(r, c));
                continue;
            }
            std::size_t lo = r, hi = r;
            while (is_missing(holed(lo, c))) --lo;
            while (is_missing(holed(hi, c))) ++hi;
            const double x0 = static_cast<double>(lo), x1 = static_cast<double>(hi);
            const double expect = holed(lo, c) * (x1 - r) / (x1 - x0) + holed(hi, c) * (r - x0) / (x1 - x0);
            EXPECT_NEAR(out(r, c), expect, 1e-12) << r << "," << c;
        }
    }
}

TEST(Interpolate, AllMissingColumnIsDataError) {
    SeriesMatrix s(3, 2, {1, kMissing, 2, kMissing, 3, kMissing});
    EXPECT_THROW(linear_interpolate_missing(s), DataError);
}

TEST(DropColumns, MoreThanThresholdZerosDropped) {
    SeriesMatrix s(150, 2);
    for (std::size_t r = 0; r < 150; ++r) {
        s(r, 0) = static_cast<double>(r) + 1.0;
        s(r, 1) = r < 101 ? 0.0 : static_cast<double>(r);
    }
    const std::size_t target = 0;
    EXPECT_EQ(surviving_columns(s, {&target, 1}, 100, true), (std::vector<std::size_t>{0}));
    EXPECT_EQ(surviving_columns(s, {&target, 1}, 101, true), (std::vector<std::size_t>{0, 1}));
}

TEST(DropColumns, VaryingColumnKept) {
    const SeriesMatrix s = random_series(30, 1, 1);
    EXPECT_EQ(surviving_columns(s, {}, 100, true), (std::vector<std::size_t>{0}));
}

TEST(DropColumns, MixedFixtureMatchesEnumeration) {
    // columns: varying, constant, 3 zeros, constant target, 2 zeros, constant zero
    const std::size_t L = 8;
    SeriesMatrix s(L, 6);
    for (std::size_t r = 0; r < L; ++r) {
        const double x = static_cast<double>(r);
        s(r, 0) = std::sin(x);
        s(r, 1) = 4.2;
        s(r, 2) = r < 3 ? 0.0 : x;
        s(r, 3) = -1.0;
        s(r, 4) = r % 4 == 0 ? 0.0 : x + 1;
        s(r, 5) = 0.0;
    }
    const std::size_t target = 3;
    std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
    const CsvTable out = drop_sparse_or_constant({names, s}, {&target, 1}, 2, true);
    // a: kept; b: constant; c: 3 zeros > 2; d: target; e: 2 zeros, varying; f: both
    EXPECT_EQ(out.names, (std::vector<std::string>{"a", "d", "e"}));
    EXPECT_EQ(out.values(5, 2), s(5, 4));
}

TEST(DropColumns, EverythingDroppedIsDataError) {
    SeriesMatrix s(5, 2, 1.0);
    EXPECT_THROW(surviving_columns(s, {}, 100, true), DataError);
}

TEST(MovingAverage, ConstantUnchanged) {
    SeriesMatrix s(10, 2, 3.25);
    EXPECT_EQ(moving_average(s, 4), s);
}

TEST(MovingAverage, ImpulseSpreadsOverFourSteps) {
    SeriesMatrix s(10, 1, 0.0);
    s(3, 0) = 1.0;
    const SeriesMatrix out = moving_average(s, 4);
    for (std::size_t r = 0; r < 10; ++r)
        EXPECT_EQ(out(r, 0), r >= 3 && r <= 6 ? 0.25 : 0.0) << r;
}

TEST(MovingAverage, MatchesNaiveWindowSum) {
    const SeriesMatrix s = random_series(50, 3, 11);
    for (std::size_t order : {1u, 2u, 4u, 7u}) {
        const SeriesMatrix out = moving_average(s, order);
        for (std::size_t r = 0; r < 50; ++r) {
            for (std::size_t c = 0; c < 3; ++c) {
                double sum = 0;
                int count = 0;
                for (long i = static_cast<long>(r); i > static_cast<long>(r) - static_cast<long>(order) && i >= 0; --i) {
                    sum += s(static_cast<std::size_t>(i), c);
                    ++count;
                }
                EXPECT_NEAR(out(r, c), sum / count, 1e-14);
            }
        }
    }
}

TEST(MovingAverage, IsCausal) {
    SeriesMatrix s = random_series(30, 2, 3);
    const SeriesMatrix before = moving_average(s, 4);
    for (std::size_t c = 0; c < 2; ++c) s(20, c) = 1e6;
    const SeriesMatrix after = moving_average(s, 4);
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(before(r, c), after(r, c));
}

TEST(Zscore, TrainRowsStandardized) {
    Dataset d = make_dataset(random_series(100, 3, 21), {"a", "b", "c"}, split_by_fractions(100));
    const Dataset z = zscore(d);
    ASSERT_TRUE(z.normalization.has_value());
    for (std::size_t c = 0; c < 3; ++c) {
        const double m = column_mean(z.series, c, 0, 60);
        double ss = 0;
        for (std::size_t r = 0; r < 60; ++r) ss += (z.series(r, c) - m) * (z.series(r, c) - m);
        EXPECT_LT(std::abs(m), 1e-12);
        EXPECT_LT(std::abs(std::sqrt(ss / 60) - 1.0), 1e-12);
    }
}

TEST(Zscore, InverseRoundTrip) {
    Dataset d = make_dataset(random_series(40, 2, 8), {"a", "b"}, split_by_fractions(40));
    const Dataset z = zscore(d);
    for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t c = 0; c < 2; ++c)
            EXPECT_NEAR(z.normalization->inverse(c, z.series(r, c)), d.series(r, c), 1e-12);
}

TEST(Zscore, TestRowsUseTrainStatistics) {
    // train rows 1,2,3,4,5,6 -> mean 3.5, population std sqrt(35/12)
    SeriesMatrix s(10, 1, {1, 2, 3, 4, 5, 6, 100, -100, 7, 50});
    const Dataset z = zscore(make_dataset(s, {"x"}, split_by_counts(10, 6, 2, 2)));
    const double sd = std::sqrt(35.0 / 12.0);
    EXPECT_NEAR(z.series(8, 0), (7 - 3.5) / sd, 1e-15);
    EXPECT_NEAR(z.series(9, 0), (50 - 3.5) / sd, 1e-15);
    EXPECT_NEAR(z.series(6, 0), (100 - 3.5) / sd, 1e-15);
}

TEST(Zscore, ZeroTrainStdNamesColumn) {
    SeriesMatrix s(10, 2);
    for (std::size_t r = 0; r < 10; ++r) {
        s(r, 0) = static_cast<double>(r);
        s(r, 1) = r < 6 ? 2.0 : static_cast<double>(r);
    }
    try {
        zscore(make_dataset(s, {"temp", "flatline"}, split_by_fractions(10)));
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("flatline"), std::string::npos);
    }
}

TEST(Zscore, StatisticsIgnoreValidationAndTestRows) {
    SeriesMatrix s = random_series(50, 2, 4);
    const SplitBounds split = split_by_fractions(50);
    const Normalization a = fit_normalization(s, split);
    for (std::size_t r = split.train_end; r < 50; ++r) s(r, 0) = s(r, 1) = 1e9;
    const Normalization b = fit_normalization(s, split);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std, b.std);
}

TEST(Split, ExplicitCounts) {
    const SplitBounds b = split_by_counts(4137, 3200, 400, 537);
    EXPECT_EQ(b.train_rows(), 3200u);
    EXPECT_EQ(b.val_rows(), 400u);
    EXPECT_EQ(b.test_rows(), 537u);
    EXPECT_EQ(b.val_end, 3600u);
}

TEST(Split, FractionsRounding) {
    const SplitBounds a = split_by_fractions(10);
    EXPECT_EQ(a, (SplitBounds{6, 8, 10}));
    const SplitBounds b = split_by_fractions(1031);
    EXPECT_EQ(b.train_rows(), 618u);
    EXPECT_EQ(b.val_rows(), 206u);
    EXPECT_EQ(b.test_rows(), 207u);
}

TEST(Split, Errors) {
    EXPECT_THROW(split_by_counts(10, 5, 5, 0), DataError);
    EXPECT_THROW(split_by_counts(10, 5, 3, 3), DataError);
    EXPECT_THROW(split_by_fractions(10, 0.5, 0.2, 0.2), DataError);
    EXPECT_THROW(split_by_fractions(3), DataError);
}

TEST(Windows, CountAndLastTarget) {
    SeriesMatrix s(30, 2);
    for (std::size_t r = 0; r < 30; ++r) s(r, 0) = s(r, 1) = static_cast<double>(r);
    const std::size_t target = 1;
    const WindowedData w = make_windows(make_dataset(s, {"a", "b"}, split_by_counts(30, 10, 10, 10)), 3, {&target, 1});
    EXPECT_EQ(w.train.size(), 7u);
    EXPECT_EQ(w.val.size(), 7u);
    EXPECT_EQ(w.test.size(), 7u);
    EXPECT_EQ(w.train.back().target_row, 9u);
    EXPECT_EQ(w.train.back().target, std::vector<double>{9.0});
    EXPECT_EQ(w.test.back().target_row, 29u);
}

TEST(Windows, MatchIndexEnumeration) {
    const SeriesMatrix s = random_series(41, 3, 13);
    const SplitBounds split = split_by_counts(41, 20, 10, 11);
    const std::vector<std::size_t> targets{2, 0};
    const std::size_t T = 4;
    const WindowedData w = make_windows(make_dataset(s, {"a", "b", "c"}, split), T, targets);
    const std::vector<std::pair<std::size_t, std::size_t>> ranges{{0, 20}, {20, 30}, {30, 41}};
    const std::vector<const std::vector<WindowSample>*> sets{&w.train, &w.val, &w.test};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto [begin, end] = ranges[k];
        ASSERT_EQ(sets[k]->size(), end - begin - T);
        for (std::size_t i = 0; i < sets[k]->size(); ++i) {
            const WindowSample& sample = (*sets[k])[i];
            EXPECT_EQ(sample.target_row, begin + i + T);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(sample.input(t, c), s(begin + i + t, c));
            EXPECT_EQ(sample.target, (std::vector<double>{s(begin + i + T, 2), s(begin + i + T, 0)}));
        }
    }
}

TEST(Windows, InputsPrecedeTargetAndStayInSplit) {
    const SeriesMatrix s = random_series(200, 2, 2);
    const SplitBounds split = split_by_fractions(200);
    const std::size_t target = 0;
    const WindowedData w = make_windows(make_dataset(s, {"a", "b"}, split), 5, {&target, 1});
    auto check = [&](const std::vector<WindowSample>& set, std::size_t begin) {
        for (const WindowSample& sample : set) {
            EXPECT_GE(sample.target_row, begin + 5);
            // the window's rows are exactly [target_row - 5, target_row)
            for (std::size_t t = 0; t < 5; ++t)
                EXPECT_EQ(sample.input(t, 1), s(sample.target_row - 5 + t, 1));
        }
    };
    check(w.train, 0);
    check(w.val, split.train_end);
    check(w.test, split.val_end);
}

TEST(Windows, ShortSplitIsDataError) {
    const SeriesMatrix s = random_series(20, 1, 2);
    const std::size_t target = 0;
    EXPECT_THROW(make_windows(make_dataset(s, {"a"}, split_by_counts(20, 14, 3, 3)), 3, {&target, 1}), DataError);
    EXPECT_NO_THROW(make_windows(make_dataset(s, {"a"}, split_by_counts(20, 12, 4, 4)), 3, {&target, 1}));
}

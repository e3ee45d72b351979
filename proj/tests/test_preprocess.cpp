#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "afc/error.hpp"
#include "afc/preprocess.hpp"

using namespace afc;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MergedDataset make_dataset(const std::vector<std::string>& params,
                           const std::vector<std::vector<double>>& rows,
                           const std::string& id = "WT01") {
    MergedDataset ds;
    ds.turbine_id = id;
    ds.param_ids = params;
    ds.values.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(params.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < params.size(); ++j) {
            ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
        ds.timestamps.push_back(static_cast<std::int64_t>(i) * 600);
    }
    ds.y1.assign(rows.size(), 0);
    ds.y2.assign(rows.size(), 0);
    return ds;
}

}  // namespace

TEST_CASE("compute_retention keeps everything when there are no NaNs") {
    auto ds = make_dataset({"a", "b", "c"}, {{1, 2, 3}, {4, 5, 6}});
    RetentionMask mask = compute_retention(ds, 0.20);
    CHECK(mask.retained == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("compute_retention drops a column above the threshold") {
    // column b: 1 NaN in 4 rows = 25% > 20%
    auto ds = make_dataset({"a", "b"}, {{1, kNaN}, {2, 1}, {3, 2}, {4, 3}});
    RetentionMask mask = compute_retention(ds, 0.20);
    CHECK(mask.retained == std::vector<std::string>{"a"});

    // exactly at the threshold is retained (<=)
    auto ds2 = make_dataset({"a", "b"}, {{1, kNaN}, {2, 1}, {3, 2}, {4, 3}, {5, 4}});
    CHECK(compute_retention(ds2, 0.20).retained == std::vector<std::string>{"a", "b"});
}

TEST_CASE("compute_retention errors when nothing survives") {
    auto ds = make_dataset({"a"}, {{kNaN}, {kNaN}});
    CHECK_THROWS_AS(compute_retention(ds, 0.20), DataError);
}

TEST_CASE("compute_retention is monotone in the threshold") {
    auto ds = make_dataset({"a", "b", "c", "d"},
                           {{1, kNaN, kNaN, kNaN},
                            {2, 1, kNaN, kNaN},
                            {3, 2, 1, kNaN},
                            {4, 3, 2, kNaN}});
    std::vector<std::string> prev;
    for (double thr : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        auto retained = compute_retention(ds, thr).retained;
        for (const auto& id : prev) {
            CHECK(std::find(retained.begin(), retained.end(), id) != retained.end());
        }
        prev = retained;
    }
}

TEST_CASE("apply_retention selects columns and preserves labels") {
    auto ds = make_dataset({"a", "b", "c"}, {{1, 2, 3}, {4, 5, 6}});
    ds.y1 = {1, 0};
    ds.y2 = {2, 0};

    RetentionMask all{"WT01", 0.2, {"a", "b", "c"}};
    MergedDataset same = apply_retention(ds, all);
    CHECK(same.values == ds.values);

    RetentionMask drop{"WT01", 0.2, {"a", "c"}};
    MergedDataset cut = apply_retention(ds, drop);
    CHECK(cut.param_ids == std::vector<std::string>{"a", "c"});
    CHECK(cut.values(0, 1) == 3.0);
    CHECK(cut.y1 == ds.y1);
    CHECK(cut.y2 == ds.y2);

    RetentionMask missing{"WT01", 0.2, {"a", "zz"}};
    CHECK_THROWS_AS(apply_retention(ds, missing), DataError);
}

TEST_CASE("retention homogeneity: one mask applied across turbines") {
    auto ref = make_dataset({"a", "b"}, {{1, kNaN}, {2, kNaN}}, "WT01");
    auto other = make_dataset({"a", "b"}, {{5, 6}, {7, 8}}, "WT02");
    RetentionMask mask = compute_retention(ref, 0.20);
    MergedDataset r1 = apply_retention(ref, mask);
    MergedDataset r2 = apply_retention(other, mask);
    CHECK(r1.param_ids == r2.param_ids);
}

TEST_CASE("impute forward-fills, backfills leading gaps, zeros dead columns") {
    auto ds = make_dataset({"fwd", "lead", "dead"},
                           {{1, kNaN, kNaN}, {kNaN, 5, kNaN}, {3, 6, kNaN}});
    MergedDataset out = impute(ds);
    CHECK(out.values(1, 0) == 1.0);  // forward fill
    CHECK(out.values(0, 1) == 5.0);  // backfill leading gap
    CHECK(out.values(0, 2) == 0.0);  // all-NaN column
    CHECK(out.values(2, 2) == 0.0);
    CHECK_FALSE(out.values.hasNaN());
}

TEST_CASE("impute never changes a non-NaN value") {
    auto ds = make_dataset({"a", "b"}, {{1, kNaN}, {kNaN, 2}, {3, kNaN}, {kNaN, 4}});
    MergedDataset out = impute(ds);
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            if (!std::isnan(ds.values(i, j))) CHECK(out.values(i, j) == ds.values(i, j));
        }
    }
}

TEST_CASE("fit_scaler computes global extrema across datasets") {
    auto a = make_dataset({"x"}, {{2}, {4}, {6}});
    ScalerParams s1 = fit_scaler({a});
    CHECK(s1.min[0] == 2.0);
    CHECK(s1.max[0] == 6.0);

    auto b = make_dataset({"x"}, {{1}, {3}}, "WT02");
    auto c = make_dataset({"x"}, {{-1}, {5}}, "WT03");
    ScalerParams s2 = fit_scaler({b, c});
    CHECK(s2.min[0] == -1.0);
    CHECK(s2.max[0] == 5.0);

    CHECK_THROWS_AS(fit_scaler({}), DataError);
}

TEST_CASE("apply_scaler endpoints, midpoint, constant column, clamping") {
    auto train = make_dataset({"x", "k"}, {{2, 7}, {6, 7}});
    ScalerParams s = fit_scaler({train});
    MergedDataset scaled = apply_scaler(train, s);
    CHECK(scaled.values(0, 0) == 0.0);
    CHECK(scaled.values(1, 0) == 1.0);
    CHECK(scaled.values(0, 1) == 0.0);  // constant column -> 0
    CHECK(scaled.values(1, 1) == 0.0);

    auto mid = make_dataset({"x", "k"}, {{4, 7}});
    CHECK(apply_scaler(mid, s).values(0, 0) == 0.5);

    auto outside = make_dataset({"x", "k"}, {{-10, 7}, {100, 7}});
    MergedDataset clamped = apply_scaler(outside, s);
    CHECK(clamped.values(0, 0) == 0.0);
    CHECK(clamped.values(1, 0) == 1.0);

    auto wrong = make_dataset({"y"}, {{1}});
    CHECK_THROWS_AS(apply_scaler(wrong, s), DataError);
}

TEST_CASE("scaling round-trip recovers originals within 1e-9 relative") {
    auto ds = make_dataset({"a", "b"},
                           {{3.25, -17.0}, {9.5, 4.75}, {-2.125, 88.0}, {0.0, 12.5}});
    ScalerParams s = fit_scaler({ds});
    MergedDataset scaled = apply_scaler(ds, s);
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            CHECK(scaled.values(i, j) >= 0.0);
            CHECK(scaled.values(i, j) <= 1.0);
            const std::size_t sj = static_cast<std::size_t>(j);
            const double back = scaled.values(i, j) * (s.max[sj] - s.min[sj]) + s.min[sj];
            CHECK(std::abs(back - ds.values(i, j)) <=
                  1e-9 * std::max(1.0, std::abs(ds.values(i, j))));
        }
    }
}

#pragma once

#include <string>
#include <vector>

#include "afc/dataset.hpp"

namespace afc {

// Parameters surviving the NaN-fraction threshold in the reference turbine.
// The same retained set is applied to every other turbine (homogeneity).
struct RetentionMask {
    std::string reference_turbine;
    double threshold = 0.20;
    std::vector<std::string> retained;  // original column order
};

struct ScalerParams {
    std::vector<std::string> param_ids;
    std::vector<double> min;
    std::vector<double> max;
};

// Per-parameter NaN fraction, original column order.
std::vector<double> nan_fractions(const MergedDataset& dataset);

RetentionMask compute_retention(const MergedDataset& reference, double threshold);

MergedDataset apply_retention(const MergedDataset& dataset, const RetentionMask& mask);

// Forward-fill, then backward-fill leading gaps, then zero for all-NaN
// columns. Non-NaN values are never changed.
MergedDataset impute(const MergedDataset& dataset);

// Global per-column min/max over all training datasets.
ScalerParams fit_scaler(const std::vector<MergedDataset>& training);

// (x - min) / (max - min), constant columns map to 0, outputs clamped to [0,1].
MergedDataset apply_scaler(const MergedDataset& dataset, const ScalerParams& scaler);

// min + x * (max - min). Round-trips apply_scaler for in-range values on
// non-constant columns; constant columns come back as their fitted min.
MergedDataset invert_scaler(const MergedDataset& dataset, const ScalerParams& scaler);

}  // namespace afc

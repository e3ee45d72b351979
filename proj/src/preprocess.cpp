#include "afc/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "afc/error.hpp"

namespace afc {

std::vector<double> nan_fractions(const MergedDataset& dataset) {
    const Eigen::Index n = dataset.rows();
    std::vector<double> frac(static_cast<std::size_t>(dataset.cols()), 0.0);
    for (Eigen::Index j = 0; j < dataset.cols(); ++j) {
        Eigen::Index count = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isnan(dataset.values(i, j))) ++count;
        }
        frac[static_cast<std::size_t>(j)] = static_cast<double>(count) / static_cast<double>(n);
    }
    return frac;
}

RetentionMask compute_retention(const MergedDataset& reference, double threshold) {
    if (reference.rows() < 1) throw DataError("retention: reference dataset has no rows");
    RetentionMask mask;
    mask.reference_turbine = reference.turbine_id;
    mask.threshold = threshold;
    auto frac = nan_fractions(reference);
    for (std::size_t j = 0; j < frac.size(); ++j) {
        if (frac[j] <= threshold) mask.retained.push_back(reference.param_ids[j]);
    }
    if (mask.retained.empty()) {
        throw DataError("retention: no parameter survives threshold " + std::to_string(threshold));
    }
    return mask;
}

MergedDataset apply_retention(const MergedDataset& dataset, const RetentionMask& mask) {
    std::vector<Eigen::Index> cols;
    for (const auto& id : mask.retained) {
        auto it = std::find(dataset.param_ids.begin(), dataset.param_ids.end(), id);
        if (it == dataset.param_ids.end()) {
            throw DataError("retention: parameter '" + id + "' absent from turbine " +
                            dataset.turbine_id);
        }
        cols.push_back(static_cast<Eigen::Index>(it - dataset.param_ids.begin()));
    }
    MergedDataset out;
    out.turbine_id = dataset.turbine_id;
    out.timestamps = dataset.timestamps;
    out.param_ids = mask.retained;
    out.y1 = dataset.y1;
    out.y2 = dataset.y2;
    out.values.resize(dataset.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.values.col(static_cast<Eigen::Index>(j)) = dataset.values.col(cols[j]);
    }
    return out;
}

MergedDataset impute(const MergedDataset& dataset) {
    MergedDataset out = dataset;
    const Eigen::Index n = out.rows();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        // forward fill
        double last = std::numeric_limits<double>::quiet_NaN();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isnan(out.values(i, j))) {
                if (!std::isnan(last)) out.values(i, j) = last;
            } else {
                last = out.values(i, j);
            }
        }
        // backward fill leading gap
        if (n > 0 && std::isnan(out.values(0, j))) {
            double first = std::numeric_limits<double>::quiet_NaN();
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!std::isnan(out.values(i, j))) {
                    first = out.values(i, j);
                    break;
                }
            }
            if (std::isnan(first)) first = 0.0;  // all-NaN column
            for (Eigen::Index i = 0; i < n && std::isnan(out.values(i, j)); ++i) {
                out.values(i, j) = first;
            }
        }
    }
    return out;
}

ScalerParams fit_scaler(const std::vector<MergedDataset>& training) {
    if (training.empty()) throw DataError("scaler: no training datasets");
    const auto& ids = training.front().param_ids;
    for (const auto& ds : training) {
        if (ds.param_ids != ids) throw DataError("scaler: training column sets differ");
    }
    ScalerParams s;
    s.param_ids = ids;
    const std::size_t m = ids.size();
    s.min.assign(m, std::numeric_limits<double>::infinity());
    s.max.assign(m, -std::numeric_limits<double>::infinity());
    for (const auto& ds : training) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            for (Eigen::Index i = 0; i < ds.rows(); ++i) {
                const double v = ds.values(i, j);
                auto& mn = s.min[static_cast<std::size_t>(j)];
                auto& mx = s.max[static_cast<std::size_t>(j)];
                if (v < mn) mn = v;
                if (v > mx) mx = v;
            }
        }
    }
    return s;
}

MergedDataset apply_scaler(const MergedDataset& dataset, const ScalerParams& scaler) {
    if (dataset.param_ids != scaler.param_ids) {
        throw DataError("scaler: column mismatch for turbine " + dataset.turbine_id);
    }
    MergedDataset out = dataset;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double mn = scaler.min[static_cast<std::size_t>(j)];
        const double mx = scaler.max[static_cast<std::size_t>(j)];
        const double range = mx - mn;
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            double v = (range == 0.0) ? 0.0 : (out.values(i, j) - mn) / range;
            out.values(i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

MergedDataset invert_scaler(const MergedDataset& dataset, const ScalerParams& scaler) {
    if (dataset.param_ids != scaler.param_ids) {
        throw DataError("scaler: column mismatch for turbine " + dataset.turbine_id);
    }
    MergedDataset out = dataset;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double mn = scaler.min[static_cast<std::size_t>(j)];
        const double mx = scaler.max[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            out.values(i, j) = mn + out.values(i, j) * (mx - mn);
        }
    }
    return out;
}

}  // namespace afc

#include "afc/windowing.hpp"

#include <cmath>

#include "afc/error.hpp"

namespace afc {

WindowedSet build_windows(const MergedDataset& dataset, const WindowSpec& spec) {
    if (spec.length < 1) throw UsageError("window length must be >= 1");
    if (spec.forecast_offset < 0) throw UsageError("forecast offset must be >= 0");
    if (dataset.cols() != spec.width) {
        throw UsageError("window width " + std::to_string(spec.width) + " != dataset columns " +
                         std::to_string(dataset.cols()));
    }
    if (dataset.values.hasNaN()) throw UsageError("build_windows requires a NaN-free dataset");

    const Eigen::Index n = dataset.rows();
    const Eigen::Index l = spec.length;
    const Eigen::Index f = spec.forecast_offset;
    const Eigen::Index m = spec.width;
    const Eigen::Index p = std::max<Eigen::Index>(0, n - l + 1 - f);

    WindowedSet ws;
    ws.spec = spec;
    ws.inputs.resize(p, l * m);
    ws.y1.resize(static_cast<std::size_t>(p));
    ws.y2.resize(static_cast<std::size_t>(p));
    ws.source_rows.resize(static_cast<std::size_t>(p));
    for (Eigen::Index g = 0; g < p; ++g) {
        for (Eigen::Index t = 0; t < l; ++t) {
            ws.inputs.block(g, t * m, 1, m) = dataset.values.row(g + t);
        }
        const Eigen::Index target = g + l - 1 + f;
        ws.y1[static_cast<std::size_t>(g)] = dataset.y1[static_cast<std::size_t>(target)];
        ws.y2[static_cast<std::size_t>(g)] = dataset.y2[static_cast<std::size_t>(target)];
        ws.source_rows[static_cast<std::size_t>(g)] = target;
    }
    return ws;
}

WindowedSet select_alarm_windows(const WindowedSet& ws, const std::vector<std::uint8_t>& predictions) {
    if (static_cast<Eigen::Index>(predictions.size()) != ws.count()) {
        throw UsageError("select_alarm_windows: prediction length " +
                         std::to_string(predictions.size()) + " != window count " +
                         std::to_string(ws.count()));
    }
    std::vector<Eigen::Index> keep;
    for (std::size_t g = 0; g < predictions.size(); ++g) {
        if (predictions[g]) keep.push_back(static_cast<Eigen::Index>(g));
    }
    WindowedSet out;
    out.spec = ws.spec;
    out.inputs.resize(static_cast<Eigen::Index>(keep.size()), ws.inputs.cols());
    out.y1.resize(keep.size());
    out.y2.resize(keep.size());
    out.source_rows.resize(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.inputs.row(static_cast<Eigen::Index>(i)) = ws.inputs.row(keep[i]);
        out.y1[i] = ws.y1[static_cast<std::size_t>(keep[i])];
        out.y2[i] = ws.y2[static_cast<std::size_t>(keep[i])];
        out.source_rows[i] = ws.source_rows[static_cast<std::size_t>(keep[i])];
    }
    return out;
}

}  // namespace afc

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "afc/dataset.hpp"

namespace afc {

// Stride-1 sliding window of L rows by M parameters; the target of window g
// is row g + L - 1 + f (last row plus forecast offset).
struct WindowSpec {
    int length = 12;          // L
    int width = 0;            // M, must match retained column count
    int forecast_offset = 0;  // f in {0,1,2,3}
};

struct WindowedSet {
    // Row g holds window g flattened time-major: element t*M + m.
    Eigen::MatrixXd inputs;              // P x (L*M)
    std::vector<std::uint8_t> y1;        // length P
    std::vector<int> y2;                 // length P
    std::vector<Eigen::Index> source_rows;  // target row index per window
    WindowSpec spec;

    Eigen::Index count() const { return inputs.rows(); }
    bool degenerate() const { return inputs.rows() == 0; }
};

WindowedSet build_windows(const MergedDataset& dataset, const WindowSpec& spec);

// Keeps windows with prediction = 1, preserving temporal order.
WindowedSet select_alarm_windows(const WindowedSet& ws, const std::vector<std::uint8_t>& predictions);

}  // namespace afc

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace afc {

// Raw per-turbine SCADA table: N timestamped rows of rho parameters.
// Missing cells are NaN.
struct ScadaTable {
    std::string turbine_id;
    std::vector<std::int64_t> timestamps;  // epoch seconds, strictly increasing
    std::vector<std::string> param_ids;
    Eigen::MatrixXd values;  // N x rho

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

struct AlarmEvent {
    std::int64_t start_time = 0;  // epoch seconds
    std::int64_t duration_s = 0;  // >= 0
    int raw_code = 0;
    std::string description;
    std::string category;
};

// Ascending re-tagging of raw alarm codes to contiguous 1..K. Code 0 is
// normal operation and never mapped.
class AlarmCodebook {
public:
    explicit AlarmCodebook(std::map<int, int> code_to_tag);

    int tag_of(int raw_code) const;       // throws DataError if unmapped
    int code_of(int tag) const;           // throws DataError if out of range
    bool contains(int raw_code) const { return code_to_tag_.count(raw_code) != 0; }
    int size() const { return static_cast<int>(tag_to_code_.size()); }  // K

private:
    std::map<int, int> code_to_tag_;
    std::vector<int> tag_to_code_;  // index tag-1
};

// SCADA rows merged with alarm labels. y1 is the binary alarm identifier,
// y2 the alarm tag (0 = no alarm).
struct MergedDataset {
    std::string turbine_id;
    std::vector<std::int64_t> timestamps;
    std::vector<std::string> param_ids;
    Eigen::MatrixXd values;      // N x M, may contain NaN until imputed
    std::vector<std::uint8_t> y1;  // length N
    std::vector<int> y2;           // length N, 0 or tag in 1..K

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// Row interval length in seconds (nominal 10-minute SCADA cadence).
inline constexpr std::int64_t kRowIntervalSeconds = 600;

}  // namespace afc

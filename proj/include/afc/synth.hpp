#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afc/dataset.hpp"

namespace afc {

// A deterministic excursion on one parameter `lead` rows before each firing
// of the associated alarm tag.
struct PrecursorRule {
    int param_index = 0;
    double magnitude = 0.0;
    int lead = 1;  // rows
    int tag = 0;
};

struct AlarmRate {
    int tag = 0;
    double base_rate = 0.0;  // per-row Bernoulli probability, in (0,1)
};

struct SynthSpec {
    int n_turbines = 1;
    int rows_per_turbine = 1000;
    int n_params = 8;
    std::vector<AlarmRate> alarm_tags;
    std::vector<PrecursorRule> precursor_rules;
    double noise_std = 0.0;
    std::vector<double> nan_injection;  // per-param fraction in [0,1); empty = none
    std::uint64_t seed = 0;
    std::int64_t start_time = 1600000000;
};

struct PlantedAlarm {
    std::string turbine_id;
    Eigen::Index row = 0;
    int tag = 0;
};

struct SynthResult {
    std::vector<MergedDataset> datasets;
    std::vector<PlantedAlarm> ground_truth;
};

SynthResult generate(const SynthSpec& spec);

// CSV export compatible with the ingest formats. Planted tag c is written
// with raw alarm code 1000 + c so ascending re-tagging preserves tag order.
void write_scada_csv(const MergedDataset& ds, const std::string& path);
void write_alarm_csv(const MergedDataset& ds, const std::string& path);

}  // namespace afc

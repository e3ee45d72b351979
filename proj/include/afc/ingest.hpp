#pragma once

#include <string>
#include <vector>

#include "afc/dataset.hpp"

namespace afc {

// SCADA CSV: header `timestamp,<param>,...`; timestamps ISO-8601 or epoch
// seconds; empty cell = missing value.
ScadaTable parse_scada(const std::string& path);

// Alarm CSV: header `start_time,duration_s,code,description,category`.
// Events are returned sorted by start_time.
std::vector<AlarmEvent> parse_alarm_log(const std::string& path);

// Distinct non-zero raw codes across all turbines, ascending, tagged 1..K.
AlarmCodebook build_codebook(const std::vector<AlarmEvent>& events);

// Marks row t iff some event interval [start, start+duration) intersects
// [timestamps[t], timestamps[t]+600). When several events mark one row the
// earliest start wins, ties broken by lowest tag.
MergedDataset merge_alarms(const ScadaTable& scada, const std::vector<AlarmEvent>& events,
                           const AlarmCodebook& codebook);

}  // namespace afc

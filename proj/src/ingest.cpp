#include "afc/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "afc/error.hpp"

namespace afc {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Howard Hinnant's days-from-civil; avoids timegm portability issues.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// Accepts epoch seconds or ISO-8601 "YYYY-MM-DD[T ]HH:MM:SS".
std::int64_t parse_timestamp(const std::string& raw, std::size_t row) {
    std::string s = trim(raw);
    if (s.empty()) throw ParseError("row " + std::to_string(row) + ": empty timestamp");
    bool numeric = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(std::isdigit(static_cast<unsigned char>(s[i])) || (i == 0 && s[i] == '-'))) {
            numeric = false;
            break;
        }
    }
    if (numeric) {
        try {
            return std::stoll(s);
        } catch (const std::exception&) {
            throw ParseError("row " + std::to_string(row) + ": bad epoch timestamp '" + s + "'");
        }
    }
    int y, mo, d, h, mi, sec;
    char sep;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec) == 7 &&
        (sep == 'T' || sep == ' ') && mo >= 1 && mo <= 12 && d >= 1 && d <= 31 && h >= 0 &&
        h < 24 && mi >= 0 && mi < 60 && sec >= 0 && sec < 61) {
        return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + sec;
    }
    throw ParseError("row " + std::to_string(row) + ": malformed timestamp '" + s + "'");
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    std::string s = trim(raw);
    if (s.empty() || s == "NaN" || s == "nan" || s == "NA") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size()) {
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                         ": non-numeric value '" + s + "'");
    }
    return v;
}

std::string stem_of(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string name = (slash == std::string::npos) ? path : path.substr(slash + 1);
    std::size_t dot = name.find_last_of('.');
    return (dot == std::string::npos) ? name : name.substr(0, dot);
}

}  // namespace

ScadaTable parse_scada(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open SCADA file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    auto header = split_csv_line(line);
    if (header.size() < 2) throw ParseError(path + ": header needs timestamp plus >=1 parameter");

    ScadaTable table;
    table.turbine_id = stem_of(path);
    for (std::size_t j = 1; j < header.size(); ++j) table.param_ids.push_back(trim(header[j]));
    const std::size_t rho = table.param_ids.size();

    std::vector<std::int64_t> ts;
    std::vector<double> flat;
    std::size_t row = 1;  // header is row 0
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            ++row;
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != rho + 1) {
            throw ParseError(path + ": row " + std::to_string(row) + ": expected " +
                             std::to_string(rho + 1) + " fields, got " +
                             std::to_string(fields.size()));
        }
        ts.push_back(parse_timestamp(fields[0], row));
        for (std::size_t j = 1; j < fields.size(); ++j) {
            flat.push_back(parse_cell(fields[j], row, j));
        }
        ++row;
    }
    const std::size_t n = ts.size();
    if (n == 0) throw DataError(path + ": zero data rows");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ts[a] < ts[b]; });

    table.timestamps.resize(n);
    table.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rho));
    for (std::size_t i = 0; i < n; ++i) {
        table.timestamps[i] = ts[order[i]];
        if (i > 0 && table.timestamps[i] == table.timestamps[i - 1]) {
            throw DataError(path + ": duplicate timestamp " + std::to_string(table.timestamps[i]));
        }
        for (std::size_t j = 0; j < rho; ++j) {
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                flat[order[i] * rho + j];
        }
    }
    return table;
}

std::vector<AlarmEvent> parse_alarm_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open alarm log: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");

    std::vector<AlarmEvent> events;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            ++row;
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw ParseError(path + ": row " + std::to_string(row) +
                             ": expected 5 fields (start_time,duration_s,code,description,category)");
        }
        AlarmEvent ev;
        ev.start_time = parse_timestamp(fields[0], row);
        try {
            ev.duration_s = std::stoll(trim(fields[1]));
            ev.raw_code = std::stoi(trim(fields[2]));
        } catch (const std::exception&) {
            throw ParseError(path + ": row " + std::to_string(row) + ": bad duration or code");
        }
        if (ev.duration_s < 0) {
            throw DataError(path + ": row " + std::to_string(row) + ": negative duration " +
                            std::to_string(ev.duration_s));
        }
        if (ev.raw_code < 0) {
            throw DataError(path + ": row " + std::to_string(row) + ": negative alarm code");
        }
        ev.description = trim(fields[3]);
        ev.category = trim(fields[4]);
        events.push_back(std::move(ev));
        ++row;
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const AlarmEvent& a, const AlarmEvent& b) { return a.start_time < b.start_time; });
    return events;
}

AlarmCodebook::AlarmCodebook(std::map<int, int> code_to_tag) : code_to_tag_(std::move(code_to_tag)) {
    tag_to_code_.resize(code_to_tag_.size());
    for (const auto& [code, tag] : code_to_tag_) {
        tag_to_code_[static_cast<std::size_t>(tag - 1)] = code;
    }
}

int AlarmCodebook::tag_of(int raw_code) const {
    auto it = code_to_tag_.find(raw_code);
    if (it == code_to_tag_.end()) {
        throw DataError("alarm code " + std::to_string(raw_code) + " not in codebook");
    }
    return it->second;
}

int AlarmCodebook::code_of(int tag) const {
    if (tag < 1 || tag > size()) throw DataError("tag " + std::to_string(tag) + " out of range");
    return tag_to_code_[static_cast<std::size_t>(tag - 1)];
}

AlarmCodebook build_codebook(const std::vector<AlarmEvent>& events) {
    std::map<int, int> mapping;  // ordered by raw code
    for (const auto& ev : events) {
        if (ev.raw_code != 0) mapping[ev.raw_code] = 0;
    }
    if (mapping.empty()) throw DataError("no non-zero alarm codes; cannot build codebook");
    int tag = 1;
    for (auto& [code, t] : mapping) t = tag++;
    return AlarmCodebook(std::move(mapping));
}

MergedDataset merge_alarms(const ScadaTable& scada, const std::vector<AlarmEvent>& events,
                           const AlarmCodebook& codebook) {
    for (const auto& ev : events) {
        if (ev.raw_code != 0 && !codebook.contains(ev.raw_code)) {
            throw DataError("event code " + std::to_string(ev.raw_code) + " missing from codebook");
        }
    }

    MergedDataset out;
    out.turbine_id = scada.turbine_id;
    out.timestamps = scada.timestamps;
    out.param_ids = scada.param_ids;
    out.values = scada.values;
    const std::size_t n = scada.timestamps.size();
    out.y1.assign(n, 0);
    out.y2.assign(n, 0);

    // Winner per row: earliest event start, then lowest tag.
    std::vector<std::int64_t> win_start(n, std::numeric_limits<std::int64_t>::max());
    for (const auto& ev : events) {
        if (ev.raw_code == 0) continue;
        const int tag = codebook.tag_of(ev.raw_code);
        const std::int64_t ev_end = ev.start_time + ev.duration_s;  // half-open
        for (std::size_t t = 0; t < n; ++t) {
            const std::int64_t row_start = scada.timestamps[t];
            const std::int64_t row_end = row_start + kRowIntervalSeconds;
            bool hits = (ev.duration_s == 0)
                            ? (ev.start_time >= row_start && ev.start_time < row_end)
                            : (ev.start_time < row_end && ev_end > row_start);
            if (!hits) continue;
            if (ev.start_time < win_start[t] ||
                (ev.start_time == win_start[t] && tag < out.y2[t])) {
                win_start[t] = ev.start_time;
                out.y1[t] = 1;
                out.y2[t] = tag;
            }
        }
    }
    return out;
}

}  // namespace afc

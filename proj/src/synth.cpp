#include "afc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <map>
#include <set>

#include "afc/error.hpp"
#include "afc/rng.hpp"

namespace afc {
namespace {

void validate(const SynthSpec& spec) {
    if (spec.n_turbines < 1 || spec.rows_per_turbine < 1 || spec.n_params < 1) {
        throw UsageError("synth: turbines, rows and params must be positive");
    }
    std::set<int> tags;
    for (const auto& ar : spec.alarm_tags) {
        if (ar.tag < 1) throw UsageError("synth: alarm tags must be >= 1");
        if (ar.base_rate <= 0.0 || ar.base_rate >= 1.0) {
            throw UsageError("synth: base rate must be in (0,1)");
        }
        if (!tags.insert(ar.tag).second) throw UsageError("synth: duplicate alarm tag");
    }
    std::map<std::pair<int, int>, double> seen;  // (tag, param) -> magnitude
    for (const auto& rule : spec.precursor_rules) {
        if (rule.lead < 1) throw UsageError("synth: rule lead must be >= 1");
        if (rule.param_index < 0 || rule.param_index >= spec.n_params) {
            throw UsageError("synth: rule parameter index out of range");
        }
        if (tags.count(rule.tag) == 0) throw UsageError("synth: rule tag has no base rate");
        auto key = std::make_pair(rule.tag, rule.param_index);
        auto [it, inserted] = seen.emplace(key, rule.magnitude);
        if (!inserted && it->second != rule.magnitude) {
            throw UsageError("synth: contradictory rules for tag " + std::to_string(rule.tag) +
                             " on parameter " + std::to_string(rule.param_index));
        }
    }
    for (double f : spec.nan_injection) {
        if (f < 0.0 || f >= 1.0) throw UsageError("synth: NaN fraction must be in [0,1)");
    }
    if (!spec.nan_injection.empty() &&
        static_cast<int>(spec.nan_injection.size()) != spec.n_params) {
        throw UsageError("synth: nan_injection length must equal n_params");
    }
}

std::string turbine_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "WT%02d", i + 1);
    return buf;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
    validate(spec);
    SynthResult result;
    Rng master(spec.seed);

    for (int ti = 0; ti < spec.n_turbines; ++ti) {
        Rng rng = master.split(static_cast<std::uint64_t>(ti) + 1);
        const int n = spec.rows_per_turbine;
        const int m = spec.n_params;

        MergedDataset ds;
        ds.turbine_id = turbine_name(ti);
        ds.timestamps.resize(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) {
            ds.timestamps[static_cast<std::size_t>(t)] = spec.start_time + static_cast<std::int64_t>(t) * kRowIntervalSeconds;
        }
        ds.param_ids.resize(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "p%03d", j);
            ds.param_ids[static_cast<std::size_t>(j)] = buf;
        }

        // Mean-reverting drift baseline per parameter so forward-fill
        // imputation operates on realistic short-term continuity.
        ds.values.resize(n, m);
        for (int j = 0; j < m; ++j) {
            double x = rng.normal(0.0, 0.2);
            for (int t = 0; t < n; ++t) {
                x = 0.95 * x + rng.normal(0.0, 0.05);
                ds.values(t, j) = x + spec.noise_std * rng.normal();
            }
        }

        // Draw alarms; when several tags fire on one row the lowest wins.
        ds.y1.assign(static_cast<std::size_t>(n), 0);
        ds.y2.assign(static_cast<std::size_t>(n), 0);
        std::vector<AlarmRate> rates = spec.alarm_tags;
        std::sort(rates.begin(), rates.end(),
                  [](const AlarmRate& a, const AlarmRate& b) { return a.tag < b.tag; });
        int min_lead = 1;
        for (const auto& rule : spec.precursor_rules) min_lead = std::max(min_lead, rule.lead);
        for (int t = min_lead; t < n; ++t) {
            for (const auto& ar : rates) {
                if (rng.uniform() < ar.base_rate) {
                    ds.y1[static_cast<std::size_t>(t)] = 1;
                    ds.y2[static_cast<std::size_t>(t)] = ar.tag;
                    result.ground_truth.push_back({ds.turbine_id, t, ar.tag});
                    break;
                }
            }
        }

        // Plant precursor excursions.
        for (int t = 0; t < n; ++t) {
            const int tag = ds.y2[static_cast<std::size_t>(t)];
            if (tag == 0) continue;
            for (const auto& rule : spec.precursor_rules) {
                if (rule.tag == tag && t - rule.lead >= 0) {
                    ds.values(t - rule.lead, rule.param_index) += rule.magnitude;
                }
            }
        }

        // NaN injection.
        if (!spec.nan_injection.empty()) {
            for (int j = 0; j < m; ++j) {
                const double frac = spec.nan_injection[static_cast<std::size_t>(j)];
                if (frac <= 0.0) continue;
                for (int t = 0; t < n; ++t) {
                    if (rng.uniform() < frac) {
                        ds.values(t, j) = std::numeric_limits<double>::quiet_NaN();
                    }
                }
            }
        }

        result.datasets.push_back(std::move(ds));
    }
    return result;
}

void write_scada_csv(const MergedDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "timestamp";
    for (const auto& id : ds.param_ids) out << "," << id;
    out << "\n";
    char buf[32];
    for (Eigen::Index t = 0; t < ds.rows(); ++t) {
        out << ds.timestamps[static_cast<std::size_t>(t)];
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            const double v = ds.values(t, j);
            if (std::isnan(v)) {
                out << ",";
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << "," << buf;
            }
        }
        out << "\n";
    }
}

void write_alarm_csv(const MergedDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "start_time,duration_s,code,description,category\n";
    for (Eigen::Index t = 0; t < ds.rows(); ++t) {
        const int tag = ds.y2[static_cast<std::size_t>(t)];
        if (tag == 0) continue;
        // Duration 1s marks exactly the containing row on re-ingest.
        out << ds.timestamps[static_cast<std::size_t>(t)] << ",1," << (1000 + tag)
            << ",synthetic alarm tag " << tag << ",synthetic\n";
    }
}

}  // namespace afc

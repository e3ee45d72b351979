#include "afc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "afc/error.hpp"
#include "afc/ingest.hpp"
#include "afc/windowing.hpp"

namespace afc {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------- small helpers ----------

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw UsageError(path + ": bad config line '" + t + "'");
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

double to_double(const std::string& s, const std::string& key) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': bad number '" + s + "'");
    }
}

long long to_int(const std::string& s, const std::string& key) {
    try {
        return std::stoll(s);
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': bad integer '" + s + "'");
    }
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------- binary IO ----------

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ofstream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ofstream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
void write_str(std::ofstream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::int64_t read_i64(std::ifstream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
void read_f64(std::ifstream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
std::string read_str(std::ifstream& in) {
    std::string s(read_u64(in), '\0');
    in.read(s.data(), static_cast<std::streamsize>(s.size()));
    return s;
}
void expect_magic(std::ifstream& in, const char* magic, const std::string& path) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::string(buf, 4) != magic) {
        throw DataError(path + ": bad artifact magic (expected " + magic + ")");
    }
}

// ---------- staged artifact paths ----------

struct Paths {
    fs::path out;
    explicit Paths(const PipelineConfig& cfg) : out(cfg.out_dir) {}
    fs::path codebook() const { return out / "codebook.json"; }
    fs::path retention() const { return out / "retention.json"; }
    fs::path scaler() const { return out / "scaler.json"; }
    fs::path nan_stats() const { return out / "nan_stats.csv"; }
    fs::path merged(const std::string& id) const { return out / "merged" / (id + ".bin"); }
    fs::path fw_dir(int f) const { return out / ("fw" + std::to_string(f)); }
    fs::path model(int f) const { return fw_dir(f) / "model.bin"; }
    fs::path knn(int f) const { return fw_dir(f) / "knn.bin"; }
    fs::path tree(int f) const { return fw_dir(f) / "dt.json"; }
    fs::path forest(int f) const { return fw_dir(f) / "rf.json"; }
    fs::path loss_trace(int f) const { return fw_dir(f) / "loss_trace.csv"; }
    fs::path report_json(int f, const std::string& id) const {
        return fw_dir(f) / ("report_" + id + ".json");
    }
    fs::path report_csv(int f, const std::string& id) const {
        return fw_dir(f) / ("report_" + id + ".csv");
    }
    fs::path summary() const { return out / "summary.csv"; }
};

fs::path scada_path(const PipelineConfig& cfg, const std::string& id) {
    return fs::path(cfg.data_dir) / ("scada_" + id + ".csv");
}
fs::path alarm_path(const PipelineConfig& cfg, const std::string& id) {
    return fs::path(cfg.data_dir) / ("alarms_" + id + ".csv");
}

void check_split(const PipelineConfig& cfg) {
    if (cfg.train_turbines.empty() || cfg.test_turbines.empty()) {
        throw UsageError("train and test turbine sets must both be non-empty");
    }
    for (const auto& id : cfg.train_turbines) {
        if (std::find(cfg.test_turbines.begin(), cfg.test_turbines.end(), id) !=
            cfg.test_turbines.end()) {
            throw UsageError("turbine '" + id + "' appears in both train and test sets");
        }
    }
    for (int f : cfg.fw) {
        if (f < 0 || f > 3) {
            throw UsageError("forecast offset " + std::to_string(f) + " out of supported range 0-3");
        }
    }
}

json metric_json(const MetricReport& m) {
    auto opt = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
    };
    return json{{"accuracy", opt(m.accuracy)},
                {"precision", opt(m.precision)},
                {"recall", opt(m.recall)},
                {"f1", opt(m.f1)}};
}

}  // namespace

// ---------- config ----------

PipelineConfig parse_config_text(const std::string& text) {
    // Route through a temp-free path: reuse the file parser on a stream.
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw UsageError("bad config line '" + t + "'");
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }

    PipelineConfig cfg;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto* v = get("data_dir")) cfg.data_dir = *v;
    if (auto* v = get("turbines")) cfg.turbines = split(*v, ',');
    if (auto* v = get("train_turbines")) cfg.train_turbines = split(*v, ',');
    if (auto* v = get("test_turbines")) cfg.test_turbines = split(*v, ',');
    if (auto* v = get("reference_turbine")) cfg.reference_turbine = *v;
    if (auto* v = get("nan_threshold")) cfg.nan_threshold = to_double(*v, "nan_threshold");
    if (auto* v = get("window_length")) cfg.window_length = static_cast<int>(to_int(*v, "window_length"));
    if (auto* v = get("fw")) {
        cfg.fw.clear();
        for (const auto& s : split(*v, ',')) cfg.fw.push_back(static_cast<int>(to_int(s, "fw")));
    }
    if (auto* v = get("layer_widths")) {
        cfg.layer_widths.clear();
        for (const auto& s : split(*v, ','))
            cfg.layer_widths.push_back(static_cast<int>(to_int(s, "layer_widths")));
    }
    if (auto* v = get("epochs_per_dataset"))
        cfg.train.epochs_per_dataset = static_cast<int>(to_int(*v, "epochs_per_dataset"));
    if (auto* v = get("learning_rate")) cfg.train.learning_rate = to_double(*v, "learning_rate");
    if (auto* v = get("batch_size")) cfg.train.batch_size = static_cast<int>(to_int(*v, "batch_size"));
    if (auto* v = get("seed")) cfg.train.seed = static_cast<std::uint64_t>(to_int(*v, "seed"));
    if (auto* v = get("decision_threshold"))
        cfg.train.decision_threshold = to_double(*v, "decision_threshold");
    if (auto* v = get("gradient_clip_norm"))
        cfg.train.gradient_clip_norm = to_double(*v, "gradient_clip_norm");
    if (auto* v = get("knn_k")) cfg.knn_k = static_cast<int>(to_int(*v, "knn_k"));
    if (auto* v = get("rf_trees")) cfg.forest.n_trees = static_cast<int>(to_int(*v, "rf_trees"));
    if (auto* v = get("dt_max_depth")) {
        cfg.tree.max_depth = static_cast<int>(to_int(*v, "dt_max_depth"));
        cfg.forest.tree.max_depth = cfg.tree.max_depth;
    }
    if (auto* v = get("out_dir")) cfg.out_dir = *v;
    if (auto* v = get("jobs")) cfg.jobs = static_cast<int>(to_int(*v, "jobs"));

    if (cfg.turbines.empty()) throw UsageError("config: 'turbines' is required");
    if (cfg.train_turbines.empty() && cfg.test_turbines.empty()) {
        // Default 60-40 split over whole turbines, in id order.
        const std::size_t n_train = std::max<std::size_t>(1, (cfg.turbines.size() * 6 + 9) / 10);
        for (std::size_t i = 0; i < cfg.turbines.size(); ++i) {
            (i < n_train ? cfg.train_turbines : cfg.test_turbines).push_back(cfg.turbines[i]);
        }
    }
    if (cfg.reference_turbine.empty() && !cfg.train_turbines.empty()) {
        cfg.reference_turbine = cfg.train_turbines.front();
    }
    check_split(cfg);
    if (cfg.train.decision_threshold <= 0.0 || cfg.train.decision_threshold >= 1.0) {
        throw UsageError("decision_threshold must be in (0,1)");
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
    std::ostringstream s;
    s << cfg.data_dir << '|';
    for (const auto& t : cfg.turbines) s << t << ',';
    s << '|';
    for (const auto& t : cfg.train_turbines) s << t << ',';
    s << '|' << cfg.nan_threshold << '|' << cfg.window_length << '|';
    for (int w : cfg.layer_widths) s << w << ',';
    s << '|' << cfg.train.epochs_per_dataset << '|' << cfg.train.learning_rate << '|'
      << cfg.train.batch_size << '|' << cfg.train.seed << '|' << cfg.train.decision_threshold
      << '|' << cfg.train.gradient_clip_norm << '|' << cfg.knn_k << '|' << cfg.forest.n_trees;
    // FNV-1a
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : s.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

SynthSpec load_synth_spec(const std::string& path) {
    auto kv = parse_kv_file(path);
    SynthSpec spec;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto* v = get("n_turbines")) spec.n_turbines = static_cast<int>(to_int(*v, "n_turbines"));
    if (auto* v = get("rows_per_turbine"))
        spec.rows_per_turbine = static_cast<int>(to_int(*v, "rows_per_turbine"));
    if (auto* v = get("n_params")) spec.n_params = static_cast<int>(to_int(*v, "n_params"));
    if (auto* v = get("noise_std")) spec.noise_std = to_double(*v, "noise_std");
    if (auto* v = get("seed")) spec.seed = static_cast<std::uint64_t>(to_int(*v, "seed"));
    if (auto* v = get("start_time")) spec.start_time = to_int(*v, "start_time");
    if (auto* v = get("alarm_tags")) {
        for (const auto& item : split(*v, ',')) {
            auto parts = split(item, ':');
            if (parts.size() != 2) throw UsageError("synth spec: alarm_tags items are tag:rate");
            spec.alarm_tags.push_back({static_cast<int>(to_int(parts[0], "alarm_tags")),
                                       to_double(parts[1], "alarm_tags")});
        }
    }
    if (auto* v = get("rules")) {
        for (const auto& item : split(*v, ',')) {
            auto parts = split(item, ':');
            if (parts.size() != 4) {
                throw UsageError("synth spec: rules items are param:magnitude:lead:tag");
            }
            spec.precursor_rules.push_back({static_cast<int>(to_int(parts[0], "rules")),
                                            to_double(parts[1], "rules"),
                                            static_cast<int>(to_int(parts[2], "rules")),
                                            static_cast<int>(to_int(parts[3], "rules"))});
        }
    }
    if (auto* v = get("nan_injection")) {
        for (const auto& s : split(*v, ',')) spec.nan_injection.push_back(to_double(s, "nan_injection"));
    }
    return spec;
}

// ---------- artifact IO ----------

void save_merged(const MergedDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write("AFCM", 4);
    write_u64(out, 1);  // version; doubles are host little-endian
    write_str(out, ds.turbine_id);
    write_u64(out, static_cast<std::uint64_t>(ds.rows()));
    write_u64(out, static_cast<std::uint64_t>(ds.cols()));
    for (const auto& id : ds.param_ids) write_str(out, id);
    for (auto t : ds.timestamps) write_i64(out, t);
    write_f64(out, ds.values.data(), static_cast<std::size_t>(ds.values.size()));
    out.write(reinterpret_cast<const char*>(ds.y1.data()),
              static_cast<std::streamsize>(ds.y1.size()));
    for (int v : ds.y2) write_i64(out, v);
}

MergedDataset load_merged(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open artifact " + path);
    expect_magic(in, "AFCM", path);
    if (read_u64(in) != 1) throw DataError(path + ": unsupported artifact version");
    MergedDataset ds;
    ds.turbine_id = read_str(in);
    const auto n = static_cast<Eigen::Index>(read_u64(in));
    const auto m = static_cast<Eigen::Index>(read_u64(in));
    ds.param_ids.resize(static_cast<std::size_t>(m));
    for (auto& id : ds.param_ids) id = read_str(in);
    ds.timestamps.resize(static_cast<std::size_t>(n));
    for (auto& t : ds.timestamps) t = read_i64(in);
    ds.values.resize(n, m);
    read_f64(in, ds.values.data(), static_cast<std::size_t>(ds.values.size()));
    ds.y1.resize(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(ds.y1.data()), static_cast<std::streamsize>(ds.y1.size()));
    ds.y2.resize(static_cast<std::size_t>(n));
    for (auto& v : ds.y2) v = static_cast<int>(read_i64(in));
    if (!in) throw DataError(path + ": truncated artifact");
    return ds;
}

void save_model(const LstmStack& model, double threshold, std::uint64_t cfg_hash,
                const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write("AFCR", 4);
    write_u64(out, 1);
    write_u64(out, static_cast<std::uint64_t>(model.steps));
    write_u64(out, static_cast<std::uint64_t>(model.features));
    write_u64(out, model.layers.size());
    for (int w : model.layer_widths) write_u64(out, static_cast<std::uint64_t>(w));
    write_f64(out, &threshold, 1);
    write_u64(out, cfg_hash);
    for (const auto& layer : model.layers) {
        write_f64(out, layer.input_weights.data(), static_cast<std::size_t>(layer.input_weights.size()));
        write_f64(out, layer.recurrent_weights.data(),
                  static_cast<std::size_t>(layer.recurrent_weights.size()));
        write_f64(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
    write_f64(out, model.dense_weights.data(), static_cast<std::size_t>(model.dense_weights.size()));
    write_f64(out, &model.dense_bias, 1);
}

LstmStack load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open artifact " + path);
    expect_magic(in, "AFCR", path);
    if (read_u64(in) != 1) throw DataError(path + ": unsupported artifact version");
    LstmStack model;
    model.steps = static_cast<int>(read_u64(in));
    model.features = static_cast<int>(read_u64(in));
    const std::size_t n_layers = read_u64(in);
    model.layer_widths.resize(n_layers);
    for (auto& w : model.layer_widths) w = static_cast<int>(read_u64(in));
    double threshold = 0.0;
    read_f64(in, &threshold, 1);
    read_u64(in);  // config hash, informational
    int d_in = model.features;
    for (int h : model.layer_widths) {
        LstmLayer layer;
        layer.input_weights.resize(4 * h, d_in);
        layer.recurrent_weights.resize(4 * h, h);
        layer.bias.resize(4 * h);
        read_f64(in, layer.input_weights.data(), static_cast<std::size_t>(layer.input_weights.size()));
        read_f64(in, layer.recurrent_weights.data(),
                 static_cast<std::size_t>(layer.recurrent_weights.size()));
        read_f64(in, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
        model.layers.push_back(std::move(layer));
        d_in = h;
    }
    model.dense_weights.resize(static_cast<Eigen::Index>(model.steps) * model.layer_widths.back());
    read_f64(in, model.dense_weights.data(), static_cast<std::size_t>(model.dense_weights.size()));
    read_f64(in, &model.dense_bias, 1);
    if (!in) throw DataError(path + ": truncated artifact");
    return model;
}

void save_knn(const KnnModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write("AFCK", 4);
    write_u64(out, 1);
    write_u64(out, static_cast<std::uint64_t>(model.k()));
    write_u64(out, static_cast<std::uint64_t>(model.training().rows()));
    write_u64(out, static_cast<std::uint64_t>(model.training().cols()));
    write_f64(out, model.training().data(), static_cast<std::size_t>(model.training().size()));
    for (int t : model.tags()) write_i64(out, t);
}

KnnModel load_knn(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open artifact " + path);
    expect_magic(in, "AFCK", path);
    if (read_u64(in) != 1) throw DataError(path + ": unsupported artifact version");
    const int k = static_cast<int>(read_u64(in));
    const auto rows = static_cast<Eigen::Index>(read_u64(in));
    const auto cols = static_cast<Eigen::Index>(read_u64(in));
    Eigen::MatrixXd training(rows, cols);
    read_f64(in, training.data(), static_cast<std::size_t>(training.size()));
    std::vector<int> tags(static_cast<std::size_t>(rows));
    for (auto& t : tags) t = static_cast<int>(read_i64(in));
    if (!in) throw DataError(path + ": truncated artifact");
    return KnnModel(std::move(training), std::move(tags), k);
}

namespace {
json tree_to_json(const DecisionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes()) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
    }
    return nodes;
}
DecisionTree tree_from_json(const json& nodes) {
    std::vector<TreeNode> out;
    for (const auto& n : nodes) {
        out.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(),
                       n[4].get<int>()});
    }
    return DecisionTree::from_nodes(std::move(out));
}
}  // namespace

void save_tree(const DecisionTree& tree, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << json{{"version", 1}, {"nodes", tree_to_json(tree)}}.dump() << "\n";
}

DecisionTree load_tree(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open artifact " + path);
    json j = json::parse(in);
    return tree_from_json(j.at("nodes"));
}

void save_forest(const RandomForest& forest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    json trees = json::array();
    for (const auto& tree : forest.trees()) trees.push_back(tree_to_json(tree));
    out << json{{"version", 1}, {"trees", trees}}.dump() << "\n";
}

RandomForest load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open artifact " + path);
    json j = json::parse(in);
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(tree_from_json(t));
    return RandomForest::from_trees(std::move(trees));
}

// ---------- stages ----------

void run_synth(const SynthSpec& spec, const std::string& out_data_dir) {
    fs::create_directories(out_data_dir);
    SynthResult result = generate(spec);
    for (const auto& ds : result.datasets) {
        write_scada_csv(ds, (fs::path(out_data_dir) / ("scada_" + ds.turbine_id + ".csv")).string());
        write_alarm_csv(ds, (fs::path(out_data_dir) / ("alarms_" + ds.turbine_id + ".csv")).string());
    }
    json gt = json::array();
    for (const auto& pa : result.ground_truth) {
        gt.push_back({{"turbine", pa.turbine_id}, {"row", pa.row}, {"tag", pa.tag}});
    }
    std::ofstream out(fs::path(out_data_dir) / "ground_truth.json");
    out << gt.dump() << "\n";
}

void run_preprocess(const PipelineConfig& cfg) {
    Paths paths(cfg);
    fs::create_directories(paths.out / "merged");

    // Parse everything; the codebook covers all configured turbines so test
    // alarm codes stay mappable at evaluation time.
    std::map<std::string, ScadaTable> scada;
    std::map<std::string, std::vector<AlarmEvent>> alarms;
    std::vector<AlarmEvent> all_events;
    for (const auto& id : cfg.turbines) {
        const auto spath = scada_path(cfg, id);
        if (!fs::exists(spath)) throw DataError("missing input file: " + spath.string());
        const auto apath = alarm_path(cfg, id);
        if (!fs::exists(apath)) throw DataError("missing input file: " + apath.string());
        ScadaTable table = parse_scada(spath.string());
        table.turbine_id = id;  // configured id, not the filename stem
        scada.emplace(id, std::move(table));
        auto events = parse_alarm_log(apath.string());
        all_events.insert(all_events.end(), events.begin(), events.end());
        alarms.emplace(id, std::move(events));
    }
    AlarmCodebook codebook = build_codebook(all_events);
    {
        json codes = json::array();
        for (int tag = 1; tag <= codebook.size(); ++tag) codes.push_back(codebook.code_of(tag));
        std::ofstream out(paths.codebook());
        out << json{{"version", 1}, {"codes", codes}}.dump() << "\n";
    }

    std::map<std::string, MergedDataset> merged;
    for (const auto& id : cfg.turbines) {
        merged.emplace(id, merge_alarms(scada.at(id), alarms.at(id), codebook));
    }

    // NaN statistics per turbine and parameter (pre-retention).
    {
        std::ofstream out(paths.nan_stats());
        out << "turbine,param,nan_fraction\n";
        for (const auto& id : cfg.turbines) {
            auto frac = nan_fractions(merged.at(id));
            for (std::size_t j = 0; j < frac.size(); ++j) {
                out << id << "," << merged.at(id).param_ids[j] << "," << fmt_double(frac[j]) << "\n";
            }
        }
    }

    auto ref_it = merged.find(cfg.reference_turbine);
    if (ref_it == merged.end()) {
        throw UsageError("reference turbine '" + cfg.reference_turbine + "' not in turbine list");
    }
    RetentionMask mask = compute_retention(ref_it->second, cfg.nan_threshold);
    {
        json retained = json::array();
        for (const auto& id : mask.retained) retained.push_back(id);
        std::ofstream out(paths.retention());
        out << json{{"version", 1},
                    {"reference_turbine", mask.reference_turbine},
                    {"threshold", mask.threshold},
                    {"retained", retained}}
                   .dump()
            << "\n";
    }

    std::map<std::string, MergedDataset> imputed;
    for (const auto& id : cfg.turbines) {
        imputed.emplace(id, impute(apply_retention(merged.at(id), mask)));
    }

    // Scaler fitted on training turbines only, then applied everywhere.
    std::vector<MergedDataset> training;
    for (const auto& id : cfg.train_turbines) training.push_back(imputed.at(id));
    ScalerParams scaler = fit_scaler(training);
    {
        json params = json::array();
        for (std::size_t j = 0; j < scaler.param_ids.size(); ++j) {
            params.push_back({{"id", scaler.param_ids[j]},
                              {"min", scaler.min[j]},
                              {"max", scaler.max[j]}});
        }
        std::ofstream out(paths.scaler());
        out << json{{"version", 1}, {"params", params}}.dump() << "\n";
    }

    for (const auto& id : cfg.turbines) {
        save_merged(apply_scaler(imputed.at(id), scaler), paths.merged(id).string());
    }
}

namespace {

int load_codebook_size(const Paths& paths) {
    std::ifstream in(paths.codebook());
    if (!in) throw DataError("missing preprocess artifact: " + paths.codebook().string());
    json j = json::parse(in);
    return static_cast<int>(j.at("codes").size());
}

WindowedSet windows_for(const MergedDataset& ds, const PipelineConfig& cfg, int f) {
    WindowSpec spec;
    spec.length = cfg.window_length;
    spec.width = static_cast<int>(ds.cols());
    spec.forecast_offset = f;
    return build_windows(ds, spec);
}

struct TrainedStage {
    LstmStack model;
    KnnModel knn;
    DecisionTree tree;
    RandomForest forest;

    TrainedStage(LstmStack m, KnnModel k, DecisionTree t, RandomForest f)
        : model(std::move(m)), knn(std::move(k)), tree(std::move(t)), forest(std::move(f)) {}
};

void train_one_fw(const PipelineConfig& cfg, int f, const std::vector<MergedDataset>& train_data) {
    Paths paths(cfg);
    fs::create_directories(paths.fw_dir(f));

    std::vector<WindowedSet> train_windows;
    std::vector<std::string> ids;
    for (const auto& ds : train_data) {
        train_windows.push_back(windows_for(ds, cfg, f));
        ids.push_back(ds.turbine_id);
    }

    const int width = static_cast<int>(train_data.front().cols());
    LstmStack model = init_model(cfg.layer_widths, cfg.window_length, width, cfg.train.seed);
    std::vector<EpochRecord> trace = train(model, train_windows, ids, cfg.train);
    save_model(model, cfg.train.decision_threshold, config_hash(cfg), paths.model(f).string());
    {
        std::ofstream out(paths.loss_trace(f));
        out << "dataset,epoch,mean_loss\n";
        for (const auto& r : trace) {
            out << r.dataset_id << "," << r.epoch << "," << fmt_double(r.mean_loss) << "\n";
        }
    }

    // Classifier training set: regression-flagged windows that are true
    // alarms, in original temporal order per turbine, turbines in order.
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<int> tags;
    for (const auto& ws : train_windows) {
        if (ws.degenerate()) continue;
        ForecastOutput out = predict_binary(model, ws.inputs, cfg.train.decision_threshold);
        WindowedSet flagged = select_alarm_windows(ws, out.binary);
        for (Eigen::Index g = 0; g < flagged.count(); ++g) {
            if (flagged.y2[static_cast<std::size_t>(g)] > 0) {
                rows.push_back(flagged.inputs.row(g));
                tags.push_back(flagged.y2[static_cast<std::size_t>(g)]);
            }
        }
    }
    if (rows.empty()) {
        // The regressor flagged nothing (or nothing true). Fall back to all
        // true-alarm windows so downstream stages still get tagger
        // artifacts; evaluation will score the offset accordingly.
        for (const auto& ws : train_windows) {
            for (Eigen::Index g = 0; g < ws.count(); ++g) {
                if (ws.y2[static_cast<std::size_t>(g)] > 0) {
                    rows.push_back(ws.inputs.row(g));
                    tags.push_back(ws.y2[static_cast<std::size_t>(g)]);
                }
            }
        }
    }
    if (rows.empty()) {
        throw DataError("fw" + std::to_string(f) + ": no alarm windows to train classifiers");
    }
    Eigen::MatrixXd cls_inputs(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        cls_inputs.row(static_cast<Eigen::Index>(i)) = rows[i];
    }

    const int k = std::min<int>(cfg.knn_k, static_cast<int>(rows.size()));
    KnnModel knn(cls_inputs, tags, k);
    DecisionTree tree = DecisionTree::fit(cls_inputs, tags, cfg.tree);
    RandomForest forest = RandomForest::fit(cls_inputs, tags, cfg.forest, cfg.train.seed, cfg.jobs);

    save_knn(knn, paths.knn(f).string());
    save_tree(tree, paths.tree(f).string());
    save_forest(forest, paths.forest(f).string());
}

}  // namespace

void run_train(const PipelineConfig& cfg) {
    Paths paths(cfg);
    // Ascending turbine-id training order.
    std::vector<std::string> order = cfg.train_turbines;
    std::sort(order.begin(), order.end());
    std::vector<MergedDataset> train_data;
    for (const auto& id : order) {
        const auto path = paths.merged(id);
        if (!fs::exists(path)) {
            throw DataError("missing preprocess artifact: " + path.string() +
                            " (run the preprocess stage first)");
        }
        train_data.push_back(load_merged(path.string()));
    }
    for (int f : cfg.fw) train_one_fw(cfg, f, train_data);
}

namespace {

TurbineReport evaluate_turbine(const PipelineConfig& cfg, int f, const MergedDataset& ds,
                               const LstmStack& model, const KnnModel& knn,
                               const DecisionTree& tree, const RandomForest& forest,
                               int num_tags) {
    TurbineReport report;
    report.turbine = ds.turbine_id;
    report.fw = f;
    report.num_tags = num_tags;

    WindowedSet ws = windows_for(ds, cfg, f);
    if (ws.degenerate()) throw DataError(ds.turbine_id + ": dataset too short for windowing");

    ForecastOutput out = predict_binary(model, ws.inputs, cfg.train.decision_threshold);
    report.regression_counts = binary_contingency(out.binary, ws.y1);
    report.regression_metrics = metrics(report.regression_counts);

    WindowedSet flagged = select_alarm_windows(ws, out.binary);
    const std::vector<std::string> names = {"KNN", "DT", "RF"};
    std::vector<std::vector<int>> preds(3);
    for (Eigen::Index g = 0; g < flagged.count(); ++g) {
        preds[0].push_back(knn.predict(flagged.inputs.row(g)));
        preds[1].push_back(tree.predict(flagged.inputs.row(g)));
        preds[2].push_back(forest.predict(flagged.inputs.row(g)));
    }

    // Classifier scoring on true-alarm flagged windows; false positives are
    // accounted separately through the FPAF correction.
    std::vector<int> true_tags_on_flagged(static_cast<std::size_t>(flagged.count()));
    std::vector<std::vector<int>> preds_true(3);
    std::vector<int> tags_true;
    for (Eigen::Index g = 0; g < flagged.count(); ++g) {
        true_tags_on_flagged[static_cast<std::size_t>(g)] = flagged.y2[static_cast<std::size_t>(g)];
        if (flagged.y1[static_cast<std::size_t>(g)]) {
            tags_true.push_back(flagged.y2[static_cast<std::size_t>(g)]);
            for (int mi = 0; mi < 3; ++mi) {
                preds_true[static_cast<std::size_t>(mi)].push_back(
                    preds[static_cast<std::size_t>(mi)][static_cast<std::size_t>(g)]);
            }
        }
    }
    for (int mi = 0; mi < 3; ++mi) {
        report.classifier_metrics[names[static_cast<std::size_t>(mi)]] =
            multiclass_micro(preds_true[static_cast<std::size_t>(mi)], tags_true);
    }
    EnsembleVerdict verdict = bagged_select(names, preds_true, tags_true);
    report.chosen_model = verdict.chosen_model;

    const std::size_t chosen_idx = static_cast<std::size_t>(
        std::find(names.begin(), names.end(), verdict.chosen_model) - names.begin());
    report.fpaf_report =
        final_accuracy(out.binary, ws.y1, preds[chosen_idx], true_tags_on_flagged);

    // Per-alarm breakdown over all true-alarm windows; unflagged alarms
    // count as missed (forecast tag 0).
    std::vector<int> forecast_tags;
    std::vector<int> truth_tags;
    std::size_t flagged_idx = 0;
    for (Eigen::Index g = 0; g < ws.count(); ++g) {
        const bool is_flagged = out.binary[static_cast<std::size_t>(g)] != 0;
        if (ws.y1[static_cast<std::size_t>(g)]) {
            truth_tags.push_back(ws.y2[static_cast<std::size_t>(g)]);
            forecast_tags.push_back(is_flagged ? preds[chosen_idx][flagged_idx] : 0);
        }
        if (is_flagged) ++flagged_idx;
    }
    report.per_alarm = per_alarm_breakdown(forecast_tags, truth_tags);
    report.confusion = confusion_matrix(verdict.final_predictions, tags_true, num_tags);
    return report;
}

void write_report_files(const Paths& paths, const TurbineReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["turbine"] = r.turbine;
    j["fw"] = r.fw;
    j["regression"] = {{"counts",
                        {{"tp", r.regression_counts.tp},
                         {"fp", r.regression_counts.fp},
                         {"fn", r.regression_counts.fn},
                         {"tn", r.regression_counts.tn}}},
                       {"metrics", metric_json(r.regression_metrics)}};
    json cls;
    for (const auto& [name, m] : r.classifier_metrics) cls[name] = metric_json(m);
    j["classifiers"] = cls;
    j["fpaf"] = {{"predicted_alarms", r.fpaf_report.predicted_alarms},
                 {"regression_tp", r.fpaf_report.regression_tp},
                 {"regression_fp", r.fpaf_report.regression_fp},
                 {"classifier_correct", r.fpaf_report.classifier_correct},
                 {"fraction", opt(r.fpaf_report.fpaf_fraction)}};
    j["final_accuracy"] = opt(r.fpaf_report.final_accuracy);
    j["chosen_model"] = r.chosen_model;
    json per_alarm = json::array();
    for (const auto& row : r.per_alarm) {
        per_alarm.push_back({{"tag", row.tag},
                             {"occurrences", row.occurrences},
                             {"correct", row.correct},
                             {"accuracy", row.accuracy}});
    }
    j["per_alarm"] = per_alarm;
    j["confusion"] = {{"K", r.num_tags}, {"counts", r.confusion}};
    {
        std::ofstream out(paths.report_json(r.fw, r.turbine));
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(paths.report_csv(r.fw, r.turbine));
        auto cell = [](const std::optional<double>& v) { return v ? fmt_double(*v) : ""; };
        out << "key,value\n";
        out << "turbine," << r.turbine << "\n";
        out << "fw," << r.fw << "\n";
        out << "regression_tp," << r.regression_counts.tp << "\n";
        out << "regression_fp," << r.regression_counts.fp << "\n";
        out << "regression_fn," << r.regression_counts.fn << "\n";
        out << "regression_tn," << r.regression_counts.tn << "\n";
        out << "regression_recall," << cell(r.regression_metrics.recall) << "\n";
        out << "regression_precision," << cell(r.regression_metrics.precision) << "\n";
        for (const auto& [name, m] : r.classifier_metrics) {
            out << name << "_recall," << cell(m.recall) << "\n";
        }
        out << "fpaf," << cell(r.fpaf_report.fpaf_fraction) << "\n";
        out << "final_accuracy," << cell(r.fpaf_report.final_accuracy) << "\n";
        out << "chosen_model," << r.chosen_model << "\n";
        for (const auto& row : r.per_alarm) {
            out << "per_alarm_" << row.tag << "," << fmt_double(row.accuracy) << "\n";
        }
    }
}

}  // namespace

std::vector<TurbineReport> run_evaluate(const PipelineConfig& cfg) {
    Paths paths(cfg);
    const int num_tags = load_codebook_size(paths);

    std::vector<TurbineReport> reports;
    for (int f : cfg.fw) {
        if (!fs::exists(paths.model(f))) {
            throw DataError("missing train artifact: " + paths.model(f).string() +
                            " (run the train stage first)");
        }
        LstmStack model = load_model(paths.model(f).string());
        KnnModel knn = load_knn(paths.knn(f).string());
        DecisionTree tree = load_tree(paths.tree(f).string());
        RandomForest forest = load_forest(paths.forest(f).string());
        for (const auto& id : cfg.test_turbines) {
            MergedDataset ds = load_merged(paths.merged(id).string());
            TurbineReport r = evaluate_turbine(cfg, f, ds, model, knn, tree, forest, num_tags);
            write_report_files(paths, r);
            reports.push_back(std::move(r));
        }
    }

    // Summary grid: one row per forecast window, final accuracy per test
    // turbine plus the row average. Undefined scores print as 0.
    std::ofstream out(paths.summary());
    out << "fw";
    for (const auto& id : cfg.test_turbines) out << "," << id;
    out << ",average\n";
    for (int f : cfg.fw) {
        out << "FW" << f;
        double sum = 0.0;
        int n = 0;
        for (const auto& r : reports) {
            if (r.fw != f) continue;
            const double v = r.fpaf_report.final_accuracy.value_or(0.0);
            out << "," << fmt_double(v);
            sum += v;
            ++n;
        }
        out << "," << fmt_double(n > 0 ? sum / n : 0.0) << "\n";
    }
    return reports;
}

std::vector<SweepRow> run_sweep_fw(const PipelineConfig& cfg) {
    std::vector<SweepRow> rows;
    for (int f : cfg.fw) {
        PipelineConfig one = cfg;
        one.fw = {f};
        run_train(one);
        std::vector<TurbineReport> reports = run_evaluate(one);
        double recall_sum = 0.0, final_sum = 0.0;
        for (const auto& r : reports) {
            recall_sum += r.regression_metrics.recall.value_or(0.0);
            final_sum += r.fpaf_report.final_accuracy.value_or(0.0);
        }
        const double n = static_cast<double>(reports.size());
        rows.push_back({"FW" + std::to_string(f), recall_sum / n, final_sum / n});
    }
    return rows;
}

std::vector<SweepRow> run_sweep_depth(const PipelineConfig& cfg,
                                      const std::vector<std::vector<int>>& stacks) {
    Paths paths(cfg);
    const int f = cfg.fw.front();
    std::vector<std::string> order = cfg.train_turbines;
    std::sort(order.begin(), order.end());
    std::vector<WindowedSet> train_windows;
    for (const auto& id : order) {
        train_windows.push_back(windows_for(load_merged(paths.merged(id).string()), cfg, f));
    }

    // Pooled evaluation windows over the test turbines.
    std::vector<WindowedSet> test_sets;
    Eigen::Index total = 0;
    for (const auto& id : cfg.test_turbines) {
        test_sets.push_back(windows_for(load_merged(paths.merged(id).string()), cfg, f));
        total += test_sets.back().count();
    }
    WindowedSet eval_set;
    eval_set.spec = test_sets.front().spec;
    eval_set.inputs.resize(total, test_sets.front().inputs.cols());
    Eigen::Index at = 0;
    for (const auto& ts : test_sets) {
        eval_set.inputs.middleRows(at, ts.count()) = ts.inputs;
        eval_set.y1.insert(eval_set.y1.end(), ts.y1.begin(), ts.y1.end());
        eval_set.y2.insert(eval_set.y2.end(), ts.y2.begin(), ts.y2.end());
        eval_set.source_rows.insert(eval_set.source_rows.end(), ts.source_rows.begin(),
                                    ts.source_rows.end());
        at += ts.count();
    }

    std::vector<DepthSweepRow> sweep = depth_sweep(stacks, train_windows, eval_set, cfg.train);
    std::vector<SweepRow> rows;
    for (const auto& s : sweep) {
        std::string label;
        for (std::size_t i = 0; i < s.layer_widths.size(); ++i) {
            if (i) label += "-";
            label += std::to_string(s.layer_widths[i]);
        }
        rows.push_back({label, s.recall, 0.0});
    }
    return rows;
}

}  // namespace afc

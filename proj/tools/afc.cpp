#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "afc/error.hpp"
#include "afc/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    int jobs = 0;
    std::string fw;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "seed (overrides config)");
    cmd->add_option("--jobs", opts.jobs, "worker cap (overrides config)");
    cmd->add_option("--fw", opts.fw, "comma-separated forecast offsets (overrides config)");
}

afc::PipelineConfig resolve(const CommonOpts& opts) {
    afc::PipelineConfig cfg = afc::load_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.jobs > 0) cfg.jobs = opts.jobs;
    if (!opts.fw.empty()) {
        cfg.fw.clear();
        std::string cur;
        for (char c : opts.fw + ",") {
            if (c == ',') {
                if (!cur.empty()) cfg.fw.push_back(std::stoi(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        for (int f : cfg.fw) {
            if (f < 0 || f > 3) throw afc::UsageError("--fw values must be in 0-3");
        }
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AFC: SCADA alarm forecasting and classification pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic SCADA + alarm CSVs");
    std::string synth_spec_path, synth_out;
    long long synth_seed = -1;
    synth->add_option("--config", synth_spec_path, "synth spec file")->required();
    synth->add_option("--out", synth_out, "output data directory")->required();
    synth->add_option("--seed", synth_seed, "seed (overrides spec)");

    CommonOpts pre_opts, train_opts, eval_opts, sweep_opts;
    auto* preprocess = app.add_subcommand("preprocess", "merge, reduce, impute and scale");
    add_common(preprocess, pre_opts);
    auto* train = app.add_subcommand("train", "train regressor and classifiers");
    add_common(train, train_opts);
    auto* evaluate = app.add_subcommand("evaluate", "produce per-turbine reports and summary");
    add_common(evaluate, eval_opts);

    auto* sweep = app.add_subcommand("sweep", "depth or forecast-window comparison tables");
    add_common(sweep, sweep_opts);
    std::string sweep_mode = "fw";
    std::string sweep_depths;
    sweep->add_option("--mode", sweep_mode, "fw | depth")
        ->check(CLI::IsMember({"fw", "depth"}));
    sweep->add_option("--depths", sweep_depths,
                      "semicolon-separated width stacks, e.g. '32;64,32;128,64,32'");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            afc::SynthSpec spec = afc::load_synth_spec(synth_spec_path);
            if (synth_seed >= 0) spec.seed = static_cast<std::uint64_t>(synth_seed);
            afc::run_synth(spec, synth_out);
        } else if (preprocess->parsed()) {
            afc::run_preprocess(resolve(pre_opts));
        } else if (train->parsed()) {
            afc::run_train(resolve(train_opts));
        } else if (evaluate->parsed()) {
            afc::run_evaluate(resolve(eval_opts));
        } else if (sweep->parsed()) {
            afc::PipelineConfig cfg = resolve(sweep_opts);
            std::vector<afc::SweepRow> rows;
            if (sweep_mode == "depth") {
                if (sweep_depths.empty()) {
                    throw afc::UsageError("sweep --mode depth requires --depths");
                }
                std::vector<std::vector<int>> stacks;
                std::vector<int> cur;
                std::string num;
                for (char c : sweep_depths + ";") {
                    if (c == ',' || c == ';') {
                        if (!num.empty()) cur.push_back(std::stoi(num));
                        num.clear();
                        if (c == ';') {
                            if (!cur.empty()) stacks.push_back(cur);
                            cur.clear();
                        }
                    } else {
                        num.push_back(c);
                    }
                }
                rows = afc::run_sweep_depth(cfg, stacks);
                std::printf("%-20s %10s\n", "widths", "recall");
                for (const auto& r : rows) std::printf("%-20s %10.4f\n", r.label.c_str(), r.recall);
            } else {
                rows = afc::run_sweep_fw(cfg);
                std::printf("%-8s %10s %16s\n", "fw", "recall", "final_accuracy");
                for (const auto& r : rows) {
                    std::printf("%-8s %10.4f %16.4f\n", r.label.c_str(), r.recall, r.final_accuracy);
                }
            }
        }
    } catch (const afc::AfcError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

// Command-line front end: simulate, train, optimize, evaluate, compare.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "egolane/config.hpp"
#include "egolane/errors.hpp"
#include "egolane/harness.hpp"
#include "egolane/io.hpp"
#include "egolane/moo.hpp"

namespace fs = std::filesystem;
using namespace egolane;

namespace {

struct Common {
    std::string config_path;
    std::uint64_t seed = 1;
};

PipelineConfig load_or_default(const std::string& path) {
    return path.empty() ? parse_config("") : load_config(path);
}

void add_common(CLI::App* cmd, Common& common, bool with_config) {
    cmd->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    if (with_config) {
        cmd->add_option("--config", common.config_path, "Key-value configuration file")->check(CLI::ExistingFile);
    }
}

void add_nsga(CLI::App* cmd, NsgaConfig& nsga) {
    cmd->add_option("--pop", nsga.population, "NSGA-II population size")->capture_default_str();
    cmd->add_option("--gens", nsga.generations, "NSGA-II generations")->capture_default_str();
}

void print_rows(const ComparisonReport& report) {
    std::printf("%-6s %12s %12s %10s %8s %8s\n", "method", "earliness_s", "availability", "accuracy", "HV", "HV_test");
    for (const auto& row : report.rows) {
        std::printf("%-6s %12.3f %12.4f %10.4f %8.4f %8.4f\n", row.method.c_str(), row.metrics.earliness_s,
                    row.metrics.availability, row.metrics.accuracy, row.hypervolume, row.test_hypervolume);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ego-lane identification by early open time series classification"};
    app.require_subcommand(1);

    Common sim_opts;
    int count = 300;
    std::string out_dir;
    auto* simulate = app.add_subcommand("simulate", "Generate labeled synthetic sequences");
    add_common(simulate, sim_opts, true);
    simulate->add_option("--count", count, "Number of scenarios")->capture_default_str()->check(CLI::PositiveNumber);
    simulate->add_option("--out", out_dir, "Output directory")->required();

    Common train_opts;
    std::string train_data;
    std::string train_out;
    auto* train = app.add_subcommand("train", "Fit the classifier on the training split");
    add_common(train, train_opts, false);
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Model JSON")->required();

    Common opt_opts;
    std::string opt_data;
    std::string opt_model;
    std::string opt_variant = "s4";
    std::string opt_out;
    int opt_horizon = kDefaultHorizon;
    NsgaConfig opt_nsga;
    auto* optimize = app.add_subcommand("optimize", "Tune trigger parameters on the optimization split");
    add_common(optimize, opt_opts, false);
    add_nsga(optimize, opt_nsga);
    optimize->add_option("--data", opt_data, "Dataset directory")->required();
    optimize->add_option("--model", opt_model, "Model JSON")->required();
    optimize->add_option("--variant", opt_variant, "Trigger variant")
        ->capture_default_str()
        ->check(CLI::IsMember({"s1", "s2", "s3", "s4"}));
    optimize->add_option("--horizon", opt_horizon, "Horizon for s1/s2 (steps)")->capture_default_str();
    optimize->add_option("--out", opt_out, "Front JSON")->required();

    Common eval_opts;
    std::string eval_data;
    std::string eval_model;
    std::string eval_front;
    std::string eval_out;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate the selected operating point on the test split");
    add_common(evaluate_cmd, eval_opts, false);
    evaluate_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    evaluate_cmd->add_option("--model", eval_model, "Model JSON")->required();
    evaluate_cmd->add_option("--front", eval_front, "Front JSON")->required();
    evaluate_cmd->add_option("--out", eval_out, "Report JSON (stdout if omitted)");

    Common cmp_opts;
    std::string cmp_data;
    std::string cmp_model;
    std::string cmp_out;
    std::string cmp_curves;
    int cmp_count = 300;
    NsgaConfig cmp_nsga;
    auto* compare = app.add_subcommand("compare", "Optimize and evaluate all four trigger variants");
    add_common(compare, cmp_opts, true);
    add_nsga(compare, cmp_nsga);
    compare->add_option("--data", cmp_data, "Dataset directory (simulated in memory if omitted)");
    compare->add_option("--count", cmp_count, "Scenarios to simulate without --data")->capture_default_str();
    compare->add_option("--model", cmp_model, "Model JSON (trained on the fly if omitted)");
    compare->add_option("--out", cmp_out, "Report JSON")->required();
    compare->add_option("--curves", cmp_curves, "No-trigger curve CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) {
            Dataset dataset;
            dataset.config = load_or_default(sim_opts.config_path);
            dataset.sequences = simulate_dataset(dataset.config, count, sim_opts.seed);
            write_dataset(out_dir, dataset);
            int valid = 0;
            for (const auto& ls : dataset.sequences) {
                valid += ls.valid ? 1 : 0;
            }
            std::printf("wrote %d sequences (%d valid) to %s\n", count, valid, out_dir.c_str());
        } else if (*train) {
            const auto dataset = read_dataset(train_data);
            const auto split = split_dataset(dataset.sequences);
            const auto model = train_model(split.train, dataset.config);
            save_model(train_out, model);
            std::printf("trained on %zu sequences, %zu trees, final log-loss %.6f\n", split.train.size(),
                        model.trees.size(), model.training_loss.back());
        } else if (*optimize) {
            const auto dataset = read_dataset(opt_data);
            const auto split = split_dataset(dataset.sequences);
            const auto model = load_model(opt_model);
            opt_nsga.seed = opt_opts.seed;
            const auto traces = probability_traces(split.opt, model);
            const auto front =
                optimize_trigger(trigger_variant_from_string(opt_variant), traces, opt_nsga, opt_horizon);
            const auto selected = select_operating_point(front);
            write_text(opt_out, front_to_json(front, selected));
            std::printf("front of %zu points, hypervolume %.6f, selected %zu\n", front.points.size(), front.hypervolume,
                        selected);
        } else if (*evaluate_cmd) {
            const auto dataset = read_dataset(eval_data);
            const auto split = split_dataset(dataset.sequences);
            const auto model = load_model(eval_model);
            std::size_t selected = 0;
            const auto front = front_from_json(read_text(eval_front), &selected);
            if (front.points.empty()) {
                throw PreconditionError("evaluate: front has no points");
            }
            const auto& trigger = front.points[selected].trigger;
            const auto report = evaluate(split.test, model, trigger, front.hypervolume);
            const auto text = report_to_json(report, std::string(to_string(trigger.variant)));
            if (eval_out.empty()) {
                std::cout << text;
            } else {
                write_text(eval_out, text);
            }
        } else if (*compare) {
            Dataset dataset;
            if (cmp_data.empty()) {
                dataset.config = load_or_default(cmp_opts.config_path);
                dataset.sequences = simulate_dataset(dataset.config, cmp_count, cmp_opts.seed);
            } else {
                dataset = read_dataset(cmp_data);
            }
            const auto split = split_dataset(std::move(dataset.sequences));
            const auto model = cmp_model.empty() ? train_model(split.train, dataset.config) : load_model(cmp_model);
            cmp_nsga.seed = cmp_opts.seed;
            const auto report = compare_methods(split, model, cmp_nsga);
            write_text(cmp_out, report_to_json(report));
            if (!cmp_curves.empty()) {
                write_text(cmp_curves, curves_to_csv(report.curve));
            }
            print_rows(report);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error [%s]: %s\n", e.field().c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

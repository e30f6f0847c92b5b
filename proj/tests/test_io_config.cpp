#include <doctest.h>

#include <filesystem>
#include <random>

#include <json.hpp>

#include "egolane/config.hpp"
#include "egolane/errors.hpp"
#include "egolane/io.hpp"
#include "fixtures.hpp"

using namespace egolane;
namespace fs = std::filesystem;

namespace {

std::string config_error_field(std::string_view text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("egolane_test_" + name);
    fs::remove_all(dir);
    return dir;
}

void check_same(const LabeledSequence& a, const LabeledSequence& b) {
    CHECK(a.sequence == b.sequence);
    CHECK(a.labels == b.labels);
    CHECK(a.valid == b.valid);
    REQUIRE(a.hypotheses.size() == b.hypotheses.size());
    for (std::size_t i = 0; i < a.hypotheses.size(); ++i) {
        CHECK(a.hypotheses[i].id == b.hypotheses[i].id);
        CHECK(a.hypotheses[i].lane_index == b.hypotheses[i].lane_index);
        CHECK(a.hypotheses[i].mmq == b.hypotheses[i].mmq);
        CHECK(a.hypotheses[i].global_lateral == b.hypotheses[i].global_lateral);
    }
}

} // namespace

TEST_CASE("parse_config") {
    const auto c = parse_config(R"(
        # comment line
        num_lanes = 5
        lane_width = 3.0   # trailing comment
        point_noise_sigma = 0.2
        boosting_rounds = 12
        seed = 99
    )");
    CHECK(c.scenario.num_lanes == 5);
    CHECK(c.scenario.lane_width == 3.0);
    CHECK(c.scenario.seed == 99);
    CHECK(c.boosting.rounds == 12);
    CHECK(c.scenario.gnss_bias_range == doctest::Approx(4.5));
    CHECK(c.tracker.measurement_sigma == 0.2);

    const auto explicit_values = parse_config("gnss_bias_range = 1\nmeasurement_sigma = 0.3\npoint_noise_sigma = 0.05");
    CHECK(explicit_values.scenario.gnss_bias_range == 1.0);
    CHECK(explicit_values.tracker.measurement_sigma == 0.3);
}

TEST_CASE("config errors name the offending key") {
    CHECK(config_error_field("num_lanes = 1") == "num_lanes");
    CHECK(config_error_field("num_lanes = 9") == "num_lanes");
    CHECK(config_error_field("lane_width = -2") == "lane_width");
    CHECK(config_error_field("missing_prob = 1.5") == "missing_prob");
    CHECK(config_error_field("perception_persistence = -1") == "perception_persistence");
    CHECK(config_error_field("chi2_probability = 1") == "chi2_probability");
    CHECK(config_error_field("learning_rate = 0") == "learning_rate");
    CHECK(config_error_field("duration = abc") == "duration");
    CHECK(config_error_field("no_such_key = 1") == "no_such_key");
    CHECK(config_error_field("num_lanes 4") == "line 1");
    CHECK_THROWS_AS(load_config("/nonexistent/egolane.cfg"), ConfigError);
}

TEST_CASE("format_config round trips") {
    auto c = parse_config("num_lanes = 6\nmissing_prob = 0.37\nperception_persistence = 0.8\nlearning_rate = 0.05");
    c.scenario.lane_width = 3.1415926535897931;
    const auto back = parse_config(format_config(c));
    CHECK(back.scenario == c.scenario);
    CHECK(back.tracker == c.tracker);
    CHECK(back.chi2_probability == c.chi2_probability);
    CHECK(back.boosting.rounds == c.boosting.rounds);
    CHECK(back.boosting.learning_rate == c.boosting.learning_rate);
    CHECK(back.training_stride == c.training_stride);
    CHECK(format_config(back) == format_config(c));

    const auto path = scratch_dir("cfg") / "pipeline.cfg";
    write_text(path, format_config(c));
    CHECK(load_config(path).scenario == c.scenario);
}

TEST_CASE("sequence JSONL round trip") {
    const auto config = testing::small_pipeline(2.0);
    for (const auto& ls : simulate_dataset(config, 6, 4)) {
        const auto text = sequence_to_jsonl(ls, config);
        PipelineConfig restored_config;
        const auto back = sequence_from_jsonl(text, &restored_config);
        check_same(ls, back);
        CHECK(restored_config.scenario == config.scenario);
        CHECK(sequence_to_jsonl(back, restored_config) == text);

        const auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
        CHECK(header.at("scenario_id") == ls.scenario_id());
        CHECK(header.at("frames") == ls.length());
    }
    CHECK_THROWS_AS(sequence_from_jsonl(""), SchemaError);
    CHECK_THROWS_AS(sequence_from_jsonl("{not json"), SchemaError);
}

TEST_CASE("truncated sequence files are rejected") {
    const auto config = testing::small_pipeline(1.0);
    const auto ls = make_labeled_sequence(config, 0, 1);
    auto text = sequence_to_jsonl(ls, config);
    text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    CHECK_THROWS_AS(sequence_from_jsonl(text), SchemaError);
}

TEST_CASE("dataset directory round trip") {
    Dataset ds;
    ds.config = testing::small_pipeline(1.5);
    ds.sequences = simulate_dataset(ds.config, 5, 8);
    const auto dir = scratch_dir("dataset");
    write_dataset(dir, ds);
    CHECK(fs::exists(dir / "scenario_00000.jsonl"));
    CHECK(fs::exists(dir / "scenario_00004.jsonl"));
    const auto back = read_dataset(dir);
    REQUIRE(back.sequences.size() == 5);
    CHECK(back.config.scenario == ds.config.scenario);
    for (std::size_t i = 0; i < 5; ++i) {
        check_same(ds.sequences[i], back.sequences[i]);
    }
    CHECK_THROWS_AS(read_dataset(scratch_dir("missing")), SchemaError);
}

TEST_CASE("model JSON round trip") {
    const auto config = testing::small_pipeline(3.0);
    const auto data = testing::valid_only(simulate_dataset(config, 12, 6));
    const auto model = train_model(data, config);
    const auto text = model_to_json(model);
    const auto back = model_from_json(text);
    CHECK(back.base_score == model.base_score);
    CHECK(back.learning_rate == model.learning_rate);
    CHECK(back.trees.size() == model.trees.size());
    CHECK(back.schema_hash == model.schema_hash);
    CHECK(model_to_json(back) == text);
    for (const auto& ls : data) {
        FeatureAccumulator acc(model.schema);
        for (const auto& f : ls.hypotheses[0].mmq) {
            acc.push(f);
        }
        for (int t = 1; t <= acc.length(); t += 17) {
            CHECK(predict_proba(back, acc.features(t)) == predict_proba(model, acc.features(t)));
        }
    }

    auto j = nlohmann::json::parse(text);
    j["windows"] = {10, 20};
    CHECK_THROWS_AS(model_from_json(j.dump()), SchemaError);
    j = nlohmann::json::parse(text);
    j["trees"][0][0]["left"] = 999;
    CHECK_THROWS_AS(model_from_json(j.dump()), SchemaError);
    j = nlohmann::json::parse(text);
    j["format"] = "other";
    CHECK_THROWS_AS(model_from_json(j.dump()), SchemaError);
    CHECK_THROWS_AS(model_from_json("[]"), SchemaError);
}

TEST_CASE("trigger and front JSON round trip") {
    TriggerParams t;
    t.variant = TriggerVariant::S2;
    t.gamma = Eigen::Vector3d(0.1, -0.7, 0.3333333333333333);
    t.horizon = 900;
    const auto back = trigger_from_json(trigger_to_json(t));
    CHECK(back.variant == t.variant);
    CHECK(back.gamma == t.gamma);
    CHECK(back.horizon == t.horizon);
    CHECK_THROWS_AS(trigger_from_json(R"({"variant":"s4","gamma":[2,0],"horizon":1200})"), ConfigError);

    ParetoFront front;
    for (int i = 0; i < 3; ++i) {
        CostPoint p;
        p.c_av = 0.1 * i;
        p.c_ac = 0.3 - 0.1 * i;
        p.c_ea = 0.5;
        p.trigger.gamma = Eigen::Vector2d(0.2 * i, -0.1);
        front.points.push_back(p);
    }
    front.hypervolume = 0.61;
    std::size_t selected = 0;
    const auto restored = front_from_json(front_to_json(front, 2), &selected);
    CHECK(selected == 2);
    CHECK(restored.hypervolume == 0.61);
    REQUIRE(restored.points.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(restored.points[i].c_av == front.points[i].c_av);
        CHECK(restored.points[i].c_ac == front.points[i].c_ac);
        CHECK(restored.points[i].c_ea == front.points[i].c_ea);
        CHECK(restored.points[i].trigger.gamma == front.points[i].trigger.gamma);
    }
    CHECK_THROWS_AS(front_from_json(front_to_json(front, 3)), SchemaError);
}

TEST_CASE("report JSON and curve CSV") {
    ComparisonReport report;
    for (auto v : kTriggerVariants) {
        MethodRow row;
        row.method = std::string(to_string(v));
        row.trigger.variant = v;
        row.trigger.gamma = Eigen::VectorXd::Zero(gamma_size(v));
        row.metrics.earliness_s = 1.25;
        row.metrics.availability = 0.75;
        row.metrics.accuracy = 1.0;
        row.hypervolume = 0.5;
        report.rows.push_back(row);
    }
    report.curve.t = {1, 2};
    report.curve.accuracy = {0.5, 0.75};
    report.curve.trigger_fraction = {0.0, 0.25};
    const auto j = nlohmann::json::parse(report_to_json(report));
    REQUIRE(j.at("methods").size() == 4);
    const auto& row = j.at("methods")[3];
    CHECK(row.at("method") == "s4");
    for (const char* key : {"earliness_s", "availability", "accuracy", "hypervolume", "test_hypervolume"}) {
        CHECK(row.contains(key));
    }
    CHECK(row.at("earliness_s") == 1.25);
    CHECK(curves_to_csv(report.curve) == "t,no_trigger_accuracy,cumulative_trigger_fraction\n1,0.5,0\n2,0.75,0.25\n");

    EvalReport eval;
    eval.metrics.availability = 0.5;
    eval.hypervolume = 0.4;
    const auto e = nlohmann::json::parse(report_to_json(eval, "s3"));
    CHECK(e.dump().find("\"s3\"") != std::string::npos);
}

#include "egolane/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "egolane/errors.hpp"

namespace egolane {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw SchemaError(std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("field '") + key + "': " + e.what());
    }
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
}

json to_json(const ScenarioConfig& c) {
    return {{"num_lanes", c.num_lanes},
            {"lane_width", c.lane_width},
            {"duration", c.duration},
            {"sample_rate", c.sample_rate},
            {"point_noise_sigma", c.point_noise_sigma},
            {"type_confusion_prob", c.type_confusion_prob},
            {"gnss_bias_range", c.gnss_bias_range},
            {"gnss_noise_sigma", c.gnss_noise_sigma},
            {"missing_prob", c.missing_prob},
            {"perception_persistence", c.perception_persistence},
            {"map_extent", c.map_extent},
            {"ego_speed", c.ego_speed},
            {"speed_noise_sigma", c.speed_noise_sigma},
            {"yaw_rate_noise_sigma", c.yaw_rate_noise_sigma},
            {"seed", c.seed}};
}

ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig c;
    c.num_lanes = field<int>(j, "num_lanes");
    c.lane_width = field<double>(j, "lane_width");
    c.duration = field<double>(j, "duration");
    c.sample_rate = field<double>(j, "sample_rate");
    c.point_noise_sigma = field<double>(j, "point_noise_sigma");
    c.type_confusion_prob = field<double>(j, "type_confusion_prob");
    c.gnss_bias_range = field<double>(j, "gnss_bias_range");
    c.gnss_noise_sigma = field<double>(j, "gnss_noise_sigma");
    c.missing_prob = field<double>(j, "missing_prob");
    c.perception_persistence = field<double>(j, "perception_persistence");
    c.map_extent = field<double>(j, "map_extent");
    c.ego_speed = field<double>(j, "ego_speed");
    c.speed_noise_sigma = field<double>(j, "speed_noise_sigma");
    c.yaw_rate_noise_sigma = field<double>(j, "yaw_rate_noise_sigma");
    c.seed = field<std::uint64_t>(j, "seed");
    return c;
}

json to_json(const MapModel& map) {
    json boundaries = json::array();
    for (std::size_t i = 0; i < map.boundaries.size(); ++i) {
        boundaries.push_back({{"stations", map.boundaries[i].stations},
                              {"laterals", map.boundaries[i].laterals},
                              {"type", std::string(to_string(map.boundary_types[i]))}});
    }
    return {{"boundaries", boundaries}, {"map_extent", map.map_extent}, {"lane_width", map.lane_width}};
}

MapModel map_from_json(const json& j) {
    MapModel map;
    map.map_extent = field<double>(j, "map_extent");
    map.lane_width = field<double>(j, "lane_width");
    for (const auto& b : field<json>(j, "boundaries")) {
        map.boundaries.push_back(
            Polyline{field<std::vector<double>>(b, "stations"), field<std::vector<double>>(b, "laterals")});
        map.boundary_types.push_back(marking_type_from_string(field<std::string>(b, "type")));
    }
    return map;
}

json to_json(const PerceivedMarking& m) {
    json j = {{"points", nullptr}, {"type", nullptr}};
    if (m.points) {
        json pts = json::array();
        for (const auto& p : *m.points) {
            pts.push_back({p.x(), p.y()});
        }
        j["points"] = std::move(pts);
    }
    if (m.type) {
        j["type"] = std::string(to_string(*m.type));
    }
    return j;
}

PerceivedMarking marking_from_json(const json& j) {
    PerceivedMarking m;
    if (const auto& pts = j.at("points"); !pts.is_null()) {
        std::vector<Eigen::Vector2d> points;
        for (const auto& p : pts) {
            points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        }
        m.points = std::move(points);
    }
    if (const auto& type = j.at("type"); !type.is_null()) {
        m.type = marking_type_from_string(type.get<std::string>());
    }
    return m;
}

json mmq_to_json(const MmqFrame& frame) {
    json values = json::array();
    for (const auto& v : frame.channels) {
        values.push_back(v ? json(*v) : json(nullptr));
    }
    return values;
}

json gamma_to_json(const Eigen::VectorXd& gamma) {
    return std::vector<double>(gamma.data(), gamma.data() + gamma.size());
}

Eigen::VectorXd gamma_from_json(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json trigger_json(const TriggerParams& t) {
    return {{"variant", std::string(to_string(t.variant))}, {"gamma", gamma_to_json(t.gamma)}, {"horizon", t.horizon}};
}

TriggerParams trigger_from(const json& j) {
    TriggerParams t;
    t.variant = trigger_variant_from_string(field<std::string>(j, "variant"));
    t.gamma = gamma_from_json(field<json>(j, "gamma"));
    t.horizon = field<int>(j, "horizon");
    validate(t);
    return t;
}

json tree_to_json(const RegressionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) {
            nodes.push_back({{"leaf", n.value}});
        } else {
            nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
        }
    }
    return nodes;
}

RegressionTree tree_from_json(const json& j, std::size_t num_features) {
    RegressionTree tree;
    for (const auto& n : j) {
        TreeNode node;
        if (n.contains("leaf")) {
            node.value = field<double>(n, "leaf");
        } else {
            node.feature = field<int>(n, "feature");
            node.threshold = field<double>(n, "threshold");
            node.left = field<int>(n, "left");
            node.right = field<int>(n, "right");
        }
        tree.nodes.push_back(node);
    }
    const auto count = static_cast<int>(tree.nodes.size());
    if (count == 0) {
        throw SchemaError("tree without nodes");
    }
    for (const auto& node : tree.nodes) {
        if (!node.is_leaf() && (node.feature >= static_cast<int>(num_features) || node.left <= 0 || node.right <= 0 ||
                                node.left >= count || node.right >= count)) {
            throw SchemaError("tree node references out of range");
        }
    }
    return tree;
}

std::string dump_line(const json& j) { return j.dump() + "\n"; }

} // namespace

std::string sequence_to_jsonl(const LabeledSequence& ls, const PipelineConfig& config) {
    const auto& seq = ls.sequence;
    json hyps = json::array();
    for (std::size_t i = 0; i < ls.hypotheses.size(); ++i) {
        hyps.push_back({{"id", ls.hypotheses[i].id},
                        {"lane", ls.hypotheses[i].lane_index},
                        {"label", ls.labels[i]},
                        {"length", ls.hypotheses[i].length()}});
    }
    json header = {{"scenario_id", seq.scenario_id},
                   {"pipeline", format_config(config)},
                   {"scenario", to_json(seq.config)},
                   {"map", to_json(seq.map)},
                   {"truth_lane", seq.truth_lane},
                   {"frames", seq.frames.size()},
                   {"hypotheses", hyps},
                   {"valid", ls.valid}};
    std::string out = dump_line(header);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        const auto& f = seq.frames[k];
        json perceived = json::object();
        for (auto m : kMarkings) {
            perceived[std::string(to_string(m))] = to_json(f.perceived[static_cast<std::size_t>(m)]);
        }
        json mmq = json::array();
        json lateral = json::array();
        for (const auto& h : ls.hypotheses) {
            const bool active = static_cast<int>(k) < h.length();
            mmq.push_back(active ? mmq_to_json(h.mmq[k]) : json(nullptr));
            lateral.push_back(active ? json(h.global_lateral[k]) : json(nullptr));
        }
        const auto& pose = seq.truth_pose[k];
        json line = {{"t", f.t},
                     {"truth", {pose.station, pose.lateral, pose.heading}},
                     {"gnss", {f.gnss.station, f.gnss.lateral}},
                     {"odometry", {f.odometry.speed, f.odometry.yaw_rate}},
                     {"perceived", perceived},
                     {"mmq", mmq},
                     {"hyp_lateral", lateral}};
        out += dump_line(line);
    }
    return out;
}

LabeledSequence sequence_from_jsonl(const std::string& text, PipelineConfig* config_out) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError("empty sequence file");
    }
    const json header = parse_json(line);
    const PipelineConfig config = parse_config(field<std::string>(header, "pipeline"));

    SequenceRecord seq;
    seq.scenario_id = field<int>(header, "scenario_id");
    seq.config = scenario_from_json(field<json>(header, "scenario"));
    seq.map = map_from_json(field<json>(header, "map"));
    seq.truth_lane = field<int>(header, "truth_lane");
    const auto expected = field<std::size_t>(header, "frames");

    try {
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            const json j = parse_json(line);
            SensorFrame f;
            f.t = field<int>(j, "t");
            const auto& truth = j.at("truth");
            seq.truth_pose.push_back(Pose{truth.at(0).get<double>(), truth.at(1).get<double>(),
                                          truth.at(2).get<double>()});
            f.gnss = GnssFix{j.at("gnss").at(0).get<double>(), j.at("gnss").at(1).get<double>()};
            f.odometry = Odometry{j.at("odometry").at(0).get<double>(), j.at("odometry").at(1).get<double>()};
            const auto& perceived = j.at("perceived");
            for (auto m : kMarkings) {
                f.perceived[static_cast<std::size_t>(m)] = marking_from_json(perceived.at(std::string(to_string(m))));
            }
            seq.frames.push_back(std::move(f));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed frame: ") + e.what());
    }
    if (seq.frames.size() != expected) {
        throw SchemaError("frame count " + std::to_string(seq.frames.size()) + " does not match header " +
                          std::to_string(expected));
    }
    if (config_out != nullptr) {
        *config_out = config;
    }
    auto series = build_mmq_series(seq, config.tracker, config.chi2_probability);
    return label_sequence(std::move(seq), std::move(series));
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    std::filesystem::create_directories(dir);
    for (const auto& ls : dataset.sequences) {
        char name[32];
        std::snprintf(name, sizeof(name), "scenario_%05d.jsonl", ls.scenario_id());
        write_text(dir / name, sequence_to_jsonl(ls, dataset.config));
    }
}

Dataset read_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw SchemaError("dataset directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw SchemaError("no .jsonl sequences in " + dir.string());
    }
    Dataset dataset;
    for (const auto& file : files) {
        dataset.sequences.push_back(sequence_from_jsonl(read_text(file), &dataset.config));
    }
    return dataset;
}

std::string model_to_json(const BoostedModel& model) {
    json trees = json::array();
    for (const auto& tree : model.trees) {
        trees.push_back(tree_to_json(tree));
    }
    json j = {{"format", "egolane-gbdt-1"},
              {"base_score", model.base_score},
              {"learning_rate", model.learning_rate},
              {"rounds", model.params.rounds},
              {"max_depth", model.params.max_depth},
              {"min_samples_leaf", model.params.min_samples_leaf},
              {"schema_hash", model.schema_hash},
              {"num_features", model.num_features},
              {"windows", model.schema.windows},
              {"training_loss", model.training_loss},
              {"trees", trees}};
    return j.dump(1) + "\n";
}

BoostedModel model_from_json(const std::string& text) {
    const json j = parse_json(text);
    if (field<std::string>(j, "format") != "egolane-gbdt-1") {
        throw SchemaError("unsupported model format");
    }
    BoostedModel model;
    model.base_score = field<double>(j, "base_score");
    model.learning_rate = field<double>(j, "learning_rate");
    model.params.rounds = field<int>(j, "rounds");
    model.params.max_depth = field<int>(j, "max_depth");
    model.params.min_samples_leaf = field<int>(j, "min_samples_leaf");
    model.params.learning_rate = model.learning_rate;
    model.schema_hash = field<std::uint64_t>(j, "schema_hash");
    model.num_features = field<std::size_t>(j, "num_features");
    model.schema.windows = field<std::vector<int>>(j, "windows");
    model.training_loss = field<std::vector<double>>(j, "training_loss");
    if (model.schema.hash() != model.schema_hash || model.schema.size() != model.num_features) {
        throw SchemaError("model schema hash does not match its window list");
    }
    for (const auto& t : field<json>(j, "trees")) {
        model.trees.push_back(tree_from_json(t, model.num_features));
    }
    return model;
}

void save_model(const std::filesystem::path& path, const BoostedModel& model) { write_text(path, model_to_json(model)); }

BoostedModel load_model(const std::filesystem::path& path) { return model_from_json(read_text(path)); }

std::string trigger_to_json(const TriggerParams& trigger) { return trigger_json(trigger).dump() + "\n"; }

TriggerParams trigger_from_json(const std::string& text) { return trigger_from(parse_json(text)); }

std::string front_to_json(const ParetoFront& front, std::size_t selected_index) {
    json points = json::array();
    for (const auto& p : front.points) {
        json entry = trigger_json(p.trigger);
        entry["c_av"] = p.c_av;
        entry["c_ac"] = p.c_ac;
        entry["c_ea"] = p.c_ea;
        points.push_back(std::move(entry));
    }
    json j = {{"points", points},
              {"reference", {front.reference(0), front.reference(1)}},
              {"hypervolume", front.hypervolume},
              {"selected_index", selected_index}};
    return j.dump(1) + "\n";
}

ParetoFront front_from_json(const std::string& text, std::size_t* selected_index) {
    const json j = parse_json(text);
    ParetoFront front;
    for (const auto& p : field<json>(j, "points")) {
        front.points.push_back(
            CostPoint{field<double>(p, "c_av"), field<double>(p, "c_ac"), field<double>(p, "c_ea"), trigger_from(p)});
    }
    const auto ref = field<std::vector<double>>(j, "reference");
    if (ref.size() != 2) {
        throw SchemaError("reference must have two coordinates");
    }
    front.reference = Objectives(ref[0], ref[1]);
    front.hypervolume = field<double>(j, "hypervolume");
    const auto index = field<std::size_t>(j, "selected_index");
    if (!front.points.empty() && index >= front.points.size()) {
        throw SchemaError("selected_index out of range");
    }
    if (selected_index != nullptr) {
        *selected_index = index;
    }
    return front;
}

namespace {

json metrics_row(const std::string& method, const EvalMetrics& m, double hv) {
    return {{"method", method},
            {"earliness_s", m.earliness_s},
            {"availability", m.availability},
            {"accuracy", m.accuracy},
            {"accuracy_vacuous", m.accuracy_vacuous},
            {"hypervolume", hv},
            {"predicted", m.predicted},
            {"total", m.total}};
}

} // namespace

std::string report_to_json(const ComparisonReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        json r = metrics_row(row.method, row.metrics, row.hypervolume);
        r["test_hypervolume"] = row.test_hypervolume;
        r["trigger"] = trigger_json(row.trigger);
        rows.push_back(std::move(r));
    }
    json j = {{"methods", rows}, {"curve_method", report.curve_method}};
    return j.dump(1) + "\n";
}

std::string report_to_json(const EvalReport& report, const std::string& method) {
    json j = {{"methods", json::array({metrics_row(method, report.metrics, report.hypervolume)})}};
    return j.dump(1) + "\n";
}

std::string curves_to_csv(const NoTriggerCurve& curve) {
    std::ostringstream out;
    out.precision(10);
    out << "t,no_trigger_accuracy,cumulative_trigger_fraction\n";
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
        out << curve.t[i] << ',' << curve.accuracy[i] << ',' << curve.trigger_fraction[i] << '\n';
    }
    return out.str();
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw SchemaError("cannot write " + path.string());
    }
    out << text;
}

} // namespace egolane

#include "egolane/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "egolane/errors.hpp"

namespace egolane {

namespace {

std::string_view trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(std::string(key), "cannot parse '" + std::string(value) + "'");
    }
    return out;
}

using Setter = std::function<void(PipelineConfig&, std::string_view key, std::string_view value)>;

template <typename Member>
Setter scenario_field(Member ScenarioConfig::*field) {
    return [field](PipelineConfig& c, std::string_view key, std::string_view value) {
        c.scenario.*field = parse_number<Member>(key, value);
    };
}

template <typename Member>
Setter tracker_field(Member TrackerParams::*field) {
    return [field](PipelineConfig& c, std::string_view key, std::string_view value) {
        c.tracker.*field = parse_number<Member>(key, value);
    };
}

template <typename Member>
Setter boosting_field(Member BoostingParams::*field) {
    return [field](PipelineConfig& c, std::string_view key, std::string_view value) {
        c.boosting.*field = parse_number<Member>(key, value);
    };
}

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"num_lanes", scenario_field(&ScenarioConfig::num_lanes)},
        {"lane_width", scenario_field(&ScenarioConfig::lane_width)},
        {"duration", scenario_field(&ScenarioConfig::duration)},
        {"sample_rate", scenario_field(&ScenarioConfig::sample_rate)},
        {"point_noise_sigma", scenario_field(&ScenarioConfig::point_noise_sigma)},
        {"type_confusion_prob", scenario_field(&ScenarioConfig::type_confusion_prob)},
        {"gnss_bias_range", scenario_field(&ScenarioConfig::gnss_bias_range)},
        {"gnss_noise_sigma", scenario_field(&ScenarioConfig::gnss_noise_sigma)},
        {"missing_prob", scenario_field(&ScenarioConfig::missing_prob)},
        {"perception_persistence", scenario_field(&ScenarioConfig::perception_persistence)},
        {"map_extent", scenario_field(&ScenarioConfig::map_extent)},
        {"ego_speed", scenario_field(&ScenarioConfig::ego_speed)},
        {"speed_noise_sigma", scenario_field(&ScenarioConfig::speed_noise_sigma)},
        {"yaw_rate_noise_sigma", scenario_field(&ScenarioConfig::yaw_rate_noise_sigma)},
        {"seed", scenario_field(&ScenarioConfig::seed)},
        {"gate", tracker_field(&TrackerParams::gate)},
        {"r_floor", tracker_field(&TrackerParams::r_floor)},
        {"q_lateral", tracker_field(&TrackerParams::q_lateral)},
        {"q_heading", tracker_field(&TrackerParams::q_heading)},
        {"p0_lateral", tracker_field(&TrackerParams::p0_lateral)},
        {"p0_heading", tracker_field(&TrackerParams::p0_heading)},
        {"measurement_sigma", tracker_field(&TrackerParams::measurement_sigma)},
        {"max_hypotheses", tracker_field(&TrackerParams::max_hypotheses)},
        {"chi2_probability",
         [](PipelineConfig& c, std::string_view key, std::string_view value) {
             c.chi2_probability = parse_number<double>(key, value);
         }},
        {"boosting_rounds", boosting_field(&BoostingParams::rounds)},
        {"boosting_depth", boosting_field(&BoostingParams::max_depth)},
        {"learning_rate", boosting_field(&BoostingParams::learning_rate)},
        {"training_stride",
         [](PipelineConfig& c, std::string_view key, std::string_view value) {
             c.training_stride = parse_number<int>(key, value);
         }},
    };
    return table;
}

} // namespace

void validate(const PipelineConfig& config) {
    validate(config.scenario);
    validate(config.tracker);
    if (!(config.chi2_probability > 0.0 && config.chi2_probability < 1.0)) {
        throw ConfigError("chi2_probability", "must lie in (0, 1)");
    }
    if (config.boosting.rounds < 0) {
        throw ConfigError("boosting_rounds", "must be non-negative");
    }
    if (config.boosting.max_depth < 1) {
        throw ConfigError("boosting_depth", "must be at least 1");
    }
    if (!(config.boosting.learning_rate > 0.0)) {
        throw ConfigError("learning_rate", "must be positive");
    }
    if (config.training_stride < 1) {
        throw ConfigError("training_stride", "must be at least 1");
    }
}

PipelineConfig parse_config(std::string_view text) {
    PipelineConfig config;
    bool bias_set = false;
    bool sigma_set = false;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        auto line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ConfigError(std::string(key), "unknown configuration key");
        }
        it->second(config, key, value);
        bias_set |= key == "gnss_bias_range";
        sigma_set |= key == "measurement_sigma";
    }
    if (!bias_set) {
        config.scenario.gnss_bias_range = 1.5 * config.scenario.lane_width;
    }
    if (!sigma_set) {
        config.tracker.measurement_sigma = config.scenario.point_noise_sigma;
    }
    validate(config);
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config", "cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string format_config(const PipelineConfig& c) {
    std::ostringstream out;
    out.precision(17);
    const auto& s = c.scenario;
    const auto& t = c.tracker;
    out << "num_lanes = " << s.num_lanes << "\n"
        << "lane_width = " << s.lane_width << "\n"
        << "duration = " << s.duration << "\n"
        << "sample_rate = " << s.sample_rate << "\n"
        << "point_noise_sigma = " << s.point_noise_sigma << "\n"
        << "type_confusion_prob = " << s.type_confusion_prob << "\n"
        << "gnss_bias_range = " << s.gnss_bias_range << "\n"
        << "gnss_noise_sigma = " << s.gnss_noise_sigma << "\n"
        << "missing_prob = " << s.missing_prob << "\n"
        << "perception_persistence = " << s.perception_persistence << "\n"
        << "map_extent = " << s.map_extent << "\n"
        << "ego_speed = " << s.ego_speed << "\n"
        << "speed_noise_sigma = " << s.speed_noise_sigma << "\n"
        << "yaw_rate_noise_sigma = " << s.yaw_rate_noise_sigma << "\n"
        << "seed = " << s.seed << "\n"
        << "gate = " << t.gate << "\n"
        << "r_floor = " << t.r_floor << "\n"
        << "q_lateral = " << t.q_lateral << "\n"
        << "q_heading = " << t.q_heading << "\n"
        << "p0_lateral = " << t.p0_lateral << "\n"
        << "p0_heading = " << t.p0_heading << "\n"
        << "measurement_sigma = " << t.measurement_sigma << "\n"
        << "max_hypotheses = " << t.max_hypotheses << "\n"
        << "chi2_probability = " << c.chi2_probability << "\n"
        << "boosting_rounds = " << c.boosting.rounds << "\n"
        << "boosting_depth = " << c.boosting.max_depth << "\n"
        << "learning_rate = " << c.boosting.learning_rate << "\n"
        << "training_stride = " << c.training_stride << "\n";
    return out.str();
}

} // namespace egolane

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "egolane/errors.hpp"
#include "egolane/io.hpp"
#include "egolane/sim.hpp"
#include "fixtures.hpp"

using namespace egolane;

TEST_CASE("generate_scenario is deterministic for a fixed seed") {
    ScenarioConfig c;
    c.seed = 1234;
    const auto a = generate_scenario(c, 7);
    const auto b = generate_scenario(c, 7);
    CHECK(a == b);

    PipelineConfig pc;
    pc.scenario = c;
    const auto la = label_sequence(a, build_mmq_series(a));
    const auto lb = label_sequence(b, build_mmq_series(b));
    CHECK(sequence_to_jsonl(la, pc) == sequence_to_jsonl(lb, pc));

    c.seed = 1235;
    CHECK_FALSE(generate_scenario(c, 7) == a);
}

TEST_CASE("30 s at 40 Hz gives 1200 frames") {
    ScenarioConfig c;
    const auto seq = generate_scenario(c);
    CHECK(seq.frames.size() == 1200);
    CHECK(seq.truth_pose.size() == 1200);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        CHECK(seq.frames[k].t == static_cast<int>(k));
    }
}

TEST_CASE("frame count never exceeds duration times rate") {
    for (double extent : {50.0, 200.0, 1000.0, 5000.0}) {
        ScenarioConfig c;
        c.map_extent = extent;
        c.duration = 12.5;
        const auto seq = generate_scenario(c);
        CHECK(seq.frames.size() <= 500);
        CHECK(seq.truth_pose.back().station <= extent);
    }
    ScenarioConfig c;
    c.map_extent = 50.0;
    const auto seq = generate_scenario(c);
    CHECK(seq.frames.size() < 1200);
}

TEST_CASE("zero GNSS bias and noise reproduce the truth lateral") {
    auto c = testing::noiseless_scenario();
    c.seed = 99;
    const auto seq = generate_scenario(c);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        CHECK(seq.frames[k].gnss.lateral == seq.truth_pose[k].lateral);
        CHECK(seq.frames[k].gnss.station == seq.truth_pose[k].station);
    }
}

TEST_CASE("GNSS bias is constant within a scenario and bounded") {
    ScenarioConfig c;
    c.gnss_noise_sigma = 0.0;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        c.seed = s;
        const auto seq = generate_scenario(c);
        const double bias = seq.frames[0].gnss.lateral - seq.truth_pose[0].lateral;
        CHECK(std::abs(bias) <= c.gnss_bias_range);
        for (std::size_t k = 0; k < seq.frames.size(); k += 97) {
            CHECK(seq.frames[k].gnss.lateral - seq.truth_pose[k].lateral == doctest::Approx(bias).epsilon(1e-12));
        }
    }
}

TEST_CASE("ego stays inside its lane with bounded drift") {
    ScenarioConfig c;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        c.seed = s;
        const auto seq = generate_scenario(c);
        REQUIRE(seq.truth_lane >= 0);
        REQUIRE(seq.truth_lane < c.num_lanes);
        const double center = seq.map.lane_center(seq.truth_lane, 0.0);
        for (const auto& pose : seq.truth_pose) {
            CHECK(std::abs(pose.lateral - center) <= kDriftAmplitude + 1e-12);
            CHECK(lane_of(seq.map, pose.lateral) == seq.truth_lane);
        }
    }
}

TEST_CASE("noise-free perception lies on the map") {
    const auto c = testing::noiseless_scenario();
    const auto seq = generate_scenario(c);
    for (std::size_t k = 0; k < seq.frames.size(); k += 13) {
        const auto& pose = seq.truth_pose[k];
        for (auto m : kMarkings) {
            const int boundary = seq.truth_lane + boundary_offset(m);
            const auto& slot = seq.frames[k].perceived[static_cast<std::size_t>(m)];
            if (!seq.map.has_boundary(boundary)) {
                CHECK_FALSE(slot.points.has_value());
                CHECK_FALSE(slot.type.has_value());
                continue;
            }
            REQUIRE(slot.points.has_value());
            REQUIRE(slot.points->size() == kLookaheads.size());
            const double lateral = *seq.map.boundary_lateral(boundary, pose.station);
            for (std::size_t i = 0; i < kLookaheads.size(); ++i) {
                CHECK((*slot.points)[i].x() == kLookaheads[i]);
                CHECK((*slot.points)[i].y() - vehicle_frame_offset(lateral, pose, kLookaheads[i]) == 0.0);
            }
            REQUIRE(slot.type.has_value());
            CHECK(*slot.type == seq.map.boundary_types[static_cast<std::size_t>(boundary)]);
        }
    }
}

TEST_CASE("missing_prob 1 removes every perceived channel") {
    ScenarioConfig c;
    c.missing_prob = 1.0;
    c.duration = 2.0;
    for (double persistence : {0.0, 1.0}) {
        c.perception_persistence = persistence;
        const auto seq = generate_scenario(c);
        for (const auto& f : seq.frames) {
            for (const auto& slot : f.perceived) {
                CHECK_FALSE(slot.points.has_value());
                CHECK_FALSE(slot.type.has_value());
            }
        }
    }
}

TEST_CASE("off-map poses produce an all-missing frame") {
    ScenarioConfig c;
    Rng rng(3);
    const auto map = build_map(c, rng);
    const Pose off{c.map_extent + 1.0, map.lane_center(1, 0.0), 0.0};
    const auto p = perceive(off, map, c, rng);
    for (const auto& slot : p) {
        CHECK_FALSE(slot.points.has_value());
        CHECK_FALSE(slot.type.has_value());
    }
}

TEST_CASE("lateral point noise has the configured standard deviation") {
    auto c = testing::noiseless_scenario();
    c.point_noise_sigma = 0.2;
    Rng rng(11);
    const auto map = build_map(c, rng);
    const Pose pose{100.0, map.lane_center(1, 100.0) + 0.1, 0.002};
    std::vector<double> residuals;
    while (residuals.size() < 10000) {
        const auto p = perceive(pose, map, c, rng);
        for (auto m : kMarkings) {
            const auto& slot = p[static_cast<std::size_t>(m)];
            const double lateral = *map.boundary_lateral(1 + boundary_offset(m), pose.station);
            for (const auto& pt : *slot.points) {
                residuals.push_back(pt.y() - vehicle_frame_offset(lateral, pose, pt.x()));
            }
        }
    }
    const double n = static_cast<double>(residuals.size());
    const double mean = std::accumulate(residuals.begin(), residuals.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : residuals) {
        ss += (r - mean) * (r - mean);
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    CHECK(sd >= 0.19);
    CHECK(sd <= 0.21);
}

namespace {

double missing_fraction(const ScenarioConfig& c, int frames_wanted) {
    long missing = 0;
    long total = 0;
    int id = 0;
    while (total < 8L * frames_wanted) {
        auto cfg = c;
        cfg.seed = scenario_seed(c.seed, id);
        const auto seq = generate_scenario(cfg, id++);
        for (const auto& f : seq.frames) {
            for (auto m : kMarkings) {
                if (!seq.map.has_boundary(seq.truth_lane + boundary_offset(m))) {
                    continue;
                }
                const auto& slot = f.perceived[static_cast<std::size_t>(m)];
                missing += (slot.points ? 0 : 1) + (slot.type ? 0 : 1);
                total += 2;
            }
        }
    }
    return static_cast<double>(missing) / static_cast<double>(total);
}

} // namespace

TEST_CASE("missing channel fraction matches missing_prob") {
    ScenarioConfig c;
    c.perception_persistence = 0.0;
    for (double p : {0.1, 0.3, 0.5}) {
        c.missing_prob = p;
        CHECK(std::abs(missing_fraction(c, 10000) - p) <= 0.02);
    }
    SUBCASE("persistence keeps the per-frame rate") {
        c.perception_persistence = 0.5;
        c.missing_prob = 0.3;
        CHECK(std::abs(missing_fraction(c, 60000) - 0.3) <= 0.02);
    }
}

TEST_CASE("type confusion picks a different type") {
    auto c = testing::noiseless_scenario();
    c.type_confusion_prob = 1.0;
    c.duration = 3.0;
    const auto seq = generate_scenario(c);
    for (const auto& f : seq.frames) {
        for (auto m : kMarkings) {
            const int boundary = seq.truth_lane + boundary_offset(m);
            if (seq.map.has_boundary(boundary)) {
                const auto& type = f.perceived[static_cast<std::size_t>(m)].type;
                REQUIRE(type.has_value());
                CHECK(*type != seq.map.boundary_types[static_cast<std::size_t>(boundary)]);
            }
        }
    }
}

TEST_CASE("persistent perception errors are correlated in time") {
    ScenarioConfig c;
    c.missing_prob = 0.3;
    auto switches = [&](double persistence) {
        c.perception_persistence = persistence;
        const auto seq = generate_scenario(c);
        int changes = 0;
        for (std::size_t k = 1; k < seq.frames.size(); ++k) {
            changes += seq.frames[k].perceived[0].points.has_value() !=
                       seq.frames[k - 1].perceived[0].points.has_value();
        }
        return changes;
    };
    CHECK(switches(1.0) * 4 < switches(0.0));
}

TEST_CASE("map layout") {
    ScenarioConfig c;
    c.num_lanes = 5;
    Rng rng(5);
    const auto map = build_map(c, rng);
    REQUIRE(map.boundaries.size() == 6);
    int distinct = 0;
    for (std::size_t j = 0; j < map.boundaries.size(); ++j) {
        if (j > 0) {
            CHECK(*map.boundary_lateral(static_cast<int>(j), 10.0) - *map.boundary_lateral(static_cast<int>(j) - 1, 10.0) ==
                  doctest::Approx(c.lane_width));
        }
        const auto t = map.boundary_types[j];
        distinct += t == MarkingType::Double || t == MarkingType::BottsDots;
        const bool outer = j == 0 || j + 1 == map.boundaries.size();
        if (t != MarkingType::Double && t != MarkingType::BottsDots) {
            CHECK(t == (outer ? MarkingType::Solid : MarkingType::Dashed));
        }
    }
    CHECK(distinct == 1);
    CHECK(map.lane_center(2, 0.0) == doctest::Approx(2.5 * c.lane_width));
}

TEST_CASE("invalid configurations name the offending field") {
    auto expect_field = [](ScenarioConfig c, const std::string& field) {
        try {
            generate_scenario(c);
            FAIL("expected ConfigError for " << field);
        } catch (const ConfigError& e) {
            CHECK(e.field() == field);
        }
    };
    ScenarioConfig c;
    c.num_lanes = 1;
    expect_field(c, "num_lanes");
    c = {};
    c.num_lanes = 9;
    expect_field(c, "num_lanes");
    c = {};
    c.lane_width = 0.0;
    expect_field(c, "lane_width");
    c = {};
    c.sample_rate = 50.0;
    expect_field(c, "sample_rate");
    c = {};
    c.missing_prob = 1.5;
    expect_field(c, "missing_prob");
    c = {};
    c.type_confusion_prob = -0.1;
    expect_field(c, "type_confusion_prob");
    c = {};
    c.point_noise_sigma = -1.0;
    expect_field(c, "point_noise_sigma");
    c = {};
    c.perception_persistence = -1.0;
    expect_field(c, "perception_persistence");
}

TEST_CASE("scenario seeds differ across ids") {
    CHECK(scenario_seed(1, 0) != scenario_seed(1, 1));
    CHECK(scenario_seed(1, 0) != scenario_seed(2, 0));
    CHECK(scenario_seed(1, 5) == scenario_seed(1, 5));
}

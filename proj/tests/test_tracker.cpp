#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "egolane/errors.hpp"
#include "egolane/tracker.hpp"
#include "fixtures.hpp"

using namespace egolane;

namespace {

MapModel straight_map(int lanes, double width = 3.5) {
    ScenarioConfig c;
    c.num_lanes = lanes;
    c.lane_width = width;
    Rng rng(1);
    return build_map(c, rng);
}

bool is_spd(const Eigen::Matrix2d& P) {
    return (P - P.transpose()).cwiseAbs().maxCoeff() < 1e-12 && Eigen::LLT<Eigen::Matrix2d>(P).info() == Eigen::Success;
}

Perception perceive_exact(const Pose& pose, const MapModel& map) {
    auto c = testing::noiseless_scenario();
    Rng rng(0);
    return perceive(pose, map, c, rng);
}

} // namespace

TEST_CASE("hypotheses are ordered from the nearest lane") {
    const auto map = straight_map(4);
    const auto hs = generate_hypotheses({10.0, map.lane_center(2, 10.0)}, map, 6);
    REQUIRE(hs.size() == 4);
    CHECK(hs[0].lane_index == 2);
    for (std::size_t i = 0; i < hs.size(); ++i) {
        CHECK(hs[i].id == static_cast<int>(i));
        CHECK(hs[i].active);
        CHECK(hs[i].state.isZero());
        CHECK(hs[i].covariance.isApprox(Eigen::Vector2d(0.25, 0.01).asDiagonal().toDenseMatrix()));
    }
}

TEST_CASE("hypothesis count is truncated at K") {
    CHECK(generate_hypotheses({0.0, 5.0}, straight_map(8), 6).size() == 6);
    CHECK(generate_hypotheses({0.0, 5.0}, straight_map(2), 6).size() == 2);
    CHECK(generate_hypotheses({0.0, 5.0}, straight_map(4), 1).size() == 1);
    CHECK_THROWS_AS(generate_hypotheses({0.0, 5.0}, straight_map(4), 0), PreconditionError);
}

TEST_CASE("equidistant GNSS puts the lower lane first") {
    const auto map = straight_map(4);
    const auto hs = generate_hypotheses({0.0, 2.0 * 3.5}, map, 6);
    CHECK(hs[0].lane_index == 1);
    CHECK(hs[1].lane_index == 2);
}

TEST_CASE("hypothesis lanes are a prefix of lanes sorted by distance") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> lat(-10.0, 35.0);
    for (int lanes = 2; lanes <= 8; ++lanes) {
        const auto map = straight_map(lanes);
        for (int trial = 0; trial < 50; ++trial) {
            const double g = lat(rng);
            const int k = 1 + trial % 6;
            const auto hs = generate_hypotheses({0.0, g}, map, k);
            std::vector<int> all(static_cast<std::size_t>(lanes));
            std::iota(all.begin(), all.end(), 0);
            std::sort(all.begin(), all.end(), [&](int a, int b) {
                const double da = std::abs(g - (a + 0.5) * 3.5);
                const double db = std::abs(g - (b + 0.5) * 3.5);
                return da != db ? da < db : a < b;
            });
            REQUIRE(hs.size() == std::min<std::size_t>(all.size(), static_cast<std::size_t>(k)));
            for (std::size_t i = 0; i < hs.size(); ++i) {
                CHECK(hs[i].lane_index == all[i]);
            }
        }
    }
}

TEST_CASE("predict") {
    Hypothesis h;
    h.covariance = Eigen::Vector2d(0.25, 0.01).asDiagonal();

    SUBCASE("zero odometry keeps the state and inflates the covariance") {
        for (double dt : {0.001, 0.025, 1.0}) {
            const auto out = predict(h, {0.0, 0.0}, dt);
            CHECK(out.state == h.state);
            CHECK(out.covariance(0, 0) > h.covariance(0, 0));
            CHECK(out.covariance(1, 1) > h.covariance(1, 1));
            CHECK(is_spd(out.covariance));
        }
    }
    SUBCASE("zero heading leaves the lateral offset") {
        h.state = State(0.3, 0.0);
        CHECK(predict(h, {30.0, 0.0}, 0.025).state(0) == 0.3);
    }
    SUBCASE("closed form lateral step") {
        h.state = State(0.0, 0.01);
        const auto out = predict(h, {30.0, 0.0}, 0.025);
        CHECK(std::abs(out.state(0) - 30.0 * std::sin(0.01) * 0.025) <= 1e-9);
        CHECK(std::abs(out.state(0) - 7.5e-3) <= 1e-6);
    }
    SUBCASE("yaw rate integrates into heading") {
        const auto out = predict(h, {0.0, 0.2}, 0.5);
        CHECK(out.state(1) == doctest::Approx(0.1));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(predict(h, {1.0, 0.0}, 0.0), PreconditionError);
        h.active = false;
        CHECK_THROWS_AS(predict(h, {1.0, 0.0}, 0.025), StateError);
    }
}

TEST_CASE("association against the true lane") {
    const auto map = straight_map(4);
    const double station = 100.0;
    Hypothesis h;
    h.lane_index = 1;
    h.covariance = Eigen::Vector2d(0.25, 0.01).asDiagonal();

    SUBCASE("perfect alignment") {
        const auto assoc = associate(perceive_exact({station, map.lane_center(1, station), 0.0}, map), map, h, station);
        REQUIRE(assoc.size() == 4);
        for (const auto& a : assoc) {
            CHECK(a.dof == 10);
            CHECK(a.outlier_count == 0);
            CHECK(a.residual.size() == a.dof);
            CHECK(a.residual.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
        }
    }
    SUBCASE("0.5 m lateral error") {
        const auto assoc =
            associate(perceive_exact({station, map.lane_center(1, station) + 0.5, 0.0}, map), map, h, station);
        for (const auto& a : assoc) {
            CHECK(a.dof == 10);
            for (Eigen::Index i = 0; i < a.residual.size(); ++i) {
                CHECK(a.residual(i) == doctest::Approx(-0.5).epsilon(1e-12));
            }
        }
    }
    SUBCASE("a lane width of error exceeds the gate") {
        h.state(0) = 3.5;
        const auto assoc = associate(perceive_exact({station, map.lane_center(1, station), 0.0}, map), map, h, station);
        for (const auto& a : assoc) {
            CHECK(a.dof == 0);
            CHECK(a.outlier_count == 10);
        }
    }
    SUBCASE("innovation covariance is H P H^T + R") {
        TrackerParams params;
        params.measurement_sigma = 0.1;
        h.state = State(0.05, 0.002);
        h.covariance << 0.2, 0.01, 0.01, 0.03;
        const auto assoc =
            associate(perceive_exact({station, map.lane_center(1, station), 0.0}, map), map, h, station, params);
        for (const auto& a : assoc) {
            REQUIRE(a.dof == 10);
            const Eigen::MatrixXd expected =
                a.jacobian * h.covariance * a.jacobian.transpose() + Eigen::MatrixXd::Identity(10, 10) * 0.01;
            CHECK((a.innovation_cov - expected).cwiseAbs().maxCoeff() < 1e-14);
            CHECK((a.innovation_cov.diagonal().array() > 0).all());
            CHECK(a.attempted() == 10);
        }
    }
}

TEST_CASE("noise floor applies to R") {
    const auto map = straight_map(3);
    TrackerParams params;
    params.measurement_sigma = 0.0;
    Hypothesis h;
    h.lane_index = 1;
    const auto assoc = associate(perceive_exact({5.0, map.lane_center(1, 5.0), 0.0}, map), map, h, 5.0, params);
    REQUIRE_FALSE(assoc.empty());
    CHECK((assoc[0].noise.array() == params.r_floor).all());
}

TEST_CASE("missing and nonexistent channels") {
    const auto map = straight_map(4);
    Hypothesis h;
    h.lane_index = 1;
    auto p = perceive_exact({20.0, map.lane_center(1, 20.0), 0.0}, map);
    p[static_cast<std::size_t>(Marking::AdjacentLeft)].points.reset();
    auto assoc = associate(p, map, h, 20.0);
    CHECK(assoc.size() == 3);
    for (const auto& a : assoc) {
        CHECK(a.channel != Marking::AdjacentLeft);
    }

    // Lane 0 has no boundary to its adjacent right, so points seen there are outliers.
    h.lane_index = 0;
    assoc = associate(perceive_exact({20.0, map.lane_center(1, 20.0), 0.0}, map), map, h, 20.0);
    const auto adj = std::find_if(assoc.begin(), assoc.end(), [](const auto& a) { return a.channel == Marking::AdjacentRight; });
    REQUIRE(adj != assoc.end());
    CHECK(adj->dof == 0);
    CHECK(adj->outlier_count == 10);

    const auto types = match_types(perceive_exact({20.0, map.lane_center(1, 20.0), 0.0}, map), map, h);
    const auto t = std::find_if(types.begin(), types.end(), [](const auto& o) { return o.channel == Marking::AdjacentRight; });
    REQUIRE(t != types.end());
    CHECK_FALSE(t->expected.has_value());
}

TEST_CASE("update") {
    Hypothesis h;
    h.covariance = Eigen::Vector2d(0.25, 0.01).asDiagonal();
    const auto map = straight_map(4);
    h.lane_index = 2;

    SUBCASE("zero innovation shrinks the covariance only") {
        auto assoc = associate(perceive_exact({50.0, map.lane_center(2, 50.0), 0.0}, map), map, h, 50.0);
        const auto out = update(h, assoc);
        CHECK(out.hypothesis.state.cwiseAbs().maxCoeff() < 1e-12);
        CHECK(out.hypothesis.covariance.trace() < h.covariance.trace());
        CHECK(is_spd(out.hypothesis.covariance));
        CHECK(out.summaries.size() == assoc.size());
    }
    SUBCASE("empty association is the identity") {
        h.state = State(0.2, -0.01);
        const auto out = update(h, {});
        CHECK(out.hypothesis.state == h.state);
        CHECK(out.hypothesis.covariance == h.covariance);
        CHECK(out.summaries.empty());
    }
    SUBCASE("scalar closed form") {
        h.covariance = Eigen::Vector2d(1.0, 1.0).asDiagonal();
        AssociationResult a;
        a.channel = Marking::EgoLeft;
        a.residual = Eigen::VectorXd::Constant(1, 1.0);
        a.jacobian.resize(1, 2);
        a.jacobian << 1.0, 0.0;
        a.noise = Eigen::VectorXd::Constant(1, 1.0);
        a.innovation_cov = Eigen::MatrixXd::Constant(1, 1, 2.0);
        a.dof = 1;
        const auto out = update(h, {a});
        CHECK(out.hypothesis.state(0) == doctest::Approx(0.5));
        CHECK(out.hypothesis.covariance(0, 0) == doctest::Approx(0.5));
        CHECK(out.hypothesis.state(1) == doctest::Approx(0.0));
    }
    SUBCASE("adjacent channels are scored but do not move the state") {
        auto assoc = associate(perceive_exact({50.0, map.lane_center(2, 50.0) + 0.3, 0.0}, map), map, h, 50.0);
        std::erase_if(assoc, [](const auto& a) { return a.channel == Marking::EgoLeft || a.channel == Marking::EgoRight; });
        REQUIRE(assoc.size() == 2);
        const auto out = update(h, assoc);
        CHECK(out.hypothesis.state == h.state);
        CHECK(out.summaries.size() == 2);
    }
    SUBCASE("inactive hypotheses are rejected") {
        h.active = false;
        CHECK_THROWS_AS(update(h, {}), StateError);
    }
}

TEST_CASE("covariance stays SPD through a noisy sequence") {
    ScenarioConfig c;
    c.duration = 10.0;
    c.seed = 21;
    const auto seq = generate_scenario(c);
    auto hs = generate_hypotheses(seq.frames[0].gnss, seq.map, 6);
    double station = seq.frames[0].gnss.station;
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        if (k > 0) {
            station += seq.frames[k - 1].odometry.speed / 40.0;
        }
        for (auto& h : hs) {
            if (!h.active) {
                continue;
            }
            if (k > 0) {
                h = predict(h, seq.frames[k - 1].odometry, 1.0 / 40.0);
                REQUIRE(is_spd(h.covariance));
            }
            h = update(h, associate(seq.frames[k].perceived, seq.map, h, station)).hypothesis;
            REQUIRE(is_spd(h.covariance));
        }
    }
}

TEST_CASE("noise-free tracking of the true lane has zero residuals") {
    const auto c = testing::noiseless_scenario();
    const auto seq = generate_scenario(c);
    Hypothesis h;
    h.lane_index = seq.truth_lane;
    h.covariance = Eigen::Vector2d(0.25, 0.01).asDiagonal();
    const double center = seq.map.lane_center(seq.truth_lane, 0.0);
    h.state = State(seq.truth_pose[0].lateral - center, seq.truth_pose[0].heading);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        if (k > 0) {
            h = predict(h, seq.frames[k - 1].odometry, 1.0 / 40.0);
        }
        const auto assoc = associate(seq.frames[k].perceived, seq.map, h, seq.truth_pose[k].station);
        for (const auto& a : assoc) {
            REQUIRE(a.outlier_count == 0);
            CHECK(a.residual.cwiseAbs().maxCoeff() < 1e-9);
        }
        h = update(h, assoc).hypothesis;
    }
}

TEST_CASE("every wrong lane disagrees with noise-free perception somewhere") {
    // Interior lanes share geometry, so wrong lanes are told apart by outliers
    // on missing boundaries or by marking types.
    auto c = testing::noiseless_scenario();
    for (std::uint64_t s = 1; s <= 30; ++s) {
        c.seed = s;
        c.duration = 0.5;
        const auto seq = generate_scenario(c);
        const auto& pose = seq.truth_pose[0];
        const auto& perceived = seq.frames[0].perceived;
        for (int lane = 0; lane < c.num_lanes; ++lane) {
            Hypothesis h;
            h.lane_index = lane;
            h.state = State(pose.lateral - seq.map.lane_center(seq.truth_lane, 0.0), pose.heading);
            bool disagrees = false;
            for (const auto& a : associate(perceived, seq.map, h, pose.station)) {
                disagrees |= a.outlier_count > 0 || (a.residual.size() > 0 && a.residual.cwiseAbs().maxCoeff() > 1e-9);
            }
            for (const auto& t : match_types(perceived, seq.map, h)) {
                disagrees |= !t.expected || *t.expected != t.observed;
            }
            for (auto m : kMarkings) {
                const bool expected = seq.map.has_boundary(lane + boundary_offset(m));
                disagrees |= expected && !perceived[static_cast<std::size_t>(m)].points;
            }
            CHECK(disagrees == (lane != seq.truth_lane));
        }
    }
}

TEST_CASE("deactivation") {
    const auto map = straight_map(4);
    Hypothesis h;
    CHECK(deactivate_if_off_map(h, map, map.map_extent).active);
    CHECK_FALSE(deactivate_if_off_map(h, map, map.map_extent + 0.1).active);
    h.state(0) = 2.0 * 3.5 + 0.01;
    CHECK_FALSE(deactivate_if_off_map(h, map, 0.0).active);

    Hypothesis off = deactivate_if_off_map(h, map, 0.0);
    off.state(0) = 0.0;
    CHECK_FALSE(deactivate_if_off_map(off, map, 0.0).active);
    CHECK_FALSE(deactivate_if_off_map(off, map, -5.0).active);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "verloc/common.hpp"
#include "verloc/localize.hpp"
#include "verloc/propagation.hpp"
#include "verloc/zoneverify.hpp"

using namespace verloc;

namespace {

// Two-directional probe exchange as the protocol aggregates it.
double noisy_sym_rtt(const prop::Model& m, double d_km, Rng& rng) {
    const double fwd = prop::sample_min_rtt(m, d_km, 200, rng);
    const double rev = prop::sample_min_rtt(m, d_km, 200, rng);
    return 0.5 * (fwd + rev);
}

std::vector<loc::RefObservation> honest_observations(const prop::Model& m,
                                                     const geo::GeoPoint& truth,
                                                     int count, Seed seed) {
    Rng rng = make_rng(seed);
    std::vector<loc::RefObservation> obs;
    obs.reserve(count);
    while (static_cast<int>(obs.size()) < count) {
        const double lat = uniform_real(rng, 36.0, 60.0);
        const double lon = uniform_real(rng, -8.0, 30.0);
        const geo::GeoPoint ref = geo::make_point(lat, lon);
        const double d = geo::great_circle_km(truth, ref);
        if (d < 30.0) continue;
        obs.push_back({ref, noisy_sym_rtt(m, d, rng)});
    }
    return obs;
}

const char* kTwinMap = R"({
  "format": "verloc-zonemap",
  "version": 1,
  "zones": [
    {"id": "AA", "vertices": [[40,0],[40,20],[60,20],[60,0]]},
    {"id": "AB", "vertices": [[40,0],[40,20],[60,20],[60,0]]}
  ]
})";

} // namespace

TEST_SUITE("zoneverify") {

TEST_CASE("cap radius follows the plausible speed limit") {
    // 2/3 c per ms of round trip; at 3 ms the cap spans a full 2c.
    CHECK(zone::max_distance_km(1.0) ==
          doctest::Approx(199.86163866666666).epsilon(1e-12));
    CHECK(zone::max_distance_km(3.0) ==
          doctest::Approx(599.584916).epsilon(1e-12));
    CHECK(zone::max_distance_km(0.001) == doctest::Approx(0.19986163866666666));

    CHECK_THROWS_AS(zone::max_distance_km(0.0), std::invalid_argument);
    CHECK_THROWS_AS(zone::max_distance_km(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(zone::max_distance_km(std::nan("")), std::invalid_argument);
}

TEST_CASE("target area honors every applied cap") {
    const geo::GeoPoint a = geo::make_point(48.0, 10.0);
    const geo::GeoPoint b = geo::make_point(49.5, 12.0);
    const geo::GeoPoint c = geo::make_point(47.0, 8.0);
    std::vector<loc::RefObservation> obs = {
        {a, 2.0}, {b, 2.6}, {c, 3.1}}; // caps ~400 / 520 / 620 km

    const zone::TargetArea area = zone::target_area(obs);
    CHECK(area.resolution_deg == doctest::Approx(0.2));
    CHECK(area.caps_applied >= 1);
    CHECK(area.caps_applied <= 3);
    CHECK(!area.points.empty());

    std::vector<std::pair<double, const geo::GeoPoint*>> caps = {
        {zone::max_distance_km(2.0), &a},
        {zone::max_distance_km(2.6), &b},
        {zone::max_distance_km(3.1), &c}};
    std::sort(caps.begin(), caps.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& p : area.points) {
        for (std::size_t k = 0; k < area.caps_applied; ++k) {
            CHECK(geo::great_circle_km(p, *caps[k].second) <=
                  caps[k].first * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("single-cap area fills the disc") {
    const geo::GeoPoint center = geo::make_point(48.3, 9.7);
    const double rtt = 2.5;
    const double r = zone::max_distance_km(rtt); // ~499.65 km
    const zone::TargetArea area = zone::target_area({{center, rtt}});
    CHECK(area.caps_applied == 1);

    // Compare the lattice count against the spherical disc area.
    const double cell_km2 = 0.2 * 0.2 * 111.195 * 111.195 *
                            std::cos(48.3 * 3.14159265358979323846 / 180.0);
    const double expected = 3.14159265358979323846 * r * r / cell_km2;
    CHECK(static_cast<double>(area.points.size()) ==
          doctest::Approx(expected).epsilon(0.02));
    for (const auto& p : area.points)
        CHECK(geo::great_circle_km(p, center) <= r * (1.0 + 1e-9));
}

TEST_CASE("redundant caps stop the cascade early") {
    const geo::GeoPoint center = geo::make_point(50.0, 10.0);
    std::vector<loc::RefObservation> same(8, {center, 1.5});
    const zone::TargetArea dup = zone::target_area(same);
    CHECK(dup.caps_applied == 2); // second identical cap removes nothing
    CHECK(!dup.points.empty());

    // A tight cap followed by far, slack ones: the wide caps cannot shave
    // more than a sliver, so the cascade stops long before the list ends.
    std::vector<loc::RefObservation> slack = {{center, 1.0}};
    for (int k = 0; k < 5; ++k)
        slack.push_back({geo::make_point(50.0 + k, 9.0 - k), 40.0});
    const zone::TargetArea wide = zone::target_area(slack);
    CHECK(wide.caps_applied < slack.size());
    CHECK(!wide.points.empty());
}

TEST_CASE("scores normalize exactly and rank by objective") {
    const prop::Model model = prop::default_model();
    const geo::GeoPoint truth = geo::make_point(50.1, 8.7);
    const auto obs = honest_observations(model, truth, 20,
                                         derive_seed(0xce11ab1e, "score"));
    const zone::TargetArea area = zone::target_area(obs);
    REQUIRE(area.points.size() >= 100);

    const std::vector<double> scores = zone::score_area(model, obs, area);
    REQUIRE(scores.size() == area.points.size());

    const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
    CHECK(std::abs(total - 1.0) <= 1e-9);
    // Far rim points may underflow exp() to an exact zero; that is fine.
    CHECK(*std::min_element(scores.begin(), scores.end()) >= 0.0);
    CHECK(*std::max_element(scores.begin(), scores.end()) > 0.0);

    // The top-scoring point is the objective minimizer, and score ratios
    // reproduce exp(-(rmse_i - rmse_min)) exactly.
    loc::Problem problem(model, obs);
    std::vector<double> rmse(area.points.size());
    for (std::size_t i = 0; i < area.points.size(); ++i)
        rmse[i] = problem.objective(area.points[i]);
    const std::size_t best_score =
        std::max_element(scores.begin(), scores.end()) - scores.begin();
    const std::size_t best_rmse =
        std::min_element(rmse.begin(), rmse.end()) - rmse.begin();
    CHECK(best_score == best_rmse);
    for (std::size_t i = 0; i < scores.size(); i += scores.size() / 7 + 1) {
        const double want = std::exp(-(rmse[i] - rmse[best_rmse]));
        CHECK(scores[i] / scores[best_score] ==
              doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("honest nodes verify their true zone") {
    const prop::Model model = prop::default_model();
    const geo::ZoneMap map = geo::ZoneMap::load(find_data_file("zones_europe15.json"));

    const struct { double lat, lon; const char* zone; } cities[] = {
        {52.37, 9.73, "DE"},   // Hanover
        {48.8566, 2.3522, "FR"},
        {41.8931, 12.4828, "IT"},
        {52.2297, 21.0122, "PL"},
        {40.4168, -3.7038, "ES"},
    };
    int pass = 0;
    for (const auto& city : cities) {
        const geo::GeoPoint truth = geo::make_point(city.lat, city.lon);
        REQUIRE(map.zone_of(truth) != nullptr);
        REQUIRE(map.zone_of(truth)->id == city.zone);
        const auto obs = honest_observations(
            model, truth, 60, derive_seed(0x60e0fe, "honest"));
        const zone::Decision d = zone::verify_zone(model, map, obs, city.zone);
        CHECK(d.area_points > 0);

        double total = d.unzoned_mass;
        for (const auto& zm : d.masses) total += zm.mass;
        CHECK(std::abs(total - 1.0) <= 1e-9);
        if (d.verified) {
            CHECK(d.winner == city.zone);
            CHECK(d.claimed_mass == doctest::Approx(d.winner_mass));
            ++pass;
        }
    }
    CHECK(pass == 5);
}

TEST_CASE("pruned and exact paths agree") {
    const prop::Model model = prop::default_model();
    const geo::ZoneMap map = geo::ZoneMap::load(find_data_file("zones_europe15.json"));
    zone::Options opt;
    opt.resolution_deg = 0.35;

    for (Seed s = 1; s <= 4; ++s) {
        Rng rng = make_rng(derive_seed(s, "agree"));
        const geo::GeoPoint truth = geo::make_point(
            uniform_real(rng, 40.0, 56.0), uniform_real(rng, -4.0, 24.0));
        const auto obs =
            honest_observations(model, truth, 18, derive_seed(s, "agree-obs"));
        const geo::Zone* z = map.zone_of(truth);
        const std::string claimed = z ? z->id : "DE";

        const zone::Decision fast = zone::verify_zone(model, map, obs, claimed, opt);
        const zone::Decision exact =
            zone::verify_zone_exact(model, map, obs, claimed, opt);

        CHECK(fast.verified == exact.verified);
        CHECK(fast.winner == exact.winner);
        CHECK(fast.area_points == exact.area_points);
        CHECK(std::abs(fast.winner_mass - exact.winner_mass) <= 1e-9);
        CHECK(std::abs(fast.claimed_mass - exact.claimed_mass) <= 1e-9);
        CHECK(std::abs(fast.unzoned_mass - exact.unzoned_mass) <= 1e-9);
        REQUIRE(fast.masses.size() == exact.masses.size());
        for (std::size_t i = 0; i < fast.masses.size(); ++i) {
            CHECK(fast.masses[i].zone_id == exact.masses[i].zone_id);
            CHECK(std::abs(fast.masses[i].mass - exact.masses[i].mass) <= 1e-9);
        }
    }
}

TEST_CASE("contradictory caps leave an empty area") {
    const prop::Model model = prop::default_model();
    const geo::ZoneMap map = geo::ZoneMap::load(find_data_file("zones_europe15.json"));
    // 0.5 ms round trips cap each position within ~100 km, but the
    // references sit 877+ km apart: no point satisfies all three.
    std::vector<loc::RefObservation> obs = {
        {geo::make_point(48.8566, 2.3522), 0.5},
        {geo::make_point(52.52, 13.405), 0.5},
        {geo::make_point(38.7223, -9.1393), 0.5}};

    const zone::TargetArea area = zone::target_area(obs);
    CHECK(area.points.empty());

    const zone::Decision d = zone::verify_zone(model, map, obs, "FR");
    CHECK(!d.verified);
    CHECK(d.winner.empty());
    CHECK(d.area_points == 0);
    CHECK(d.masses.empty());
    CHECK(d.claimed_mass == 0.0);
    CHECK(d.unzoned_mass == 0.0);
}

TEST_CASE("overlapping twin zones attribute mass to the first id") {
    const prop::Model model = prop::default_model();
    const geo::ZoneMap twins = geo::ZoneMap::parse(kTwinMap);
    const geo::GeoPoint truth = geo::make_point(50.0, 10.0);
    const auto obs = honest_observations(model, truth, 25,
                                         derive_seed(0x7215, "twin"));

    const zone::Decision d = zone::verify_zone(model, twins, obs, "AA");
    CHECK(d.verified);
    CHECK(d.winner == "AA");
    for (const auto& zm : d.masses)
        if (zm.zone_id == "AB") CHECK(zm.mass == 0.0);

    const zone::Decision other = zone::verify_zone(model, twins, obs, "AB");
    CHECK(!other.verified);
    CHECK(other.winner == "AA");
    CHECK(other.claimed_mass == 0.0);
}

TEST_CASE("invalid inputs are rejected") {
    const prop::Model model = prop::default_model();
    const geo::ZoneMap map = geo::ZoneMap::load(find_data_file("zones_europe15.json"));
    const std::vector<loc::RefObservation> obs = {
        {geo::make_point(48.0, 10.0), 2.0},
        {geo::make_point(49.0, 11.0), 2.0},
        {geo::make_point(47.0, 9.0), 2.0}};

    CHECK_THROWS_AS(zone::verify_zone(model, map, obs, "XX"),
                    std::invalid_argument);
    CHECK_THROWS_AS(zone::target_area({}), std::invalid_argument);
    CHECK_THROWS_AS(zone::target_area({{geo::make_point(0, 0), -1.0}}),
                    std::invalid_argument);

    zone::Options bad;
    bad.resolution_deg = 0.0;
    CHECK_THROWS_AS(zone::target_area(obs, bad), std::invalid_argument);
    bad.resolution_deg = 0.2;
    bad.min_shrink = 1.0;
    CHECK_THROWS_AS(zone::target_area(obs, bad), std::invalid_argument);
    bad.min_shrink = 0.01;
    bad.lat_clamp_deg = 0.0;
    CHECK_THROWS_AS(zone::target_area(obs, bad), std::invalid_argument);

    // Scoring inherits the localizer's three-reference minimum.
    zone::TargetArea tiny;
    tiny.points = {geo::make_point(48.0, 10.0)};
    tiny.resolution_deg = 0.2;
    CHECK_THROWS_AS(
        zone::score_area(model, {{geo::make_point(48.0, 10.0), 2.0}}, tiny),
        std::invalid_argument);
}

TEST_CASE("deterministic and fast enough for the harness") {
    const prop::Model model = prop::default_model();
    const geo::ZoneMap map = geo::ZoneMap::load(find_data_file("zones_europe15.json"));
    const geo::GeoPoint truth = geo::make_point(51.05, 13.74);
    const auto obs = honest_observations(model, truth, 95,
                                         derive_seed(0xbe2f, "perf"));

    const auto t0 = std::chrono::steady_clock::now();
    const zone::Decision d1 = zone::verify_zone(model, map, obs, "DE");
    const auto t1 = std::chrono::steady_clock::now();
    const zone::Decision d2 = zone::verify_zone(model, map, obs, "DE");

    CHECK(d1.verified == d2.verified);
    CHECK(d1.winner == d2.winner);
    CHECK(d1.winner_mass == d2.winner_mass);
    CHECK(d1.area_points == d2.area_points);

    const double ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    CHECK(ms < 400.0);
    MESSAGE("verify_zone with 95 refs: " << ms << " ms, grid "
            << d1.area_points << " pts");
}

} // TEST_SUITE

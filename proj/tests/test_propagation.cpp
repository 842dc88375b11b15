#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "verloc/common.hpp"
#include "verloc/propagation.hpp"

using namespace verloc;
using namespace verloc::prop;

namespace {

Model tiny_model(double v_max, double d_half) {
    Model m;
    m.v_max = v_max;
    m.d_half = d_half;
    m.envelope_tolerance = 0.002;
    m.bin_edges = {10.0, 100.0, 1000.0, 10000.0};
    m.omega = {0.8, 1.0, 1.2};
    m.lower_speed = {1.0, 10.0, 40.0};
    NoiseBin nb;
    nb.slow_prob = 0.4;
    nb.tight_log_median = std::log(0.003);
    nb.tight_log_sigma = 0.8;
    nb.slow_log_median = std::log(0.15);
    nb.slow_log_sigma = 0.95;
    nb.probe_scale = 0.4;
    m.noise = {nb, nb, nb};
    m.validate();
    return m;
}

} // namespace

TEST_SUITE("propagation") {

TEST_CASE("speed curve closed-form values") {
    Model m = default_model();
    CHECK(m.v_max == doctest::Approx(100.0));
    CHECK(m.d_half == doctest::Approx(700.0));
    // v_max * d / (d + d_half) at d = d_half is exactly half of v_max.
    CHECK(speed_at(m, 700.0) == doctest::Approx(50.0).epsilon(1e-15));
    CHECK(floor_rtt_ms(m, 700.0) == doctest::Approx(14.0).epsilon(1e-15));
    CHECK(speed_at(m, 1400.0) == doctest::Approx(100.0 * 1400.0 / 2100.0));
    CHECK(speed_at(m, 7000.0) == doctest::Approx(100.0 * 7000.0 / 7700.0));

    // Short distances reuse the speed at the 1 km cutoff.
    CHECK(speed_at(m, 0.5) == doctest::Approx(100.0 / 701.0));
    CHECK(speed_at(m, 0.0) == doctest::Approx(100.0 / 701.0));
    CHECK(floor_rtt_ms(m, 0.0) == 0.0);

    CHECK_THROWS_AS(speed_at(m, -1.0), std::invalid_argument);
}

TEST_CASE("speed is positive, capped, and monotone") {
    Model m = default_model();
    double prev = 0.0;
    for (double d = 0.0; d <= 20000.0; d += 37.0) {
        const double s = speed_at(m, d);
        CHECK(s > 0.0);
        CHECK(s <= kMaxPlausibleSpeedKmPerMs + 1e-12);
        CHECK(s >= prev - 1e-12);
        prev = s;
    }
    // A hypothetical fit exceeding the plausibility cap still stays capped.
    Model fast = tiny_model(250.0, 50.0);
    CHECK(speed_at(fast, 9000.0) == doctest::Approx(kMaxPlausibleSpeedKmPerMs));
}

TEST_CASE("rtt floor inverts exactly") {
    Model m = default_model();
    CHECK(time_to_distance(m, 14.0) == doctest::Approx(700.0).epsilon(1e-12));
    CHECK(time_to_distance(m, 0.0) == 0.0);
    for (double d : {0.05, 0.5, 1.0, 3.0, 25.0, 140.0, 900.0, 4000.0, 15000.0}) {
        CHECK(time_to_distance(m, floor_rtt_ms(m, d)) ==
              doctest::Approx(d).epsilon(1e-9));
    }
    // Piecewise inverse also holds when the curve saturates at the cap.
    Model fast = tiny_model(250.0, 50.0);
    for (double d : {0.2, 1.0, 10.0, 100.0, 249.0, 251.0, 5000.0}) {
        CHECK(time_to_distance(fast, floor_rtt_ms(fast, d)) ==
              doctest::Approx(d).epsilon(1e-9));
    }
    CHECK_THROWS_AS(time_to_distance(m, -0.1), std::invalid_argument);
}

TEST_CASE("rtt floor grows with distance") {
    Model m = default_model();
    double prev = -1.0;
    for (double d = 0.1; d < 12000.0; d *= 1.17) {
        const double t = floor_rtt_ms(m, d);
        CHECK(t > prev);
        prev = t;
    }
}

TEST_CASE("weight and bound interpolation hits bin centers") {
    Model m = default_model();
    const double c0 = m.bin_center(0);
    const double c9 = m.bin_center(9);
    CHECK(noise_weight(m, c0) == doctest::Approx(0.70));
    CHECK(noise_weight(m, c9) == doctest::Approx(1.49));
    CHECK(noise_weight(m, 1.0) == doctest::Approx(0.70));      // clamped left
    CHECK(noise_weight(m, 20000.0) == doctest::Approx(1.49));  // clamped right

    // Non-decreasing everywhere in between.
    double prev = 0.0;
    for (double d = 5.0; d < 15000.0; d *= 1.1) {
        const double w = noise_weight(m, d);
        CHECK(w >= prev - 1e-12);
        prev = w;
    }

    CHECK(lower_speed_bound(m, m.bin_center(4), 0.0) ==
          doctest::Approx(24.159242));
    CHECK(lower_speed_bound(m, m.bin_center(4), 0.01) ==
          doctest::Approx(24.159242 * 0.99));
    CHECK_THROWS_AS(lower_speed_bound(m, 100.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(lower_speed_bound(m, 100.0, -0.01), std::invalid_argument);
}

TEST_CASE("bounds bracket the model speed") {
    Model m = default_model();
    for (double d = 12.0; d < 9000.0; d *= 1.31) {
        const double lo = lower_speed_bound(m, d, 0.01);
        const double hi = upper_speed_bound(m, d);
        const double f = speed_at(m, d);
        CHECK(lo > 0.0);
        CHECK(lo < f);
        CHECK(hi >= f);
        CHECK(hi <= kMaxPlausibleSpeedKmPerMs + 1e-12);
    }
    CHECK(upper_speed_bound(m, 700.0) == doctest::Approx(50.0 * 1.002));
}

TEST_CASE("bin lookup clamps out-of-range distances") {
    Model m = default_model();
    CHECK(m.bin_of(1.0) == 0);
    CHECK(m.bin_of(10.0) == 0);
    CHECK(m.bin_of(15.0) == 0);
    CHECK(m.bin_of(25.0) == 1);
    CHECK(m.bin_of(9999.0) == 9);
    CHECK(m.bin_of(50000.0) == 9);
    CHECK_THROWS_AS(m.bin_of(-2.0), std::invalid_argument);
}

TEST_CASE("sampled RTTs never beat the floor") {
    Model m = default_model();
    Rng rng = make_rng(123);
    for (int i = 0; i < 3000; ++i) {
        const double d = uniform_real(rng, 5.0, 9000.0);
        const double rtt = sample_rtt(m, d, rng);
        CHECK(rtt >= floor_rtt_ms(m, d));
        // Equivalently: the implied speed never exceeds the model envelope.
        CHECK(d / rtt <= speed_at(m, d) + 1e-12);
    }
}

TEST_CASE("probe aggregation shrinks jitter but keeps the path") {
    Model m = default_model();
    Rng rng = make_rng(77);
    const double d = 700.0;
    const double floor = floor_rtt_ms(m, d);
    double single = 0.0, burst = 0.0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) single += sample_rtt(m, d, rng) / floor - 1.0;
    for (int i = 0; i < n; ++i)
        burst += sample_min_rtt(m, d, 200, rng) / floor - 1.0;
    single /= n;
    burst /= n;
    // Single probes carry the full exponential jitter (scale ~0.4 here);
    // a 200-probe burst keeps only the sticky path overhead.
    CHECK(single > 0.25);
    CHECK(burst < 0.15);
    CHECK(burst > 0.01);

    // Burst overhead distribution: a tight cluster near the floor plus a
    // heavy detour tail, per the mixture the model declares.
    int tight = 0, slow = 0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_min_rtt(m, d, 200, rng) / floor - 1.0;
        if (x < 0.018) ++tight;
        if (x > 0.035) ++slow;
    }
    const double bin = static_cast<double>(m.bin_of(d));
    (void)bin;
    CHECK(static_cast<double>(tight) / n == doctest::Approx(0.665).epsilon(0.06));
    CHECK(static_cast<double>(slow) / n == doctest::Approx(0.235).epsilon(0.15));
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    Model m = default_model();
    Rng a = make_rng(31337), b = make_rng(31337);
    for (int i = 0; i < 50; ++i) {
        CHECK(sample_min_rtt(m, 321.0, 5, a) ==
              sample_min_rtt(m, 321.0, 5, b));
    }
    CHECK_THROWS_AS(sample_min_rtt(m, 100.0, 0, a), std::invalid_argument);
    CHECK_THROWS_AS(sample_min_rtt(m, 0.0, 5, a), std::invalid_argument);
}

TEST_CASE("superluminal filter drops exactly the violators") {
    const double c = kSpeedOfLightKmPerMs;
    std::vector<CalibrationSample> samples = {
        {3000.0, 3000.0 / (1.1 * c)}, // implied speed 1.1c: impossible
        {3000.0, 3000.0 / (2.0 * c)}, // implied speed 2c: impossible
        {3000.0, 3000.0 / c},         // exactly c: kept (boundary)
        {3000.0, 30.0},               // ordinary
        {50.0, 1.0},
    };
    CHECK(superluminal(samples[0]));
    CHECK(superluminal(samples[1]));
    CHECK_FALSE(superluminal(samples[2]));
    CHECK_FALSE(superluminal(samples[3]));
    const auto kept = filter_superluminal(samples);
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].rtt_ms == doctest::Approx(3000.0 / c));
    CHECK_THROWS_AS(superluminal(CalibrationSample{10.0, 0.0}),
                    std::invalid_argument);
}

TEST_CASE("curve fit recovers known parameters") {
    const double v_true = 85.0, dh_true = 550.0;
    std::vector<CalibrationSample> clean;
    Rng rng = make_rng(2024);
    for (int i = 0; i < 4000; ++i) {
        const double d = std::exp(uniform_real(rng, std::log(12.0), std::log(9500.0)));
        const double v = v_true * d / (d + dh_true);
        clean.push_back({d, d / v});
    }
    Model m = build_model(clean);
    CHECK(m.v_max == doctest::Approx(v_true).epsilon(1e-3));
    CHECK(m.d_half == doctest::Approx(dh_true).epsilon(1e-3));

    // With multiplicative noise the fit still lands within a few percent.
    std::vector<CalibrationSample> noisy;
    for (const auto& s : clean) {
        const double overhead = u01(rng) < 0.35 ? lognormal(rng, std::log(0.15), 0.9)
                                                : lognormal(rng, std::log(0.003), 0.8);
        noisy.push_back({s.distance_km, s.rtt_ms * (1.0 + overhead)});
    }
    Model mn = build_model(noisy);
    CHECK(mn.v_max == doctest::Approx(v_true).epsilon(0.06));
    CHECK(mn.d_half == doctest::Approx(dh_true).epsilon(0.30));
    mn.validate();

    // Superluminal injections do not move the fit: they are filtered.
    auto poisoned = clean;
    for (int i = 0; i < 50; ++i)
        poisoned.push_back({5000.0, 5000.0 / (1.5 * kSpeedOfLightKmPerMs)});
    Model mp = build_model(poisoned);
    CHECK(mp.v_max == doctest::Approx(m.v_max).epsilon(1e-12));
    CHECK(mp.d_half == doctest::Approx(m.d_half).epsilon(1e-12));
}

TEST_CASE("built models satisfy the structural invariants") {
    Rng rng = make_rng(5150);
    std::vector<CalibrationSample> samples;
    for (int i = 0; i < 6000; ++i) {
        const double d = std::exp(uniform_real(rng, std::log(15.0), std::log(9000.0)));
        const double v = 92.0 * d / (d + 640.0);
        const double overhead = u01(rng) < 0.4 ? lognormal(rng, std::log(0.17), 0.9)
                                               : lognormal(rng, std::log(0.004), 0.8);
        samples.push_back({d, (d / v) * (1.0 + overhead)});
    }
    Model m = build_model(samples);
    m.validate(); // throws on any violation
    REQUIRE(m.bins() == 10);
    for (std::size_t i = 0; i < m.bins(); ++i) {
        CHECK(m.lower_speed[i] <= speed_at(m, m.bin_center(i)) + 1e-12);
        CHECK(m.lower_speed[i] > 0.0);
        if (i > 0) CHECK(m.omega[i] >= m.omega[i - 1]);
        CHECK(m.noise[i].slow_prob == doctest::Approx(0.4).epsilon(0.25));
    }
    const double mean_omega =
        std::accumulate(m.omega.begin(), m.omega.end(), 0.0) / 10.0;
    CHECK(mean_omega == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("model JSON round-trips bit-exact") {
    Model m = default_model();
    Model back = from_json_text(to_json(m));
    CHECK(back.v_max == m.v_max);
    CHECK(back.d_half == m.d_half);
    CHECK(back.envelope_tolerance == m.envelope_tolerance);
    REQUIRE(back.bins() == m.bins());
    for (std::size_t i = 0; i < m.bins(); ++i) {
        CHECK(back.bin_edges[i] == m.bin_edges[i]);
        CHECK(back.omega[i] == m.omega[i]);
        CHECK(back.lower_speed[i] == m.lower_speed[i]);
        CHECK(back.noise[i].slow_prob == m.noise[i].slow_prob);
        CHECK(back.noise[i].tight_log_median == m.noise[i].tight_log_median);
        CHECK(back.noise[i].slow_log_median == m.noise[i].slow_log_median);
        CHECK(back.noise[i].probe_scale == m.noise[i].probe_scale);
    }
}

TEST_CASE("validation rejects malformed models") {
    Model m = default_model();

    Model bad = m;
    bad.omega[3] = bad.omega[2] - 0.1; // breaks monotonicity
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = m;
    bad.omega[5] = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = m;
    bad.lower_speed[9] = 1000.0; // exceeds the model speed there
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = m;
    bad.bin_edges[2] = bad.bin_edges[3] + 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = m;
    bad.d_half = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = m;
    for (double& w : bad.omega) w *= 1.5; // mean drifts off 1
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    CHECK_THROWS(from_json_text("{\"format\":\"something-else\"}"));
}

} // TEST_SUITE

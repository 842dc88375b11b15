#pragma once

// Experiment orchestration: baseline accuracy runs, adversarial runs with
// per-node decision accounting, breaking-point sweeps over the claiming
// fraction, and reference-count sensitivity curves.
//
// Seed discipline: every repetition derives four sub-seeds from the master
// seed (network placement, measurement noise, schedule beacon, attack
// draws), all recorded in the report. Sweeps reuse the same repetition
// indices, so every claiming fraction sees the same worlds and noise, and
// claim assignment is prefix-stable: fraction steps differ only by the
// additional claimers. Reports are deterministic byte-for-byte given the
// same config.
//
// Decision buckets follow the protocol's four cases. A claim is accepted
// when the confidence score reaches the threshold AND the mass-winning
// zone equals the claimed zone. Truthful accepted claims are TP; truthful
// rejections FN; false claims accepted FP, otherwise TN. A truthful node
// whose score passes but whose winner zone mismatches lands in a separate
// wrong-zone bucket so the four-bucket totals stay clean.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "verloc/adversary.hpp"
#include "verloc/common.hpp"
#include "verloc/confidence.hpp"
#include "verloc/geo.hpp"
#include "verloc/localize.hpp"
#include "verloc/netgen.hpp"
#include "verloc/propagation.hpp"
#include "verloc/schedule.hpp"
#include "verloc/zoneverify.hpp"

namespace verloc::harness {

struct AttackConfig {
    std::size_t adversaries = 0; // colluding set size |A|
    std::size_t claiming = 0;    // how many of them claim a false zone
    adv::AttackOptions options;
};

struct ExperimentConfig {
    std::size_t n = 1000;
    std::size_t t = 50;          // per-node initiated references
    std::size_t target_refs = 0; // when set, t is derived to hit this mean
    int probes = 200;
    double tau = conf::kDefaultTolerance;
    double upsilon = conf::kDefaultThreshold;
    double grid_resolution_deg = 0.2;
    std::size_t repetitions = 64;
    Seed master_seed = 1;
    std::string zone_map_file = "zones_europe15.json";
    std::string model_file = ""; // empty: the shipped default model
    std::optional<AttackConfig> attack;

    // Throws std::invalid_argument before any compute happens.
    void validate() const;
    std::size_t effective_t() const;
};

enum class Outcome : std::uint8_t { TP, TN, FP, FN, WrongZone };
const char* outcome_name(Outcome o);

struct NodeRecord {
    std::uint32_t index = 0;
    bool adversarial = false;
    bool claiming = false;
    geo::GeoPoint true_loc, claimed_loc, estimated_loc;
    std::string true_zone, claimed_zone, winner_zone;
    double error_km = 0.0; // estimate vs. true position
    double confidence = 0.0;
    bool score_accepted = false; // confidence >= upsilon
    bool zone_verified = false;  // mass winner == claimed zone
    std::size_t reference_count = 0;
    Outcome outcome = Outcome::TN;
};

struct RepetitionResult {
    std::size_t rep = 0;
    Seed network_seed = 0, matrix_seed = 0, beacon_seed = 0, attack_seed = 0;
    std::vector<NodeRecord> nodes;

    double median_error_km = 0.0; // truthful nodes
    double mean_error_km = 0.0;
    double zone_rate = 0.0;       // truthful nodes, winner == true zone
    double mean_reference_count = 0.0;
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0, wrong_zone = 0, rejects = 0;
    double recall = 1.0;               // TP / (TP + FN)
    double min_truthful_confidence = 0.0;
    double max_claiming_confidence = 0.0;
    double unprotected_success = 0.0;  // claiming, winner == claimed zone
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RepetitionResult> repetitions;

    // medians over repetitions
    double median_error_km = 0.0;
    double zone_rate = 0.0;
    double recall = 1.0;
    double unprotected_success = 0.0;
    std::size_t total_tp = 0, total_tn = 0, total_fp = 0, total_fn = 0,
                total_wrong_zone = 0;

    std::string to_json(bool include_nodes = false) const;
    std::string to_csv() const; // one aggregate row per repetition
};

// Aggregate a finished repetition's node records; exposed for tests that
// recount the tallies independently.
void summarize(RepetitionResult& rep);

// One simulated world plus its measurement campaign; the step-by-step CLI
// subcommands and the experiment drivers share this assembly.
struct World {
    geo::ZoneMap map;
    prop::Model model;
    net::Network network;
    sched::Schedule schedule;
    net::MeasurementSet measurements;
    Seed network_seed = 0, matrix_seed = 0, beacon_seed = 0, attack_seed = 0;
};

World build_world(const ExperimentConfig& cfg, std::size_t rep);

// Localization observations / confidence timings for one node, as the
// analysis sees them: reference positions are the *claimed* ones.
std::vector<loc::RefObservation> observations_for(const World& w, std::uint32_t i);
std::vector<conf::PairTiming> timings_for(const World& w, std::uint32_t i);

NodeRecord analyze_node(const World& w, const ExperimentConfig& cfg,
                        std::uint32_t i);

ExperimentReport run_baseline(const ExperimentConfig& cfg);
ExperimentReport run_attack(const ExperimentConfig& cfg);

// One run_attack per claiming fraction; |A| = |C| = round(fraction * N).
// Shared repetition seeds couple the fractions for variance control.
std::vector<ExperimentReport>
sweep_breaking_point(const ExperimentConfig& cfg,
                     const std::vector<double>& fractions);

struct CurvePoint {
    std::size_t target_refs = 0;
    std::size_t t = 0;
    double mean_refs = 0.0;
    double median_error_km = 0.0;
    double zone_rate = 0.0;
};

// Error/zone-rate curve against the target reference count.
std::vector<CurvePoint>
reference_count_sensitivity(const ExperimentConfig& cfg,
                            const std::vector<std::size_t>& ref_targets);

} // namespace verloc::harness

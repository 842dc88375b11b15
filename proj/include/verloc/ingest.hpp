#pragma once

// Real-world data path: parse saved measurement payloads, resolve
// self-reported city names, and assemble analysis-ready networks.
//
// Parsing is total: any byte sequence yields either a parsed file or a
// structured error, never a crash. Malformed or non-positive entries are
// dropped with per-file counts so data quality stays visible.
//
// Wild data often lacks the reverse direction of a pair; those directions
// are mirrored from the forward value and flagged, which keeps the
// symmetric-RTT rule applicable while feeding a quality column.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "verloc/common.hpp"
#include "verloc/geo.hpp"
#include "verloc/netgen.hpp"

namespace verloc::ingest {

// ---------------------------------------------------------------- payloads

struct MeasurementEntry {
    std::string ref;         // reference identity as reported
    double min_rtt_ms = 0.0; // burst minimum
    bool operator==(const MeasurementEntry&) const = default;
};

struct RawMeasurementFile {
    std::string node;     // measuring node's identity
    std::string location; // self-reported place string; meaningful iff present
    bool has_location = false;
    std::vector<MeasurementEntry> measurements;

    // Per-parse diagnostics; not serialized.
    std::size_t dropped_nonpositive = 0; // rtt <= 0 or non-finite
    std::size_t dropped_malformed = 0;   // entry missing fields / wrong types

    // Canonical bytes: parsing canonical bytes and re-serializing is the
    // identity.
    std::string to_json() const;
};

struct ParseResult {
    std::optional<RawMeasurementFile> file;
    std::string error; // empty exactly when file is set
    bool ok() const { return file.has_value(); }
};

ParseResult parse_measurement_file(std::string_view bytes);

// Every *.json under dir, parsed; parse failures land in `errors` keyed by
// filename, successes in `files` sorted by node id.
struct DirectoryScan {
    std::vector<RawMeasurementFile> files;
    std::vector<std::pair<std::string, std::string>> errors;
};
DirectoryScan parse_payload_directory(const std::filesystem::path& dir);

// -------------------------------------------------------------- city table

// Trim, collapse internal whitespace, case-fold, and strip Latin diacritics
// ("Łódź " -> "lodz"). Unknown non-ASCII sequences pass through unchanged.
std::string normalize_place(std::string_view name);

struct CityRecord {
    std::string name; // normalized
    std::string country;
    geo::GeoPoint center;
};

struct CityLookup {
    std::optional<geo::GeoPoint> point;
    bool ambiguous = false; // name exists in several countries, no hint given
};

class CityTable {
  public:
    // CSV with header: name,country,lat,lon. Quoted fields supported.
    // Rows violating the schema are skipped and counted; duplicate
    // (normalized name, country) keys keep the first occurrence.
    static CityTable from_csv(std::string_view text);

    // Normalization then exact match. A name present in multiple countries
    // resolves only with a country hint.
    CityLookup resolve(std::string_view name,
                       std::string_view country_hint = {}) const;

    std::size_t size() const { return records_; }
    std::size_t skipped_rows() const { return skipped_; }

  private:
    // normalized name -> country -> center
    std::map<std::string, std::map<std::string, geo::GeoPoint>> by_name_;
    std::size_t records_ = 0;
    std::size_t skipped_ = 0;
};

// --------------------------------------------------------- analysis inputs

struct Descriptor {
    std::string id;
    geo::GeoPoint loc; // the position this identity advertises
};

// CSV with header: node,lat,lon (the external GeoIP-style location list and
// the descriptor list share this shape).
struct LocationRows {
    std::vector<Descriptor> rows;
    std::size_t skipped = 0;
};
LocationRows parse_locations_csv(std::string_view text);

struct ExcludedNode {
    std::string id;
    std::string reason;
};

struct AnalysisInput {
    net::Network network;         // node per descriptor, ascending id order
    std::vector<std::string> ids; // network index -> identity
    net::MeasurementSet measurements;
    std::vector<std::uint8_t> pair_mirrored; // parallel to measurements.pairs
    std::vector<std::uint32_t> measured;     // indices with a usable payload
    std::vector<ExcludedNode> excluded;
    std::size_t mirrored_directions = 0;
    std::size_t unresolved_refs = 0; // entries naming unknown identities

    std::uint32_t index_of(std::string_view id) const;
};

// Per measured node, keep a seeded random subset of exactly `r` references
// with pairwise-distinct advertised locations (duplicates are skipped and
// redrawn). Nodes that cannot field r such references are excluded with a
// reason. Directions missing from the counterpart's payload are mirrored.
AnalysisInput build_analysis_input(const std::vector<RawMeasurementFile>& files,
                                   const std::vector<Descriptor>& descriptors,
                                   std::size_t r, Seed seed);

// ------------------------------------------------------- consistency check

struct ConsistencyRow {
    std::string node;
    double distance_km = 0.0;
    std::string self_zone;     // "" when outside every zone
    std::string external_zone;
    bool country_conflict = false; // both zoned, and differently
};

ConsistencyRow location_consistency(const std::string& node,
                                    const geo::GeoPoint& self_loc,
                                    const geo::GeoPoint& external_loc,
                                    const geo::ZoneMap& zones);

struct ConsistencyReport {
    std::vector<ConsistencyRow> rows;
    double median_km = 0.0;
    double mean_km = 0.0;
    double conflict_fraction = 0.0;

    std::string to_csv() const;
};

ConsistencyReport consistency_report(std::vector<ConsistencyRow> rows);

// ------------------------------------------------------------ fetch helper

struct FetchTarget {
    std::string id;
    std::string url; // e.g. http://203.0.113.7:8000/verloc
};

// JSON: {"nodes": [{"id": "...", "url": "..."}, ...]}
struct FetchList {
    std::vector<FetchTarget> targets;
    std::string error; // non-empty when the list failed to parse
};
FetchList parse_fetch_list(std::string_view bytes);

struct FetchOutcome {
    std::string id;
    bool ok = false;
    int status = 0;    // HTTP status when a response arrived
    std::string error; // transport/parse failure otherwise
    std::filesystem::path path; // written payload on success
};

// Saves each payload to out_dir/<id>.json (id sanitized for the
// filesystem). Failures are isolated per target; the rest proceed.
// `parallelism` bounds concurrent requests.
std::vector<FetchOutcome> fetch_payloads(const std::vector<FetchTarget>& targets,
                                         const std::filesystem::path& out_dir,
                                         int timeout_ms = 5000,
                                         int parallelism = 4);

} // namespace verloc::ingest

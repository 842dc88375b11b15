#pragma once

// Spherical geometry on the WGS84-ish sphere (single radius, no ellipsoid):
// great-circle distances, unit-vector conversions, polygonal zones loaded
// from a JSON map, point-in-zone tests, and rectangular analysis grids.
//
// Zones are polygons in latitude/longitude. Containment uses a planar
// even-odd crossing test with inclusive boundaries, which is adequate for
// regional maps; polygons must not cross the antimeridian or enclose a pole.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace verloc::geo {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

struct GeoPoint {
    double lat_deg = 0.0;
    double lon_deg = 0.0;
};

// Validates latitude in [-90, 90] and normalizes longitude into (-180, 180].
GeoPoint make_point(double lat_deg, double lon_deg);
bool is_valid(const GeoPoint& p);

// Haversine great-circle distance in km. Symmetric, zero iff identical
// coordinates, and never exceeds half the sphere circumference.
double great_circle_km(const GeoPoint& a, const GeoPoint& b);

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

Vec3 to_unit(const GeoPoint& p);
GeoPoint from_unit(const Vec3& v);

// Great-circle distance between unit vectors via the chord length; stable
// for nearby points where acos of a dot product loses precision.
double arc_km(const Vec3& a, const Vec3& b);

// Moves a point by east/north kilometers in its local tangent plane.
// Approximation error is negligible for the few-degree offsets used here.
GeoPoint offset_km(const GeoPoint& p, double east_km, double north_km);

struct Bounds {
    double min_lat = 0.0, max_lat = 0.0;
    double min_lon = 0.0, max_lon = 0.0;
};

struct Zone {
    std::string id;
    std::vector<GeoPoint> vertices; // >= 3, implicit closing edge
};

// Even-odd crossing test in the lon/lat plane. Points on an edge or vertex
// count as inside.
bool point_in_polygon(const GeoPoint& p, const std::vector<GeoPoint>& vertices);

class ZoneMap {
  public:
    static ZoneMap load(const std::filesystem::path& path);
    static ZoneMap parse(const std::string& json_text);

    const std::vector<Zone>& zones() const { return zones_; }
    const Zone* find(std::string_view id) const;

    // First zone (ids ascending) containing the point, or nullptr. With a
    // non-overlapping map the order never matters; with overlap it makes the
    // answer deterministic.
    const Zone* zone_of(const GeoPoint& p) const;
    bool contains(std::string_view zone_id, const GeoPoint& p) const;

    Bounds bounds() const { return bounds_; }
    const Bounds& zone_bounds(std::size_t index) const { return boxes_[index]; }

    // Spherical polygon area, by signed triangulated excess.
    double zone_area_km2(std::string_view id) const;
    double total_area_km2() const;

  private:
    std::vector<Zone> zones_; // sorted by id
    std::vector<Bounds> boxes_;
    Bounds bounds_{};
    void index();
};

// Row-major inclusive lattice: latitude sweeps outer (south to north),
// longitude inner (west to east). Endpoints land on the lattice when the
// span is an integral multiple of the resolution.
std::vector<GeoPoint> make_grid(double min_lat, double max_lat,
                                double min_lon, double max_lon,
                                double resolution_deg);

} // namespace verloc::geo

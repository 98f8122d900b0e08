#pragma once

#include <numbers>
#include <string>
#include <string_view>

namespace microtrap
{
namespace constants
{
inline constexpr double pi = std::numbers::pi;
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double electron_mass = 9.1093837015e-31;      // kg
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
// 40Ca+ : neutral atomic mass minus one electron.
inline constexpr double calcium40_ion_mass = 39.962590863 * atomic_mass_unit - electron_mass;
inline constexpr double um_per_m = 1e6;
} // namespace constants

inline constexpr double deg_to_rad(double deg) { return deg * constants::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / constants::pi; }
inline constexpr double mhz_to_angular(double mhz) { return 2.0 * constants::pi * mhz * 1e6; }
inline constexpr double angular_to_mhz(double omega) { return omega / (2.0 * constants::pi * 1e6); }

// Parses "<number><unit>" and requires the unit to equal `expected`; throws ConfigError otherwise.
double parse_quantity(std::string_view text, std::string_view expected);

// Accepts "deg" or "rad" suffixes and returns radians.
double parse_angle(std::string_view text);

} // namespace microtrap

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace ptx {

// Material (and electrical) quantities tracked by the plant. Masses are kg,
// Electricity is kWh.
enum class Species : std::uint8_t { Water, Hydrogen, CO2, Methanol, Oxygen, Electricity };

inline constexpr std::size_t kSpeciesCount = 6;
inline constexpr std::array<Species, kSpeciesCount> kAllSpecies = {
    Species::Water, Species::Hydrogen, Species::CO2,
    Species::Methanol, Species::Oxygen, Species::Electricity};

template <class T>
using PerSpecies = std::array<T, kSpeciesCount>;

constexpr std::size_t idx(Species s) { return static_cast<std::size_t>(s); }

std::string_view to_string(Species s);
std::optional<Species> species_from_string(std::string_view name);

}  // namespace ptx

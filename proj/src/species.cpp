#include "ptx/species.hpp"

namespace ptx {

std::string_view to_string(Species s) {
  switch (s) {
    case Species::Water: return "water";
    case Species::Hydrogen: return "hydrogen";
    case Species::CO2: return "co2";
    case Species::Methanol: return "methanol";
    case Species::Oxygen: return "oxygen";
    case Species::Electricity: return "electricity";
  }
  return "?";
}

std::optional<Species> species_from_string(std::string_view name) {
  for (Species s : kAllSpecies) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

}  // namespace ptx

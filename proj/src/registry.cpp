#include "neuroverify/registry.hpp"

#include <cstdint>
#include <cstdio>
#include <set>

namespace neuroverify {

Registry::Registry(std::vector<RegionSpec> regions) : regions_(std::move(regions)) {
  if (regions_.empty()) throw ValidationError("registry: no regions");
  std::set<std::string> seen;
  for (const auto& r : regions_) {
    if (r.id.empty()) throw ValidationError("registry: empty region id");
    if (!seen.insert(r.id).second) throw ValidationError("registry: duplicate region '" + r.id + "'");
    if (!(r.weight > 0.0)) throw ValidationError("registry: weight of '" + r.id + "' must be > 0");
  }
}

Registry Registry::defaults() {
  return Registry({
      {"hippocampus", RegionDirection::Atrophy, 1.2},
      {"entorhinal_cortex", RegionDirection::Atrophy, 1.1},
      {"temporal_neocortex", RegionDirection::Atrophy, 1.0},
      {"amygdala", RegionDirection::Atrophy, 1.0},
      {"lateral_ventricles", RegionDirection::Enlargement, 1.0},
  });
}

Registry Registry::from_json(const nlohmann::json& j) {
  const auto& arr = j.is_object() ? j.at("regions") : j;
  if (!arr.is_array()) throw ValidationError("registry: expected an array of regions");
  std::vector<RegionSpec> regions;
  for (const auto& item : arr) {
    RegionSpec spec;
    spec.id = item.at("id").get<std::string>();
    auto dir = parse_region_direction(item.value("direction", std::string("atrophy")));
    if (!dir) throw ValidationError("registry: bad direction for '" + spec.id + "'");
    spec.direction = *dir;
    spec.weight = item.value("weight", 1.0);
    regions.push_back(std::move(spec));
  }
  return Registry(std::move(regions));
}

nlohmann::json Registry::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : regions_) {
    arr.push_back({{"id", r.id}, {"direction", to_string(r.direction)}, {"weight", r.weight}});
  }
  return {{"regions", arr}};
}

std::optional<std::size_t> Registry::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].id == id) return i;
  }
  return std::nullopt;
}

const RegionSpec& Registry::at(std::string_view id) const {
  auto i = index_of(id);
  if (!i) throw ValidationError("unknown region '" + std::string(id) + "'");
  return regions_[*i];
}

Registry Registry::with_equal_weights() const {
  auto copy = regions_;
  for (auto& r : copy) r.weight = 1.0;
  return Registry(std::move(copy));
}

std::string Registry::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace neuroverify

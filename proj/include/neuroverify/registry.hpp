#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "neuroverify/types.hpp"

namespace neuroverify {

struct RegionSpec {
  std::string id;
  RegionDirection direction = RegionDirection::Atrophy;
  double weight = 1.0;  // w_r in the anatomical score, > 0

  bool operator==(const RegionSpec&) const = default;
};

// Ordered set of assessed regions. Order is significant: reports, CSV columns
// and score vectors all follow registry order.
class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<RegionSpec> regions);

  // hippocampus 1.2, entorhinal_cortex 1.1, temporal_neocortex 1.0,
  // amygdala 1.0, lateral_ventricles 1.0 (enlargement).
  static Registry defaults();

  static Registry from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::vector<RegionSpec>& regions() const { return regions_; }
  std::size_t size() const { return regions_.size(); }
  const RegionSpec& operator[](std::size_t i) const { return regions_[i]; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  const RegionSpec& at(std::string_view id) const;  // throws ValidationError

  // Same regions with every weight set to 1.0.
  Registry with_equal_weights() const;

  // FNV-1a over the canonical JSON, hex encoded. Persisted alongside fitted
  // normative models so a model is never applied to a different registry.
  std::string hash() const;

  bool operator==(const Registry&) const = default;

 private:
  std::vector<RegionSpec> regions_;
};

}  // namespace neuroverify

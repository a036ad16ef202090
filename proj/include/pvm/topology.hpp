#pragma once

#include <string>
#include <vector>

#include "pvm/image.hpp"
#include "pvm/unit.hpp"

namespace pvm {

enum class FoveaKind { none = 0, central = 1, full = 2 };

// Model flavours compared in the experiments.
enum class ModelTag { base, foveated, uhr };

const char* to_string(ModelTag tag);
ModelTag parse_model_tag(const std::string& name);
ModelTag model_tag(FoveaKind kind);

struct ModelConfig {
  int view_w = 32;
  int view_h = 32;
  // Square grid edge per level, input level first.
  std::vector<int> level_grids{16, 8, 4, 3, 2, 1};
  FoveaKind fovea = FoveaKind::none;
  int fovea_k = 8;  // edge of the central block subdivided by FoveaKind::central
  int hidden_dim = 8;
  // Tile rectangles touching only at a corner count as lateral neighbours.
  bool corner_contact = true;

  bool operator==(const ModelConfig&) const = default;
};

// Throws ConfigError when the grids, view and fovea do not fit together.
void validate(const ModelConfig& config);

struct LevelInfo {
  int grid = 0;                 // edge of the construction grid
  std::vector<int> unit_ids;    // ascending

  bool operator==(const LevelInfo&) const = default;
};

struct HierarchyTopology {
  std::vector<LevelInfo> levels;
  std::vector<UnitSpec> units;                 // indexed by unit_id
  std::vector<std::vector<int>> lateral;       // ascending, symmetric
  std::vector<std::vector<int>> superior;      // ascending, next level up
  std::vector<std::vector<int>> inferior;      // ascending, next level down
  int topmost_id = 0;

  int unit_count() const { return static_cast<int>(units.size()); }
  int input_unit_count() const { return static_cast<int>(levels.front().unit_ids.size()); }

  bool operator==(const HierarchyTopology&) const = default;
};

HierarchyTopology build_uniform(const ModelConfig& config);
HierarchyTopology build_foveated(const ModelConfig& config);
HierarchyTopology build_uhr(const ModelConfig& config);

// Dispatches on config.fovea.
HierarchyTopology build_topology(const ModelConfig& config);

// Hidden-state sources forming a unit's context: self, laterals, superiors,
// then the topmost unit unless it already appears.
std::vector<int> context_layout(const HierarchyTopology& topology, int unit_id);

// Human-readable adjacency listing, one unit per line.
std::string describe(const HierarchyTopology& topology);

}  // namespace pvm

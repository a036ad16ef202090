#include "pvm/topology.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "pvm/errors.hpp"

namespace pvm {

const char* to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::base: return "base";
    case ModelTag::foveated: return "foveated";
    case ModelTag::uhr: return "uhr";
  }
  return "?";
}

ModelTag parse_model_tag(const std::string& name) {
  if (name == "base") return ModelTag::base;
  if (name == "foveated") return ModelTag::foveated;
  if (name == "uhr") return ModelTag::uhr;
  throw ConfigError("unknown model '" + name + "' (expected base, foveated or uhr)");
}

ModelTag model_tag(FoveaKind kind) {
  switch (kind) {
    case FoveaKind::none: return ModelTag::base;
    case FoveaKind::central: return ModelTag::foveated;
    case FoveaKind::full: return ModelTag::uhr;
  }
  return ModelTag::base;
}

void validate(const ModelConfig& config) {
  const auto& grids = config.level_grids;
  if (grids.empty()) throw ConfigError("level_grids is empty");
  for (std::size_t i = 0; i < grids.size(); ++i) {
    if (grids[i] < 1) throw ConfigError("level grid edges must be >= 1");
    if (i > 0 && grids[i] >= grids[i - 1]) {
      throw ConfigError("level_grids must be strictly decreasing");
    }
  }
  if (grids.back() != 1) throw ConfigError("top level grid must be 1 (a single unit)");
  if (config.hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (config.view_w < 1 || config.view_h < 1) throw ConfigError("view must be non-empty");
  const int g0 = grids.front();
  if (config.view_w % g0 != 0 || config.view_h % g0 != 0) {
    throw ConfigError("view " + std::to_string(config.view_w) + "x" +
                      std::to_string(config.view_h) + " is not divisible by input grid " +
                      std::to_string(g0));
  }
  const int tw = config.view_w / g0;
  const int th = config.view_h / g0;
  if (config.fovea != FoveaKind::none && grids.size() == 1) {
    throw ConfigError("subdividing needs at least one level above the input level");
  }
  if (config.fovea != FoveaKind::none && (tw % 2 != 0 || th % 2 != 0)) {
    throw ConfigError("subdividing requires even tile sizes, got " + std::to_string(tw) + "x" +
                      std::to_string(th));
  }
  if (config.fovea == FoveaKind::central && (config.fovea_k < 1 || config.fovea_k > g0)) {
    throw ConfigError("fovea block " + std::to_string(config.fovea_k) +
                      " does not fit the input grid " + std::to_string(g0));
  }
}

namespace {

bool rects_touch(const Rect& a, const Rect& b, bool corner_contact) {
  const bool x_meet = a.x <= b.x + b.w && b.x <= a.x + a.w;
  const bool y_meet = a.y <= b.y + b.h && b.y <= a.y + a.h;
  if (!x_meet || !y_meet) return false;
  if (corner_contact) return true;
  // Require a shared border segment of positive length.
  const int x_overlap = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const int y_overlap = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return x_overlap > 0 || y_overlap > 0;
}

// Row/col of the superior cell covering inferior index r when an n-grid maps
// onto an m-grid: block i spans [floor(i*n/m), floor((i+1)*n/m)). With n > m
// (enforced by validate) no block is empty.
int covering_block(int r, int n, int m) {
  for (int i = 0; i < m; ++i) {
    if (r < (i + 1) * n / m) return i;
  }
  return m - 1;
}

void link(HierarchyTopology& t, int a, int b) {
  t.lateral[a].push_back(b);
  t.lateral[b].push_back(a);
}

HierarchyTopology build(const ModelConfig& config,
                        const std::function<bool(int row, int col)>& subdivide) {
  validate(config);
  const auto& grids = config.level_grids;
  const int g0 = grids.front();
  const int tw = config.view_w / g0;
  const int th = config.view_h / g0;
  const int hd = config.hidden_dim;

  HierarchyTopology t;
  std::vector<int> parent_cell;  // input unit -> grid cell index
  bool any_subdivided = false;

  t.levels.push_back({g0, {}});
  for (int r = 0; r < g0; ++r) {
    for (int c = 0; c < g0; ++c) {
      std::vector<Rect> tiles;
      if (subdivide(r, c)) {
        any_subdivided = true;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            tiles.push_back({c * tw + dx * tw / 2, r * th + dy * th / 2, tw / 2, th / 2});
      } else {
        tiles.push_back({c * tw, r * th, tw, th});
      }
      for (const Rect& tile : tiles) {
        UnitSpec u;
        u.unit_id = static_cast<int>(t.units.size());
        u.level = 0;
        u.signal_dim = tile.area() * 3;
        u.hidden_dim = hd;
        u.tile = tile;
        t.levels[0].unit_ids.push_back(u.unit_id);
        t.units.push_back(u);
        parent_cell.push_back(r * g0 + c);
      }
    }
  }

  // Upper levels, row-major per level.
  std::vector<int> level_base{0};
  for (std::size_t l = 1; l < grids.size(); ++l) {
    level_base.push_back(static_cast<int>(t.units.size()));
    t.levels.push_back({grids[l], {}});
    for (int k = 0; k < grids[l] * grids[l]; ++k) {
      UnitSpec u;
      u.unit_id = static_cast<int>(t.units.size());
      u.level = static_cast<int>(l);
      u.hidden_dim = hd;
      t.levels[l].unit_ids.push_back(u.unit_id);
      t.units.push_back(u);
    }
  }

  const int n = t.unit_count();
  t.lateral.assign(n, {});
  t.superior.assign(n, {});
  t.inferior.assign(n, {});
  t.topmost_id = n - 1;

  // Input-level lateral edges.
  const auto& inputs = t.levels[0].unit_ids;
  if (any_subdivided) {
    for (std::size_t i = 0; i < inputs.size(); ++i)
      for (std::size_t j = i + 1; j < inputs.size(); ++j)
        if (rects_touch(*t.units[inputs[i]].tile, *t.units[inputs[j]].tile,
                        config.corner_contact))
          link(t, inputs[i], inputs[j]);
  } else {
    for (int r = 0; r < g0; ++r)
      for (int c = 0; c < g0; ++c) {
        const int id = r * g0 + c;
        if (c + 1 < g0) link(t, id, id + 1);
        if (r + 1 < g0) link(t, id, id + g0);
      }
  }

  // Upper-level lateral edges: 4-neighbour.
  for (std::size_t l = 1; l < grids.size(); ++l) {
    const int m = grids[l];
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) {
        const int id = level_base[l] + r * m + c;
        if (c + 1 < m) link(t, id, id + 1);
        if (r + 1 < m) link(t, id, id + m);
      }
  }

  // Superior fan-in by proportional blocks. Subdivided input units inherit
  // the superior of their parent cell.
  for (std::size_t l = 1; l < grids.size(); ++l) {
    const int nlo = grids[l - 1];
    const int m = grids[l];
    const auto& lower = t.levels[l - 1].unit_ids;
    for (std::size_t k = 0; k < lower.size(); ++k) {
      const int id = lower[k];
      const int cell = l == 1 ? parent_cell[id] : id - level_base[l - 1];
      const int sr = covering_block(cell / nlo, nlo, m);
      const int sc = covering_block(cell % nlo, nlo, m);
      const int sup = level_base[l] + sr * m + sc;
      t.superior[id].push_back(sup);
      t.inferior[sup].push_back(id);
    }
  }

  for (int id = 0; id < n; ++id) {
    std::sort(t.lateral[id].begin(), t.lateral[id].end());
    std::sort(t.superior[id].begin(), t.superior[id].end());
    std::sort(t.inferior[id].begin(), t.inferior[id].end());
  }
  for (int id = 0; id < n; ++id) {
    UnitSpec& u = t.units[id];
    if (u.level > 0) u.signal_dim = hd * static_cast<int>(t.inferior[id].size());
    u.context_dim = hd * static_cast<int>(context_layout(t, id).size());
  }
  return t;
}

}  // namespace

HierarchyTopology build_uniform(const ModelConfig& config) {
  return build(config, [](int, int) { return false; });
}

HierarchyTopology build_foveated(const ModelConfig& config) {
  ModelConfig c = config;
  c.fovea = FoveaKind::central;
  validate(c);
  const int g0 = c.level_grids.front();
  const int lo = (g0 - c.fovea_k) / 2;
  const int hi = lo + c.fovea_k;
  return build(c, [lo, hi](int r, int col) { return r >= lo && r < hi && col >= lo && col < hi; });
}

HierarchyTopology build_uhr(const ModelConfig& config) {
  ModelConfig c = config;
  c.fovea = FoveaKind::full;
  return build(c, [](int, int) { return true; });
}

HierarchyTopology build_topology(const ModelConfig& config) {
  switch (config.fovea) {
    case FoveaKind::none: return build_uniform(config);
    case FoveaKind::central: return build_foveated(config);
    case FoveaKind::full: return build_uhr(config);
  }
  throw ConfigError("unknown fovea kind");
}

std::vector<int> context_layout(const HierarchyTopology& topology, int unit_id) {
  std::vector<int> out{unit_id};
  out.insert(out.end(), topology.lateral[unit_id].begin(), topology.lateral[unit_id].end());
  out.insert(out.end(), topology.superior[unit_id].begin(), topology.superior[unit_id].end());
  if (std::find(out.begin(), out.end(), topology.topmost_id) == out.end()) {
    out.push_back(topology.topmost_id);
  }
  return out;
}

std::string describe(const HierarchyTopology& topology) {
  std::ostringstream os;
  os << "levels " << topology.levels.size() << " units " << topology.unit_count()
     << " topmost " << topology.topmost_id << "\n";
  auto list = [&os](const char* name, const std::vector<int>& ids) {
    os << ' ' << name << '[';
    for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? "," : "") << ids[i];
    os << ']';
  };
  for (const UnitSpec& u : topology.units) {
    os << "unit " << u.unit_id << " level " << u.level << " signal " << u.signal_dim
       << " context " << u.context_dim;
    if (u.tile) os << " tile " << u.tile->x << ',' << u.tile->y << ' ' << u.tile->w << 'x' << u.tile->h;
    list("lateral", topology.lateral[u.unit_id]);
    list("superior", topology.superior[u.unit_id]);
    list("inferior", topology.inferior[u.unit_id]);
    os << '\n';
  }
  return os.str();
}

}  // namespace pvm

#include "pvm/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pvm/errors.hpp"

namespace pvm {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    // GCC 11 lacks floating-point from_chars.
    std::istringstream is(text);
    is.imbue(std::locale::classic());
    if (!(is >> value) || !(is >> std::ws).eof()) {
      throw ConfigError(key + ": expected a number, got '" + text + "'");
    }
  } else {
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError(key + ": expected an integer, got '" + text + "'");
    }
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    parts.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return parts;
}

FoveaKind parse_fovea(const std::string& text) {
  if (text == "none") return FoveaKind::none;
  if (text == "central") return FoveaKind::central;
  if (text == "full") return FoveaKind::full;
  throw ConfigError("model.fovea: expected none, central or full, got '" + text + "'");
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

std::map<std::string, Setter> setters(RunConfig& c) {
  auto& m = c.model;
  auto& l = c.learning;
  auto& s = c.saccade;
  auto& io = c.io;
  auto& x = c.experiment;
  auto& sc = x.scenario;
  auto int_of = [](int& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_number<int>(k, v); };
  };
  auto real_of = [](double& dst) {
    return
        [&dst](const std::string& k, const std::string& v) { dst = parse_number<double>(k, v); };
  };
  auto u64_of = [](std::uint64_t& dst) {
    return [&dst](const std::string& k, const std::string& v) {
      dst = parse_number<std::uint64_t>(k, v);
    };
  };
  auto str_of = [](std::string& dst) {
    return [&dst](const std::string&, const std::string& v) { dst = v; };
  };

  return {
      {"model.view_w", int_of(m.view_w)},
      {"model.view_h", int_of(m.view_h)},
      {"model.level_grids",
       [&m](const std::string& k, const std::string& v) {
         m.level_grids.clear();
         for (const auto& part : split(v, ',')) m.level_grids.push_back(parse_number<int>(k, part));
       }},
      {"model.fovea", [&m](const std::string&, const std::string& v) { m.fovea = parse_fovea(v); }},
      {"model.model",
       [&m](const std::string&, const std::string& v) {
         switch (parse_model_tag(v)) {
           case ModelTag::base: m.fovea = FoveaKind::none; break;
           case ModelTag::foveated: m.fovea = FoveaKind::central; break;
           case ModelTag::uhr: m.fovea = FoveaKind::full; break;
         }
       }},
      {"model.fovea_k", int_of(m.fovea_k)},
      {"model.hidden_dim", int_of(m.hidden_dim)},
      {"model.corner_contact",
       [&m](const std::string& k, const std::string& v) { m.corner_contact = parse_bool(k, v); }},

      {"learning.learning_rate", real_of(l.learning_rate)},
      {"learning.tau_integral", real_of(l.tau_integral)},
      {"learning.seed", u64_of(l.seed)},

      {"saccade.omega_dt", real_of(s.omega_dt)},
      {"saccade.gamma", real_of(s.gamma)},
      {"saccade.tau_threshold", real_of(s.tau_threshold)},
      {"saccade.jitter", int_of(s.jitter)},
      {"saccade.window_w", int_of(s.window_w)},
      {"saccade.window_h", int_of(s.window_h)},

      {"io.frames", str_of(io.frames)},
      {"io.out", str_of(io.out)},
      {"io.checkpoint", str_of(io.checkpoint)},

      {"experiment.n_trials", int_of(x.n_trials)},
      {"experiment.seed", u64_of(x.seed)},
      {"experiment.train_frames", int_of(x.train_frames)},
      {"experiment.progress_every", int_of(x.progress_every)},
      {"experiment.scenario",
       [&sc](const std::string&, const std::string& v) { sc.kind = parse_scenario_kind(v); }},
      {"experiment.frame_w", int_of(sc.frame_w)},
      {"experiment.frame_h", int_of(sc.frame_h)},
      {"experiment.n_frames", int_of(sc.n_frames)},
      {"experiment.patch_x", int_of(sc.patch.x)},
      {"experiment.patch_y", int_of(sc.patch.y)},
      {"experiment.patch_size", int_of(sc.patch_size)},
      {"experiment.period", int_of(sc.period)},
      {"experiment.object_w", int_of(sc.object_w)},
      {"experiment.object_h", int_of(sc.object_h)},
      {"experiment.speed", real_of(sc.speed)},
      // "x:y; x:y; ..."
      {"experiment.waypoints",
       [&sc](const std::string& k, const std::string& v) {
         sc.waypoints.clear();
         for (const auto& pt : split(v, ';')) {
           if (pt.empty()) continue;
           const auto xy = split(pt, ':');
           if (xy.size() != 2) throw ConfigError(k + ": expected x:y pairs, got '" + pt + "'");
           sc.waypoints.push_back({parse_number<int>(k, xy[0]), parse_number<int>(k, xy[1])});
         }
       }},
  };
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig config;
  const auto table = setters(config);
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const auto it = table.find(name);
      if (it == table.end()) throw ConfigError("config: unknown key '" + name + "'");
      it->second(name, node.get_value<std::string>());
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_run_config(buf.str());
}

void finalize(RunConfig& c) {
  validate(c.model);
  if (!(c.learning.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(c.learning.tau_integral >= 0.0 && c.learning.tau_integral <= 1.0)) {
    throw ConfigError("tau_integral must lie in [0, 1]");
  }
  c.saccade.view_w = c.model.view_w;
  c.saccade.view_h = c.model.view_h;
  validate(c.saccade);
  if (c.experiment.n_trials < 0) throw ConfigError("n_trials must be >= 0");
  if (c.experiment.train_frames < 0) throw ConfigError("train_frames must be >= 0");
  if (c.experiment.progress_every < 1) throw ConfigError("progress_every must be >= 1");
}

}  // namespace pvm

#include "koopnav/dataset.hpp"

#include <omp.h>

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "koopnav/geometry.hpp"
#include "koopnav/io.hpp"
#include "koopnav/rng.hpp"

namespace koopnav {

using nlohmann::json;

void CollectionConfig::validate(const PlantParams& plant) const {
  plant.validate();
  if (episodes <= 0) throw ConfigError("collect: episodes must be positive");
  if (!(duration_s > 0.0)) {
    throw ConfigError("collect: duration must be positive");
  }
  if (!(resample_interval_s > 0.0)) {
    throw ConfigError("collect: resample interval must be positive");
  }
  const long long steps = std::llround(duration_s / plant.dt);
  if (window_h < 1 || window_h > steps) {
    throw ConfigError("collect: window length must be in [1, steps]");
  }
}

namespace {

Trajectory collect_episode(const PlantParams& plant,
                           const CollectionConfig& config, int episode) {
  const long long steps = std::llround(config.duration_s / plant.dt);
  const long long hold =
      std::max<long long>(1, std::llround(config.resample_interval_s / plant.dt));

  Rng cmd_rng(config.seed, 2ULL * static_cast<std::uint64_t>(episode));
  Rng noise_rng(config.seed, 2ULL * static_cast<std::uint64_t>(episode) + 1);

  Trajectory traj;
  traj.dt = plant.dt;
  traj.states.reserve(steps + 1);
  traj.commands.reserve(steps);
  traj.states.push_back(State{});

  Command held{};
  for (long long t = 0; t < steps; ++t) {
    if (t % hold == 0) {
      held = Command{cmd_rng.uniform(plant.box.lo[0], plant.box.hi[0]),
                     cmd_rng.uniform(plant.box.lo[1], plant.box.hi[1]),
                     cmd_rng.uniform(plant.box.lo[2], plant.box.hi[2])};
    }
    traj.commands.push_back(held);
    traj.states.push_back(
        plant_step(traj.states.back(), held, plant,
                   plant.has_noise() ? &noise_rng : nullptr));
  }
  return traj;
}

}  // namespace

std::vector<Trajectory> collect(const PlantParams& plant,
                                const CollectionConfig& config,
                                ExecMode mode) {
  config.validate(plant);
  std::vector<Trajectory> out(config.episodes);
  if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int e = 0; e < config.episodes; ++e) {
      out[e] = collect_episode(plant, config, e);
    }
  } else {
    for (int e = 0; e < config.episodes; ++e) {
      out[e] = collect_episode(plant, config, e);
    }
  }
  return out;
}

WindowSequence localize_window(const Trajectory& traj, int start, int h) {
  const int n = static_cast<int>(traj.commands.size());
  if (h < 1 || start < 0 || start + h > n) {
    throw ConfigError("localize_window: window out of range");
  }
  const Pose2 frame = traj.states[start].pose();
  WindowSequence w;
  w.states.reserve(h + 1);
  w.commands.reserve(h);
  for (int j = 0; j <= h; ++j) {
    w.states.push_back(to_frame(traj.states[start + j], frame));
  }
  for (int j = 0; j < h; ++j) {
    const Command& u = traj.commands[start + j];
    // Body commands become window-frame commands through the localized
    // heading at their own step.
    const Vec2 rotated = rotate(w.states[j].theta, Vec2(u.vx, u.vy));
    w.commands.push_back(Command{rotated.x(), rotated.y(), u.omega});
  }
  return w;
}

std::vector<WindowSequence> extract_windows(const Trajectory& traj, int h) {
  const int n = static_cast<int>(traj.commands.size());
  if (h < 1 || h > n) throw ConfigError("extract_windows: bad window length");
  std::vector<WindowSequence> out;
  out.reserve(n - h + 1);
  for (int start = 0; start + h <= n; ++start) {
    out.push_back(localize_window(traj, start, h));
  }
  return out;
}

std::vector<std::vector<std::size_t>> split_indices(
    std::size_t n, std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: no fractions given");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<std::size_t> sizes(fractions.size());
  std::size_t used = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    sizes[k] = static_cast<std::size_t>(std::floor(fractions[k] * n));
    used += sizes[k];
  }
  for (std::size_t k = 0; used < n; k = (k + 1) % sizes.size()) {
    ++sizes[k];
    ++used;
  }

  std::vector<std::vector<std::size_t>> groups(fractions.size());
  std::size_t pos = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    groups[k].assign(order.begin() + pos, order.begin() + pos + sizes[k]);
    pos += sizes[k];
  }
  return groups;
}

std::vector<TransitionPair> transition_pairs(
    std::span<const WindowSequence> windows, bool include_tail) {
  std::vector<TransitionPair> pairs;
  for (const WindowSequence& w : windows) {
    const int h = static_cast<int>(w.commands.size());
    if (w.states.size() != w.commands.size() + 1 || h < 1) {
      throw ConfigError("transition_pairs: malformed window");
    }
    for (int t = 0; t + 1 < h; ++t) {
      pairs.push_back(TransitionPair{&w, t, true});
    }
    if (include_tail) {
      pairs.push_back(TransitionPair{&w, h - 1, false});
    }
  }
  return pairs;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t,px,py,theta,vx,vy,omega,vhat_x,vhat_y,omega_hat\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const State& x = traj.states[i];
    out += format_double(static_cast<double>(i) * traj.dt);
    for (double v : {x.px, x.py, x.theta, x.vx, x.vy, x.omega}) {
      out += ',';
      out += format_double(v);
    }
    if (i < traj.commands.size()) {
      const Command& u = traj.commands[i];
      for (double v : {u.vx, u.vy, u.omega}) {
        out += ',';
        out += format_double(v);
      }
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(begin));
      break;
    }
    fields.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
  return fields;
}

json plant_to_json(const PlantParams& p) {
  return json{{"dt", p.dt},
              {"tau_v", p.tau_v},
              {"tau_omega", p.tau_omega},
              {"kappa", p.kappa},
              {"kappa_drift", p.kappa_drift},
              {"noise_std", {p.noise_std[0], p.noise_std[1], p.noise_std[2]}},
              {"box_lo", {p.box.lo[0], p.box.lo[1], p.box.lo[2]}},
              {"box_hi", {p.box.hi[0], p.box.hi[1], p.box.hi[2]}}};
}

PlantParams plant_from_json(const json& j) {
  PlantParams p;
  p.dt = j.at("dt").get<double>();
  p.tau_v = j.at("tau_v").get<double>();
  p.tau_omega = j.at("tau_omega").get<double>();
  p.kappa = j.at("kappa").get<double>();
  p.kappa_drift = j.at("kappa_drift").get<double>();
  for (int i = 0; i < 3; ++i) {
    p.noise_std[i] = j.at("noise_std").at(i).get<double>();
    p.box.lo[i] = j.at("box_lo").at(i).get<double>();
    p.box.hi[i] = j.at("box_hi").at(i).get<double>();
  }
  return p;
}

}  // namespace

Trajectory parse_trajectory_csv(const std::string& text) {
  Trajectory traj;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "t,px,py,theta,vx,vy,omega,vhat_x,vhat_y,omega_hat") {
    throw IoError("trajectory csv: bad header");
  }
  bool have_dt = false;
  double prev_t = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) throw IoError("trajectory csv: bad field count");
    const double t = parse_double(f[0]);
    if (!traj.states.empty() && !have_dt) {
      traj.dt = t - prev_t;
      have_dt = true;
    }
    prev_t = t;
    traj.states.push_back(State{parse_double(f[1]), parse_double(f[2]),
                                parse_double(f[3]), parse_double(f[4]),
                                parse_double(f[5]), parse_double(f[6])});
    if (!f[7].empty()) {
      traj.commands.push_back(
          Command{parse_double(f[7]), parse_double(f[8]), parse_double(f[9])});
    }
  }
  if (traj.states.size() != traj.commands.size() + 1) {
    throw IoError("trajectory csv: command column count mismatch");
  }
  return traj;
}

void write_dataset(const std::filesystem::path& dir,
                   std::span<const Trajectory> trajectories,
                   const CollectionConfig& config, const PlantParams& plant) {
  ensure_dir(dir);
  Fnv1a hash;
  std::vector<std::string> files;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%04zu.csv", i);
    const std::string csv = trajectory_csv(trajectories[i]);
    hash.update(csv);
    write_file(dir / name, csv);
    files.emplace_back(name);
  }

  json manifest{{"format_version", 1},
                {"kind", "dataset"},
                {"episodes", config.episodes},
                {"duration_s", config.duration_s},
                {"resample_interval_s", config.resample_interval_s},
                {"window_h", config.window_h},
                {"seed", config.seed},
                {"plant", plant_to_json(plant)},
                {"files", files},
                {"data_hash", hash.hex()}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("dataset manifest: " + std::string(e.what()));
  }

  LoadedDataset out;
  try {
    out.manifest.config.episodes = manifest.at("episodes").get<int>();
    out.manifest.config.duration_s = manifest.at("duration_s").get<double>();
    out.manifest.config.resample_interval_s =
        manifest.at("resample_interval_s").get<double>();
    out.manifest.config.window_h = manifest.at("window_h").get<int>();
    out.manifest.config.seed = manifest.at("seed").get<std::uint64_t>();
    out.manifest.plant = plant_from_json(manifest.at("plant"));
    out.manifest.files =
        manifest.at("files").get<std::vector<std::string>>();
    out.manifest.data_hash = manifest.at("data_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError("dataset manifest: " + std::string(e.what()));
  }

  Fnv1a hash;
  for (const std::string& name : out.manifest.files) {
    const std::string csv = read_file(dir / name);
    hash.update(csv);
    out.trajectories.push_back(parse_trajectory_csv(csv));
  }
  if (hash.hex() != out.manifest.data_hash) {
    throw IoError("dataset data_hash mismatch in " + dir.string());
  }
  return out;
}

}  // namespace koopnav

#include "mobsense/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mobsense {

namespace pt = boost::property_tree;

namespace {

// Key -> line number, gathered by a light scan so validation errors can point into the file.
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      lines.emplace(section, number);
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos) lines.emplace(section + "." + trim(t.substr(0, eq)), number);
  }
  return lines;
}

class SectionReader {
 public:
  SectionReader(std::string name, const pt::ptree& tree, const std::map<std::string, int>& lines)
      : name_(std::move(name)), tree_(tree), lines_(lines) {}

  ConfigError error(const std::string& key, const std::string& message) const {
    const std::string full = name_ + "." + key;
    const auto it = lines_.find(full);
    return ConfigError(full, it == lines_.end() ? 0 : it->second, message);
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return tree_.find(key) != tree_.not_found();
  }

  std::string text(const std::string& key) {
    used_.insert(key);
    return tree_.find(key)->second.data();
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? parse_number(key, text(key)) : fallback;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key) || trimmed(text(key)).empty()) return std::nullopt;
    return parse_number(key, text(key));
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const double v = parse_number(key, text(key));
    if (v != std::floor(v)) throw error(key, "expected an integer");
    return static_cast<int>(v);
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const std::string s = trimmed(text(key));
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw error(key, "expected an unsigned integer");
    return v;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string s = trimmed(text(key));
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw error(key, "expected true or false");
  }

  Vector vector(const std::string& key, const Vector& fallback) {
    if (!has(key)) return fallback;
    const std::string s = trimmed(text(key));
    std::vector<double> values;
    if (!s.empty()) {
      std::stringstream in(s);
      std::string item;
      while (std::getline(in, item, ',')) values.push_back(parse_number(key, item));
    }
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }

  Vec2 point(const std::string& key, const Vec2& fallback) {
    const Vector v = vector(key, fallback);
    if (v.size() != 2) throw error(key, "expected two comma-separated numbers");
    return v;
  }

  Matrix matrix(const std::string& key, int rows, int cols, const Matrix& fallback) {
    if (!has(key)) return fallback;
    const Vector v = vector(key, Vector());
    if (v.size() != rows * cols) {
      throw error(key, "expected " + std::to_string(rows * cols) + " row-major entries");
    }
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), rows, cols);
  }

  void reject_unknown() const {
    for (const auto& [key, child] : tree_) {
      if (!used_.contains(key)) throw error(key, "unknown key");
    }
  }

 private:
  static std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  double parse_number(const std::string& key, const std::string& raw) const {
    const std::string s = trimmed(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw error(key, "cannot parse number '" + s + "'");
    }
    return v;
  }

  std::string name_;
  const pt::ptree& tree_;
  const std::map<std::string, int>& lines_;
  std::set<std::string> used_;
};

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string fmt(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v(i));
  }
  return out;
}

std::string fmt_row_major(const Matrix& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
  return fmt(Vector(Eigen::Map<const Vector>(r.data(), r.size())));
}

bool is_single_integrator(const SensorSpec& s) {
  return s.alpha.rows() == 2 && s.alpha.cols() == 2 && s.beta.rows() == 2 && s.beta.cols() == 2 &&
         s.alpha.isZero(0.0) && s.beta.isIdentity(0.0);
}

KernelSpec read_kernel(SectionReader& r, const KernelSpec& fallback) {
  KernelSpec k = fallback;
  k.amplitude = r.number("amplitude", k.amplitude);
  k.pair_length_sq = r.number("pair_length_sq", k.pair_length_sq);
  if (r.has("center_length_sq")) k.center_length_sq = r.optional_number("center_length_sq");
  return k;
}

int line_of_section(const std::map<std::string, int>& lines, const std::string& name) {
  const auto it = lines.find(name);
  return it == lines.end() ? 0 : it->second;
}

int section_index(const std::string& name, const std::string& prefix) {
  if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return -1;
  const std::string digits = name.substr(prefix.size());
  if (!std::all_of(digits.begin(), digits.end(), ::isdigit)) return -1;
  return std::stoi(digits);
}

}  // namespace

ConfigError::ConfigError(const std::string& key, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + key +
                         ": " + message),
      key_(key),
      line_(line) {}

void ScenarioSpec::validate() const {
  field.validate();
  grid.validate();
  if (order < 1) throw std::invalid_argument("model.order must be >= 1");
  if (fleet.empty()) throw std::invalid_argument("scenario needs at least one sensor");
  for (const SensorSpec& s : fleet) s.validate();
  if (!(solver.omega > 0.0 && solver.omega <= 1.0)) {
    throw std::invalid_argument("solver.omega must be in (0, 1]");
  }
  if (!(solver.tol > 0.0)) throw std::invalid_argument("solver.tol must be > 0");
  if (solver.max_iter < 1) throw std::invalid_argument("solver.max_iter must be >= 1");
  if (!(solver.uncertainty_weight >= 0.0)) {
    throw std::invalid_argument("solver.uncertainty_weight must be >= 0");
  }
  mobility.validate(assemble_fleet(fleet, field.flow));
}

ScenarioSpec reference_scenario() {
  ScenarioSpec spec;
  spec.grid = TimeGrid::make(2.0, 0.01);
  spec.fleet.push_back(SensorSpec::single_integrator(Vec2(0.3, 0.1), 0.05, 0.2, 0.5));
  return spec;
}

ScenarioSpec parse_scenario(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("<file>", static_cast<int>(e.line()), e.message());
  }
  const auto lines = key_lines(text);

  ScenarioSpec spec;
  spec.fleet.clear();
  bool saw_meta = false;
  std::map<int, SensorSpec> sensors;
  std::map<int, HazardBump> hazards;
  double horizon = spec.grid.horizon;
  double step = spec.grid.step;

  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) {
      throw ConfigError(name, lines.contains("." + name) ? lines.at("." + name) : 0,
                        "key outside of any section");
    }
    SectionReader r(name, section, lines);
    if (name == "meta") {
      saw_meta = true;
      const int schema = r.integer("schema", kScenarioSchemaVersion);
      if (schema != kScenarioSchemaVersion) {
        throw r.error("schema", "unsupported schema version " + std::to_string(schema));
      }
    } else if (name == "field") {
      FieldSpec& f = spec.field;
      f.diffusion_coeff = r.number("diffusion", f.diffusion_coeff);
      f.flow = r.point("flow", f.flow);
      f.uncertainty_peak = r.point("peak", f.uncertainty_peak);
      f.kernel_scale = r.number("kernel_scale", f.kernel_scale);
      f.initial_mean_coeffs = r.vector("initial_mean", f.initial_mean_coeffs);
    } else if (name == "init_kernel") {
      spec.field.init_kernel = read_kernel(r, spec.field.init_kernel);
    } else if (name == "process_kernel") {
      spec.field.process_kernel = read_kernel(r, spec.field.process_kernel);
    } else if (name == "grid") {
      horizon = r.number("horizon", horizon);
      step = r.number("step", step);
    } else if (name == "model") {
      spec.order = r.integer("order", spec.order);
    } else if (name == "solver") {
      spec.solver.omega = r.number("omega", spec.solver.omega);
      spec.solver.tol = r.number("tol", spec.solver.tol);
      spec.solver.max_iter = r.integer("max_iter", spec.solver.max_iter);
      spec.solver.uncertainty_weight = r.number("uncertainty_weight", spec.solver.uncertainty_weight);
      if (r.has("relaxation")) {
        const std::string mode = r.text("relaxation");
        if (mode == "fixed") {
          spec.solver.relaxation = Relaxation::fixed;
        } else if (mode == "bb") {
          spec.solver.relaxation = Relaxation::barzilai_borwein;
        } else {
          throw r.error("relaxation", "expected fixed or bb");
        }
      }
    } else if (name == "clamps") {
      spec.clamps.p_max = r.optional_number("p_max");
      spec.clamps.a_max = r.optional_number("a_max");
    } else if (name == "mobility") {
      spec.mobility.terminal_weight = r.number("terminal_weight", spec.mobility.terminal_weight);
      spec.mobility.terminal_target = r.vector("terminal_target", spec.mobility.terminal_target);
      if (r.has("penalty")) {
        const Vector v = r.vector("penalty", Vector());
        const int m = static_cast<int>(std::lround(std::sqrt(double(v.size()))));
        if (m * m != v.size() || m == 0) throw r.error("penalty", "expected a square row-major matrix");
        spec.mobility.penalty = r.matrix("penalty", m, m, Matrix());
      }
    } else if (name == "run") {
      spec.seed = r.unsigned_integer("seed", spec.seed);
    } else if (const int idx = section_index(name, "sensor"); idx >= 0) {
      SensorSpec s = SensorSpec::single_integrator(Vec2(0.3, 0.1));
      const std::string dynamics = r.has("dynamics") ? r.text("dynamics") : "single_integrator";
      if (dynamics == "linear") {
        const int n = r.integer("state_dim", 2);
        const int m = r.integer("input_dim", 2);
        if (n < 2 || m < 1) throw r.error("state_dim", "need state_dim >= 2 and input_dim >= 1");
        if (!r.has("alpha") || !r.has("beta")) throw r.error("alpha", "linear dynamics need alpha and beta");
        s.alpha = r.matrix("alpha", n, n, Matrix());
        s.beta = r.matrix("beta", n, m, Matrix());
        s.init_state = Vector::Zero(n);
        s.init_state.head<2>() = Vec2(0.3, 0.1);
      } else if (dynamics != "single_integrator") {
        throw r.error("dynamics", "expected single_integrator or linear");
      }
      s.init_state = r.vector("init_state", s.init_state);
      s.footprint_radius = r.number("radius", s.footprint_radius);
      s.noise_var = r.number("noise_var", s.noise_var);
      s.guidance_penalty = r.number("gamma", s.guidance_penalty);
      s.drift_in_flow = r.boolean("drift_in_flow", s.drift_in_flow);
      try {
        s.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(name, line_of_section(lines, name), e.what());
      }
      sensors[idx] = s;
    } else if (const int idx = section_index(name, "hazard"); idx >= 0) {
      HazardBump b;
      b.amplitude = r.number("amplitude", b.amplitude);
      b.center = r.point("center", b.center);
      b.width = r.number("width", b.width);
      hazards[idx] = b;
    } else {
      throw ConfigError(name, line_of_section(lines, name), "unknown section");
    }
    r.reject_unknown();
  }
  (void)saw_meta;

  spec.grid.horizon = horizon;
  spec.grid.step = step;
  spec.grid.count = step > 0.0 ? static_cast<int>(std::lround(horizon / step)) : 0;
  for (auto& [idx, s] : sensors) spec.fleet.push_back(s);
  for (auto& [idx, b] : hazards) spec.mobility.hazards.push_back(b);

  auto line_of = [&](const std::string& key) { return lines.contains(key) ? lines.at(key) : 0; };
  try {
    spec.grid.validate();
  } catch (const std::invalid_argument& e) {
    const std::string key =
        std::string(e.what()).rfind("grid.horizon", 0) == 0 ? "grid.horizon" : "grid.step";
    throw ConfigError(key, line_of(key), e.what());
  }
  try {
    spec.field.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("field", line_of("field"), e.what());
  }
  if (spec.fleet.empty()) throw ConfigError("sensor1", 0, "at least one [sensorN] section is required");
  if (spec.order < 1) throw ConfigError("model.order", line_of("model.order"), "must be >= 1");
  if (spec.field.initial_mean_coeffs.size() != 0 &&
      spec.field.initial_mean_coeffs.size() != spec.order * spec.order) {
    throw ConfigError("field.initial_mean", line_of("field.initial_mean"),
                      "expected N^2 coefficients");
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", 0, e.what());
  }
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open configuration file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::string serialize_scenario(const ScenarioSpec& spec) {
  std::ostringstream out;
  out << "[meta]\nschema = " << kScenarioSchemaVersion << "\n\n";
  const FieldSpec& f = spec.field;
  out << "[field]\n"
      << "diffusion = " << fmt(f.diffusion_coeff) << "\n"
      << "flow = " << fmt(Vector(f.flow)) << "\n"
      << "peak = " << fmt(Vector(f.uncertainty_peak)) << "\n"
      << "kernel_scale = " << fmt(f.kernel_scale) << "\n"
      << "initial_mean = " << fmt(f.initial_mean_coeffs) << "\n\n";
  auto kernel = [&](const char* name, const KernelSpec& k) {
    out << "[" << name << "]\n"
        << "amplitude = " << fmt(k.amplitude) << "\n"
        << "pair_length_sq = " << fmt(k.pair_length_sq) << "\n"
        << "center_length_sq = " << (k.center_length_sq ? fmt(*k.center_length_sq) : "") << "\n\n";
  };
  kernel("init_kernel", f.init_kernel);
  kernel("process_kernel", f.process_kernel);
  out << "[grid]\nhorizon = " << fmt(spec.grid.horizon) << "\nstep = " << fmt(spec.grid.step)
      << "\n\n";
  out << "[model]\norder = " << spec.order << "\n\n";
  out << "[solver]\nomega = " << fmt(spec.solver.omega) << "\ntol = " << fmt(spec.solver.tol)
      << "\nmax_iter = " << spec.solver.max_iter
      << "\nuncertainty_weight = " << fmt(spec.solver.uncertainty_weight) << "\nrelaxation = "
      << (spec.solver.relaxation == Relaxation::fixed ? "fixed" : "bb") << "\n\n";
  out << "[clamps]\np_max = " << (spec.clamps.p_max ? fmt(*spec.clamps.p_max) : "")
      << "\na_max = " << (spec.clamps.a_max ? fmt(*spec.clamps.a_max) : "") << "\n\n";
  out << "[mobility]\nterminal_weight = " << fmt(spec.mobility.terminal_weight)
      << "\nterminal_target = " << fmt(spec.mobility.terminal_target) << "\n";
  if (spec.mobility.penalty) out << "penalty = " << fmt_row_major(*spec.mobility.penalty) << "\n";
  out << "\n[run]\nseed = " << spec.seed << "\n";
  for (std::size_t i = 0; i < spec.mobility.hazards.size(); ++i) {
    const HazardBump& b = spec.mobility.hazards[i];
    out << "\n[hazard" << i + 1 << "]\namplitude = " << fmt(b.amplitude)
        << "\ncenter = " << fmt(Vector(b.center)) << "\nwidth = " << fmt(b.width) << "\n";
  }
  for (std::size_t i = 0; i < spec.fleet.size(); ++i) {
    const SensorSpec& s = spec.fleet[i];
    out << "\n[sensor" << i + 1 << "]\n";
    if (is_single_integrator(s)) {
      out << "dynamics = single_integrator\n";
    } else {
      out << "dynamics = linear\nstate_dim = " << s.state_dim() << "\ninput_dim = " << s.input_dim()
          << "\nalpha = " << fmt_row_major(s.alpha) << "\nbeta = " << fmt_row_major(s.beta) << "\n";
    }
    out << "init_state = " << fmt(s.init_state) << "\nradius = " << fmt(s.footprint_radius)
        << "\nnoise_var = " << fmt(s.noise_var) << "\ngamma = " << fmt(s.guidance_penalty)
        << "\ndrift_in_flow = " << (s.drift_in_flow ? "true" : "false") << "\n";
  }
  return out.str();
}

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_scenario(spec);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace mobsense

#include "ccbm/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace ccbm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t pos; (pos = s.find(sep, start)) != std::string::npos; start = pos + 1)
    out.push_back(trim(s.substr(start, pos - start)));
  out.push_back(trim(s.substr(start)));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0;
  std::string s = trim(v);
  if (!s.empty() && s[0] == '+') s.erase(0, 1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  return x;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const std::string s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Entry {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

void add_double(std::map<std::string, Entry>& t, const std::string& key, double RunConfig::*field) {
  t[key] = {[field](const RunConfig& c) { return fmt::format("{}", c.*field); },
            [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_double(k, v); }};
}

template <class Get, class Set>
void add(std::map<std::string, Entry>& t, const std::string& key, Get get, Set set) {
  t[key] = {get, set};
}

void add_shape(std::map<std::string, Entry>& t, const std::string& prefix, ShapeSpec RunConfig::*shape) {
  add(t, prefix + ".kind", [shape](const RunConfig& c) { return to_string((c.*shape).kind); },
      [shape](RunConfig& c, const std::string& k, const std::string& v) {
        try {
          (c.*shape).kind = parse_shape_kind(trim(v));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(k + ": " + e.what());
        }
      });
  auto num = [&](const std::string& name, double ShapeSpec::*f) {
    add(t, prefix + "." + name, [shape, f](const RunConfig& c) { return fmt::format("{}", (c.*shape).*f); },
        [shape, f](RunConfig& c, const std::string& k, const std::string& v) { (c.*shape).*f = parse_double(k, v); });
  };
  num("radius", &ShapeSpec::radius);
  num("radius_x", &ShapeSpec::radius_x);
  num("radius_y", &ShapeSpec::radius_y);
  num("side", &ShapeSpec::side);
  num("scale", &ShapeSpec::scale);
  num("phase", &ShapeSpec::phase);
  add(t, prefix + ".center_x", [shape](const RunConfig& c) { return fmt::format("{}", (c.*shape).center.x()); },
      [shape](RunConfig& c, const std::string& k, const std::string& v) { (c.*shape).center.x() = parse_double(k, v); });
  add(t, prefix + ".center_y", [shape](const RunConfig& c) { return fmt::format("{}", (c.*shape).center.y()); },
      [shape](RunConfig& c, const std::string& k, const std::string& v) { (c.*shape).center.y() = parse_double(k, v); });
  add(t, prefix + ".samples", [shape](const RunConfig& c) { return fmt::format("{}", (c.*shape).samples); },
      [shape](RunConfig& c, const std::string& k, const std::string& v) {
        (c.*shape).samples = static_cast<int>(parse_int(k, v));
      });
  add(t, prefix + ".file", [shape](const RunConfig& c) { return (c.*shape).file; },
      [shape](RunConfig& c, const std::string&, const std::string& v) { (c.*shape).file = trim(v); });
}

std::string bound_text(const BoundSetting& b) {
  switch (b.kind) {
    case BoundSetting::Kind::truth_min: return "truth-min";
    case BoundSetting::Kind::truth_max: return "truth-max";
    case BoundSetting::Kind::value: return fmt::format("{}", b.value);
  }
  return "?";
}

BoundSetting parse_bound(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  if (s == "truth-min") return {BoundSetting::Kind::truth_min, 0.0};
  if (s == "truth-max") return {BoundSetting::Kind::truth_max, 0.0};
  return {BoundSetting::Kind::value, parse_double(key, s)};
}

std::string join_kinds(const std::vector<GradientKind>& ks) {
  std::string s;
  for (std::size_t i = 0; i < ks.size(); ++i) s += (i ? "," : "") + to_string(ks[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt::format("{}", xs[i]);
  return s;
}

const std::map<std::string, Entry>& table() {
  static const std::map<std::string, Entry> t = [] {
    std::map<std::string, Entry> t;
    add_shape(t, "target", &RunConfig::target);
    add_shape(t, "initial", &RunConfig::initial);
    add(t, "geometry.clearance", [](const RunConfig& c) { return fmt::format("{}", c.target.clearance.value_or(0.0)); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const double d = parse_double(k, v);
          c.target.clearance = d;
          c.initial.clearance = d;
        });
    add(t, "robin.alpha", [](const RunConfig& c) { return fmt::format("{}", c.robin.alpha); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.robin.alpha = parse_double(k, v); });
    add(t, "robin.rho", [](const RunConfig& c) { return fmt::format("{}", c.robin.rho); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.robin.rho = parse_double(k, v); });

    auto dnum = [&t](const std::string& name, double DescentConfig::*f) {
      add(t, "descent." + name, [f](const RunConfig& c) { return fmt::format("{}", c.descent.*f); },
          [f](RunConfig& c, const std::string& k, const std::string& v) { c.descent.*f = parse_double(k, v); });
    };
    auto dflag = [&t](const std::string& name, bool DescentConfig::*f) {
      add(t, "descent." + name, [f](const RunConfig& c) { return fmt_bool(c.descent.*f); },
          [f](RunConfig& c, const std::string& k, const std::string& v) { c.descent.*f = parse_bool(k, v); });
    };
    dnum("beta", &DescentConfig::beta);
    dnum("mu", &DescentConfig::mu);
    dnum("eps", &DescentConfig::eps);
    dnum("backtrack_factor", &DescentConfig::backtrack_factor);
    dnum("remesh_quality", &DescentConfig::remesh_quality);
    dnum("armijo_c", &DescentConfig::armijo_c);
    dflag("stop_on_eps", &DescentConfig::stop_on_eps);
    dflag("squared_norm", &DescentConfig::squared_norm);
    dflag("armijo", &DescentConfig::armijo);
    add(t, "descent.max_inner", [](const RunConfig& c) { return fmt::format("{}", c.descent.max_inner); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.descent.max_inner = static_cast<int>(parse_int(k, v));
        });
    add(t, "descent.max_backtracks", [](const RunConfig& c) { return fmt::format("{}", c.descent.max_backtracks); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.descent.max_backtracks = static_cast<int>(parse_int(k, v));
        });
    add(t, "descent.kind", [](const RunConfig& c) { return to_string(c.ccbm_kind); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.ccbm_kind = parse_gradient_kind(trim(v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(k + ": " + e.what());
          }
        });

    add(t, "admm.gamma", [](const RunConfig& c) { return fmt::format("{}", c.admm.gamma); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.admm.gamma = parse_double(k, v); });
    add(t, "admm.a", [](const RunConfig& c) { return bound_text(c.admm_a); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.admm_a = parse_bound(k, v); });
    add(t, "admm.b", [](const RunConfig& c) { return bound_text(c.admm_b); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.admm_b = parse_bound(k, v); });
    add(t, "admm.lambda0", [](const RunConfig& c) { return fmt::format("{}", c.admm.lambda0); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.admm.lambda0 = parse_double(k, v); });
    add(t, "admm.v0",
        [](const RunConfig& c) { return c.admm.v0_from_state ? std::string("state") : fmt::format("{}", c.admm.v0); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (trim(v) == "state") {
            c.admm.v0_from_state = true;
          } else {
            c.admm.v0_from_state = false;
            c.admm.v0 = parse_double(k, v);
          }
        });
    add(t, "admm.outer", [](const RunConfig& c) { return fmt::format("{}", c.admm.outer); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.admm.outer = static_cast<int>(parse_int(k, v)); });
    add(t, "admm.inner", [](const RunConfig& c) { return fmt::format("{}", c.admm.inner); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.admm.inner = static_cast<int>(parse_int(k, v)); });
    add(t, "admm.kind", [](const RunConfig& c) { return to_string(c.admm.kind); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.admm.kind = parse_gradient_kind(trim(v));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(k + ": " + e.what());
          }
        });
    add(t, "admm.residual_tol", [](const RunConfig& c) { return fmt::format("{}", c.admm.residual_tol); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.admm.residual_tol = parse_double(k, v); });
    add(t, "admm.snapshot_every", [](const RunConfig& c) { return fmt::format("{}", c.snapshot_every); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.snapshot_every = static_cast<int>(parse_int(k, v)); });

    add(t, "data.f", [](const RunConfig& c) { return c.dirichlet; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.dirichlet = trim(v); });
    add_double(t, "data.delta", &RunConfig::delta);
    add(t, "data.seed", [](const RunConfig& c) { return fmt::format("{}", c.seed); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const long long s = parse_int(k, v);
          if (s < 0) throw ConfigError(k + ": seed must be nonnegative");
          c.seed = static_cast<std::uint64_t>(s);
        });
    add(t, "data.file", [](const RunConfig& c) { return c.data_file; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.data_file = trim(v); });
    add_double(t, "mesh.h", &RunConfig::h);
    add_double(t, "mesh.synthesis_refinement", &RunConfig::synthesis_refinement);

    add(t, "gradient.kinds", [](const RunConfig& c) { return join_kinds(c.fd_kinds); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.fd_kinds.clear();
          for (const auto& s : split(v, ','))
            if (!s.empty()) try {
                c.fd_kinds.push_back(parse_gradient_kind(s));
              } catch (const std::invalid_argument& e) {
                throw ConfigError(k + ": " + e.what());
              }
        });
    add(t, "gradient.t", [](const RunConfig& c) { return join_doubles(c.fd_steps); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.fd_steps.clear();
          for (const auto& s : split(v, ','))
            if (!s.empty()) c.fd_steps.push_back(parse_double(k, s));
        });
    add(t, "output.polylines", [](const RunConfig& c) { return fmt_bool(c.write_polylines); },
        [](RunConfig& c, const std::string& k, const std::string& v) { c.write_polylines = parse_bool(k, v); });
    add(t, "sweep.mode", [](const RunConfig& c) { return c.sweep_mode; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.sweep_mode = trim(v); });
    add(t, "sweep.grid", [](const RunConfig& c) { return c.sweep_grid; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.sweep_grid = trim(v); });
    add(t, "sweep.workers", [](const RunConfig& c) { return fmt::format("{}", c.sweep_workers); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const long long w = parse_int(k, v);
          if (w < 0) throw ConfigError(k + ": must be nonnegative");
          c.sweep_workers = static_cast<int>(w);
        });
    return t;
  }();
  return t;
}

const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> p = {
      {"kite-robin100",
       "target.kind = kite\nrobin.alpha = 100\ndata.f = 1\ndescent.beta = 0.8\ninitial.kind = circle\n"
       "initial.radius = 0.3\ndescent.max_inner = 200\n"},
      {"kite-admm",
       "target.kind = kite\nrobin.alpha = 1\nrobin.rho = 5\ndata.f = f1\ndescent.beta = 0.9\n"
       "initial.kind = circle\ninitial.radius = 0.3\nadmm.gamma = 0.001\nadmm.lambda0 = 0.001\nadmm.v0 = 1\n"
       "admm.a = truth-min\nadmm.b = truth-max\nadmm.outer = 20\nadmm.inner = 10\nadmm.kind = GLAMBDA1\n"},
      {"lblock-noise",
       "target.kind = lblock\nrobin.alpha = 1\nrobin.rho = 1\ndata.f = 1+f1\ndata.delta = 0.01\n"
       "descent.beta = 0.9\ninitial.kind = circle\ninitial.radius = 0.3\nadmm.a = truth-min\nadmm.b = truth-max\n"
       "admm.outer = 20\nadmm.inner = 10\n"},
  };
  return p;
}

}  // namespace

RunMode parse_run_mode(const std::string& name) {
  if (name == "synthesize") return RunMode::synthesize;
  if (name == "reconstruct-ccbm") return RunMode::reconstruct_ccbm;
  if (name == "reconstruct-admm") return RunMode::reconstruct_admm;
  if (name == "verify-gradient") return RunMode::verify_gradient;
  if (name == "sweep") return RunMode::sweep;
  throw ConfigError("unknown mode '" + name + "'");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::synthesize: return "synthesize";
    case RunMode::reconstruct_ccbm: return "reconstruct-ccbm";
    case RunMode::reconstruct_admm: return "reconstruct-admm";
    case RunMode::verify_gradient: return "verify-gradient";
    case RunMode::sweep: return "sweep";
  }
  return "?";
}

RunConfig default_config() {
  RunConfig c;
  c.target.kind = ShapeKind::circle;
  c.target.radius = 0.5;
  c.target.samples = 0;
  c.initial.kind = ShapeKind::circle;
  c.initial.radius = 0.3;
  c.initial.samples = 0;
  c.fd_kinds = {GradientKind::g1,       GradientKind::g2,       GradientKind::gq,
                GradientKind::gw,       GradientKind::glambda1, GradientKind::glambda2};
  return c;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : presets()) out.push_back(k);
  return out;
}

void apply_setting(RunConfig& cfg, const std::string& key_in, const std::string& value) {
  const std::string key = trim(key_in);
  if (key == "preset") {
    const auto it = presets().find(trim(value));
    if (it == presets().end()) throw ConfigError("preset: unknown preset '" + trim(value) + "'");
    apply_config_text(cfg, it->second, "preset " + it->first);
    cfg.preset = it->first;
    return;
  }
  const auto it = table().find(key);
  if (it == table().end()) throw ConfigError("unknown key '" + key + "'");
  it->second.set(cfg, key, value);
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, lineno));
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = default_config();
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    apply_config_text(cfg, ss.str(), path);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    apply_setting(cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  validate(cfg);
  return cfg;
}

std::map<std::string, std::string> config_entries(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [k, e] : table()) out[k] = e.get(cfg);
  out["preset"] = cfg.preset.empty() ? "none" : cfg.preset;
  return out;
}

std::string manifest_text(const RunConfig& cfg) {
  std::string s = "# preset: " + (cfg.preset.empty() ? std::string("none") : cfg.preset) + "\n";
  for (const auto& [k, v] : config_entries(cfg))
    if (k != "preset") s += k + " = " + v + "\n";
  return s;
}

void validate(const RunConfig& cfg) {
  auto wrap = [](const std::string& key, auto&& f) {
    try {
      f();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      const std::string what = e.what();
      throw ConfigError(what.rfind(key, 0) == 0 ? what : key + ": " + what);
    }
  };
  if (!(cfg.robin.alpha > 0)) throw ConfigError("robin.alpha: must be positive");
  if (!(cfg.robin.rho > 0)) throw ConfigError("robin.rho: must be positive");
  wrap("descent", [&] { cfg.descent.validate(); });
  if (!(cfg.h > 0 && cfg.h < 0.5)) throw ConfigError("mesh.h: must lie in (0, 0.5)");
  if (!(cfg.synthesis_refinement > 0 && cfg.synthesis_refinement <= 1))
    throw ConfigError("mesh.synthesis_refinement: must lie in (0, 1]");
  if (!(cfg.delta >= 0)) throw ConfigError("data.delta: must be nonnegative");
  if (is_admm_kind(cfg.ccbm_kind)) throw ConfigError("descent.kind: must be G1 or G2");
  {
    AdmmConfig a = cfg.admm;
    a.a = cfg.admm_a.kind == BoundSetting::Kind::value ? cfg.admm_a.value : 0.0;
    a.b = cfg.admm_b.kind == BoundSetting::Kind::value ? cfg.admm_b.value : 0.0;
    if (cfg.admm_a.kind != BoundSetting::Kind::value || cfg.admm_b.kind != BoundSetting::Kind::value) a.a = a.b = 0.0;
    wrap("admm", [&] { a.validate(); });
  }
  if (cfg.admm_a.kind == BoundSetting::Kind::truth_max || cfg.admm_b.kind == BoundSetting::Kind::truth_min)
    throw ConfigError("admm.a/admm.b: use truth-min for a and truth-max for b");
  if (!cfg.data_file.empty() &&
      (cfg.admm_a.kind != BoundSetting::Kind::value || cfg.admm_b.kind != BoundSetting::Kind::value))
    throw ConfigError("admm.a/admm.b: truth bounds need synthesized data, not data.file");
  if (cfg.snapshot_every < 0) throw ConfigError("admm.snapshot_every: must be nonnegative");
  for (double t : cfg.fd_steps)
    if (!(t > 0)) throw ConfigError("gradient.t: steps must be positive");
  wrap("data.f", [&] { evaluate_dirichlet_at(cfg.dirichlet, Vec2(1, 0)); });
  wrap("target", [&] { shape_curve(cfg.target, cfg.h * cfg.synthesis_refinement); });
  wrap("initial", [&] { shape_curve(cfg.initial, cfg.h); });
  if (!cfg.data_file.empty() && !fs::exists(cfg.data_file)) throw ConfigError("data.file: file does not exist");
  if (cfg.sweep_mode == "sweep") throw ConfigError("sweep.mode: cannot nest sweeps");
  wrap("sweep.mode", [&] { parse_run_mode(cfg.sweep_mode); });
}

double evaluate_dirichlet_at(const std::string& selector, const Vec2& x) {
  const std::string sel = trim(selector);
  if (sel.rfind("file:", 0) == 0) {
    std::ifstream is(sel.substr(5));
    if (!is) throw ConfigError("data.f: cannot read " + sel.substr(5));
    double best = std::numeric_limits<double>::infinity(), value = 0, px, py, pf;
    while (is >> px >> py >> pf) {
      const double d = (Vec2(px, py) - x).squaredNorm();
      if (d < best) {
        best = d;
        value = pf;
      }
    }
    if (!std::isfinite(best)) throw ConfigError("data.f: file has no 'x y f' samples");
    return value;
  }
  double sum = 0;
  for (const auto& term : split(sel, '+')) {
    if (term.empty()) throw ConfigError("data.f: empty term in '" + selector + "'");
    double coef = 1.0;
    std::string name = term;
    const auto star = term.find('*');
    if (star != std::string::npos) {
      coef = parse_double("data.f", term.substr(0, star));
      name = trim(term.substr(star + 1));
    }
    if (name == "f1") {
      sum += coef * std::cos(std::atan2(x.y(), x.x()));
    } else if (name == "f2") {
      sum += coef * std::sin(0.1 * std::numbers::pi * x.x()) * std::sin(0.1 * std::numbers::pi * x.y());
    } else {
      sum += coef * parse_double("data.f", name);
    }
  }
  return sum;
}

Eigen::VectorXd evaluate_dirichlet_input(const std::string& selector, const TriMesh& m) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m.num_nodes());
  const auto sigma = boundary_node_mask(m, BoundaryLabel::sigma);
  for (int i = 0; i < m.num_nodes(); ++i)
    if (sigma[i]) f[i] = evaluate_dirichlet_at(selector, m.nodes[i]);
  return f;
}

Polyline sigma_curve(double h, double phase) {
  ShapeSpec s;
  s.kind = ShapeKind::circle;
  s.radius = 1.0;
  s.clearance.reset();
  s.samples = samples_for_spacing(2 * std::numbers::pi, h);
  s.phase = phase;
  return sample_curve(s);
}

Polyline shape_curve(const ShapeSpec& spec, double h) {
  if (spec.kind == ShapeKind::polyline_file) {
    ShapeSpec s = spec;
    return sample_curve(s);
  }
  if (spec.samples > 0) return sample_curve(spec);
  ShapeSpec probe = spec;
  probe.samples = 1024;
  const double per = perimeter(sample_curve(probe));
  ShapeSpec s = spec;
  s.samples = samples_for_spacing(per, h);
  return sample_curve(s);
}

Synthesis synthesize(const RunConfig& cfg) {
  const double hs = cfg.h * cfg.synthesis_refinement;
  Synthesis s;
  s.truth = shape_curve(cfg.target, hs);
  s.mesh = triangulate_annulus(sigma_curve(hs, 0.5), s.truth, hs);
  const Eigen::VectorXd f = evaluate_dirichlet_input(cfg.dirichlet, s.mesh);
  s.u_star = solve_dirichlet_forward(s.mesh, f, cfg.robin.alpha);
  s.data = synthesize_cauchy(s.mesh, f, cfg.robin.alpha, cfg.delta, cfg.seed);
  return s;
}

TriMesh initial_mesh(const RunConfig& cfg) {
  return triangulate_annulus(sigma_curve(cfg.h), shape_curve(cfg.initial, cfg.h), cfg.h);
}

namespace {

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& f) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  f(os);
  if (!os) throw std::runtime_error("write failed for " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  write_file(p, [&](std::ostream& os) { os << text; });
}

struct Inputs {
  CauchyData data;
  std::optional<Polyline> truth;
  std::optional<Eigen::VectorXd> u_star;
};

Inputs prepare_inputs(const RunConfig& cfg, const fs::path& out) {
  Inputs in;
  if (!cfg.data_file.empty()) {
    in.data = load_cauchy(cfg.data_file);
  } else {
    Synthesis s = synthesize(cfg);
    in.data = std::move(s.data);
    in.truth = std::move(s.truth);
    in.u_star = std::move(s.u_star);
    write_file(out / "truth.txt", [&](std::ostream& os) { write_polyline(os, *in.truth); });
  }
  write_file(out / "cauchy.txt", [&](std::ostream& os) { write_cauchy(os, in.data); });
  return in;
}

std::string summary(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

int run_synthesize(const RunConfig& cfg, const fs::path& out) {
  Synthesis s = synthesize(cfg);
  write_file(out / "cauchy.txt", [&](std::ostream& os) { write_cauchy(os, s.data); });
  write_file(out / "truth.txt", [&](std::ostream& os) { write_polyline(os, s.truth); });
  write_file(out / "synthesis_mesh.txt", [&](std::ostream& os) { write_mesh(os, s.mesh); });
  write_text(out / "summary.txt", summary({{"sigma_nodes", fmt::format("{}", s.data.points.size())},
                                          {"u_star_min", fmt::format("{}", s.u_star.minCoeff())},
                                          {"u_star_max", fmt::format("{}", s.u_star.maxCoeff())}}));
  return 0;
}

int run_ccbm(const RunConfig& cfg, const fs::path& out) {
  Inputs in = prepare_inputs(cfg, out);
  const TriMesh m0 = initial_mesh(cfg);
  write_file(out / "initial_mesh.txt", [&](std::ostream& os) { write_mesh(os, m0); });
  if (cfg.write_polylines) fs::create_directories(out / "gamma");
  IterationCallback cb;
  if (cfg.write_polylines)
    cb = [&](int it, const TriMesh& m) {
      write_file(out / "gamma" / fmt::format("iter_{:04d}.txt", it + 1),
                 [&](std::ostream& os) { write_polyline(os, boundary_polyline(m, BoundaryLabel::gamma)); });
    };
  if (cfg.write_polylines)
    write_file(out / "gamma" / "iter_0000.txt",
               [&](std::ostream& os) { write_polyline(os, boundary_polyline(m0, BoundaryLabel::gamma)); });
  DescentConfig dc = cfg.descent;
  dc.h = cfg.h;
  DescentResult r = sgbd_inner_loop(m0, in.data, cfg.robin, nullptr, cfg.ccbm_kind, dc, in.truth ? &*in.truth : nullptr, cb);
  write_file(out / "history.csv", [&](std::ostream& os) { write_history(os, r.history); });
  write_file(out / "final_mesh.txt", [&](std::ostream& os) { write_mesh(os, r.mesh); });
  const Polyline final_gamma = boundary_polyline(r.mesh, BoundaryLabel::gamma);
  write_file(out / "final_gamma.txt", [&](std::ostream& os) { write_polyline(os, final_gamma); });
  const double hd = in.truth ? hausdorff_distance(final_gamma, *in.truth) : std::numeric_limits<double>::quiet_NaN();
  write_text(out / "summary.txt", summary({{"iterations", fmt::format("{}", r.history.size())},
                                          {"final_hausdorff", fmt::format("{}", hd)},
                                          {"aborted", fmt_bool(r.aborted)},
                                          {"message", r.message}}));
  if (r.aborted) {
    std::cerr << "error: " << r.message << "\n";
    return 2;
  }
  return 0;
}

int run_admm(const RunConfig& cfg, const fs::path& out) {
  Inputs in = prepare_inputs(cfg, out);
  AdmmConfig ac = cfg.admm;
  auto bound = [&](const BoundSetting& b) {
    if (b.kind == BoundSetting::Kind::value) return b.value;
    return b.kind == BoundSetting::Kind::truth_min ? in.u_star->minCoeff() : in.u_star->maxCoeff();
  };
  ac.a = bound(cfg.admm_a);
  ac.b = bound(cfg.admm_b);
  const TriMesh m0 = initial_mesh(cfg);
  write_file(out / "initial_mesh.txt", [&](std::ostream& os) { write_mesh(os, m0); });
  if (cfg.write_polylines) {
    fs::create_directories(out / "gamma");
    write_file(out / "gamma" / "outer_0000.txt",
               [&](std::ostream& os) { write_polyline(os, boundary_polyline(m0, BoundaryLabel::gamma)); });
  }
  if (cfg.snapshot_every > 0) fs::create_directories(out / "state");
  OuterCallback cb = [&](int k, const TriMesh& m, const AdmmState& s) {
    if (cfg.write_polylines)
      write_file(out / "gamma" / fmt::format("outer_{:04d}.txt", k + 1),
                 [&](std::ostream& os) { write_polyline(os, boundary_polyline(m, BoundaryLabel::gamma)); });
    if (cfg.snapshot_every > 0 && (k + 1) % cfg.snapshot_every == 0)
      write_file(out / "state" / fmt::format("state_{:04d}.txt", k + 1),
                 [&](std::ostream& os) { write_admm_state(os, m, s); });
  };
  DescentConfig dc = cfg.descent;
  dc.h = cfg.h;
  AdmmResult r = admm_sgbd(m0, in.data, cfg.robin, ac, dc, in.truth ? &*in.truth : nullptr, cb);
  write_file(out / "outer_history.csv", [&](std::ostream& os) { write_outer_history(os, r.outer); });
  write_file(out / "history.csv", [&](std::ostream& os) { write_history(os, r.inner); });
  write_file(out / "final_mesh.txt", [&](std::ostream& os) { write_mesh(os, r.mesh); });
  write_file(out / "final_state.txt", [&](std::ostream& os) { write_admm_state(os, r.mesh, r.state); });
  const Polyline final_gamma = boundary_polyline(r.mesh, BoundaryLabel::gamma);
  write_file(out / "final_gamma.txt", [&](std::ostream& os) { write_polyline(os, final_gamma); });
  const double hd = in.truth ? hausdorff_distance(final_gamma, *in.truth) : std::numeric_limits<double>::quiet_NaN();
  write_text(out / "summary.txt", summary({{"outer_iterations", fmt::format("{}", r.outer.size())},
                                          {"inner_iterations", fmt::format("{}", r.inner.size())},
                                          {"box_a", fmt::format("{}", ac.a)},
                                          {"box_b", fmt::format("{}", ac.b)},
                                          {"final_hausdorff", fmt::format("{}", hd)},
                                          {"aborted", fmt_bool(r.aborted)},
                                          {"message", r.message}}));
  if (r.aborted) {
    std::cerr << "error: " << r.message << "\n";
    return 2;
  }
  return 0;
}

int run_verify(const RunConfig& cfg, const fs::path& out) {
  Inputs in = prepare_inputs(cfg, out);
  const TriMesh m = initial_mesh(cfg);
  const SigmaTraces tr = traces_on_mesh(in.data, m);
  const NodalVectorField theta = certification_field(m);
  std::vector<GradientKind> j_kinds, y_kinds;
  for (GradientKind k : cfg.fd_kinds) (is_admm_kind(k) ? y_kinds : j_kinds).push_back(k);
  std::vector<FdRow> rows;
  if (!j_kinds.empty()) rows = fd_certify(Functional::J, m, tr, cfg.robin, nullptr, theta, cfg.fd_steps, j_kinds);
  CcbmSystem sys(m, tr, cfg.robin);
  const ComplexNodalField u = sys.solve_state();
  AdmmState st;
  st.gamma = cfg.admm.gamma;
  st.lambda = Eigen::VectorXd::Constant(m.num_nodes(), cfg.admm.lambda0);
  st.v = cfg.admm.v0_from_state ? Eigen::VectorXd(u.real()) : Eigen::VectorXd::Constant(m.num_nodes(), cfg.admm.v0);
  if (!y_kinds.empty()) {
    auto y = fd_certify(Functional::Y, m, tr, cfg.robin, &st, theta, cfg.fd_steps, y_kinds);
    rows.insert(rows.end(), y.begin(), y.end());
  }
  write_file(out / "fd_report.csv", [&](std::ostream& os) { write_fd_report(os, rows); });
  const GammaGeometry geo(m);
  for (GradientKind k : cfg.fd_kinds) {
    const AdmmState* sp = is_admm_kind(k) ? &st : nullptr;
    const BoundaryScalarField G = shape_gradient(k, m, geo, u, compute_adjoints(sys, k, u, sp), sp, cfg.robin.alpha);
    write_file(out / fmt::format("gradient_{}.txt", to_string(k)), [&](std::ostream& os) { write_gradient(os, m, geo, G); });
  }
  return 0;
}

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::string& grid) {
  std::vector<GridAxis> axes;
  for (const auto& part : split(grid, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep.grid: expected key=v1,v2 in '" + part + "'");
    GridAxis ax{trim(part.substr(0, eq)), split(part.substr(eq + 1), ',')};
    if (ax.values.empty()) throw ConfigError("sweep.grid: no values for " + ax.key);
    axes.push_back(std::move(ax));
  }
  if (axes.empty()) throw ConfigError("sweep.grid: empty grid");
  return axes;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '=') ? c : '_';
  return out;
}

std::string read_summary_value(const fs::path& p, const std::string& key) {
  std::ifstream is(p);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && trim(line.substr(0, eq)) == key) return trim(line.substr(eq + 1));
  }
  return "nan";
}

int run_sweep(const RunConfig& cfg, const fs::path& out) {
  const auto axes = parse_grid(cfg.sweep_grid);
  const RunMode mode = parse_run_mode(cfg.sweep_mode);
  struct Job {
    RunConfig cfg;
    std::string name;
  };
  std::vector<Job> jobs(1, Job{cfg, ""});
  for (const auto& ax : axes) {
    std::vector<Job> next;
    for (const auto& j : jobs)
      for (const auto& v : ax.values) {
        Job n = j;
        apply_setting(n.cfg, ax.key, v);
        n.name += (n.name.empty() ? "" : "_") + sanitize(ax.key + "=" + v);
        next.push_back(std::move(n));
      }
    jobs = std::move(next);
  }
  for (auto& j : jobs) validate(j.cfg);

  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CAVITY_CCBM_WORKERS")) {
    try {
      workers = static_cast<unsigned>(std::max(1LL, parse_int("CAVITY_CCBM_WORKERS", env)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("environment: ") + e.what());
    }
  }
  if (cfg.sweep_workers > 0) workers = static_cast<unsigned>(cfg.sweep_workers);
  workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
  std::vector<int> codes(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const fs::path dir = out / jobs[i].name;
      try {
        codes[i] = run(mode, jobs[i].cfg, dir.string());
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "error in " << jobs[i].name << ": " << e.what() << "\n";
        codes[i] = 2;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string csv = "run";
  for (const auto& ax : axes) csv += "," + ax.key;
  csv += ",exit_code,final_hausdorff\n";
  int worst = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    csv += jobs[i].name;
    const auto entries = config_entries(jobs[i].cfg);
    for (const auto& ax : axes) csv += "," + (entries.count(ax.key) ? entries.at(ax.key) : std::string("?"));
    csv += fmt::format(",{},{}\n", codes[i], read_summary_value(out / jobs[i].name / "summary.txt", "final_hausdorff"));
    worst = std::max(worst, codes[i]);
  }
  write_text(out / "sweep_summary.csv", csv);
  return worst;
}

}  // namespace

int run(RunMode mode, const RunConfig& cfg, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_text(out / "manifest.txt", "# mode: " + to_string(mode) + "\n" + manifest_text(cfg));
  switch (mode) {
    case RunMode::synthesize: return run_synthesize(cfg, out);
    case RunMode::reconstruct_ccbm: return run_ccbm(cfg, out);
    case RunMode::reconstruct_admm: return run_admm(cfg, out);
    case RunMode::verify_gradient: return run_verify(cfg, out);
    case RunMode::sweep: return run_sweep(cfg, out);
  }
  return 1;
}

}  // namespace ccbm

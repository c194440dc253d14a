// Command-line front end: wires INI-style experiment configs to the library
// modules and writes deterministic CSV artifacts plus a run manifest.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hypo/bounds.hpp"
#include "hypo/coeffs.hpp"
#include "hypo/grid.hpp"
#include "hypo/lattice.hpp"
#include "hypo/rng.hpp"
#include "hypo/sde.hpp"

using namespace hypo;

namespace {

struct ValidationError {
  std::string key;
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct Config {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string raw;

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError{"config file '" + path + "'"};
    Config c;
    std::ostringstream all;
    all << in.rdbuf();
    c.raw = all.str();
    std::istringstream ss(c.raw);
    std::string line, sec;
    while (std::getline(ss, line)) {
      line = trim(line);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[' && line.back() == ']') {
        sec = trim(line.substr(1, line.size() - 2));
        continue;
      }
      size_t eq = line.find('=');
      if (eq == std::string::npos) throw ValidationError{"line '" + line + "'"};
      c.sections[sec][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return c;
  }
  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
  }
  std::string get(const std::string& sec, const std::string& key) const {
    if (!has(sec, key)) throw ValidationError{sec + "." + key};
    return sections.at(sec).at(key);
  }
  std::string get_or(const std::string& sec, const std::string& key,
                     const std::string& dflt) const {
    return has(sec, key) ? sections.at(sec).at(key) : dflt;
  }
  double getd(const std::string& sec, const std::string& key) const {
    return std::stod(get(sec, key));
  }
  double getd_or(const std::string& sec, const std::string& key, double dflt) const {
    return has(sec, key) ? std::stod(get(sec, key)) : dflt;
  }
  long geti(const std::string& sec, const std::string& key) const {
    return std::stol(get(sec, key));
  }
  long geti_or(const std::string& sec, const std::string& key, long dflt) const {
    return has(sec, key) ? std::stol(get(sec, key)) : dflt;
  }
  std::vector<double> getlist(const std::string& sec, const std::string& key) const {
    std::istringstream ss(get(sec, key));
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (v.empty()) throw ValidationError{sec + "." + key};
    return v;
  }
};

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Run {
  std::string out = ".";
  std::string hash; // config+seed hash carried in every CSV row
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::uint64_t seed = 0;

  void init(const Config& cfg, std::uint64_t seed_) {
    seed = seed_;
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0')
       << fnv1a(cfg.raw + ":" + std::to_string(seed_));
    hash = os.str();
    std::filesystem::create_directories(out);
  }
  void csv(const std::string& name, const std::string& header,
           const std::vector<std::string>& rows) const {
    std::ofstream f(std::filesystem::path(out) / name);
    f << header << ",manifest\n";
    for (const std::string& r : rows) f << r << "," << hash << "\n";
  }
  void manifest() const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream f(std::filesystem::path(out) / "manifest");
    f << "config_hash = " << hash << "\nseed = " << seed << "\nversion = hypoctl 1.0\n"
      << "wall_time_s = " << fmt(wall) << "\n";
  }
};

std::uint64_t require_seed(const Config& cfg, const std::optional<std::uint64_t>& cli_seed) {
  if (cli_seed) return *cli_seed;
  if (!cfg.has("simulation", "seed")) throw ValidationError{"simulation.seed"};
  return static_cast<std::uint64_t>(cfg.geti("simulation", "seed"));
}

ModelOperator build_operator(const Config& cfg) {
  const VectorField Z0 = parse_vector_field(cfg.get("operator", "Z0"));
  const VectorField B = parse_vector_field(cfg.get("operator", "B"));
  std::optional<VectorField> D;
  if (cfg.has("operator", "D")) D = parse_vector_field(cfg.get("operator", "D"));
  return ModelOperator::build(Z0, B, static_cast<int>(cfg.geti_or("operator", "max_depth", 8)),
                              cfg.getd_or("operator", "lambda", 0.0), D);
}

GridConfig build_grid(const Config& cfg) {
  GridConfig g;
  g.n1 = static_cast<int>(cfg.geti_or("grid", "n1", g.n1));
  g.n2 = static_cast<int>(cfg.geti_or("grid", "n2", g.n2));
  g.lo1 = cfg.getd_or("grid", "lo1", g.lo1);
  g.hi1 = cfg.getd_or("grid", "hi1", g.hi1);
  g.lo2 = cfg.getd_or("grid", "lo2", g.lo2);
  g.hi2 = cfg.getd_or("grid", "hi2", g.hi2);
  g.safety = cfg.getd_or("grid", "safety", g.safety);
  g.cfl = cfg.getd_or("grid", "cfl", g.cfl);
  g.dt_override = cfg.getd_or("grid", "dt_override", g.dt_override);
  g.interior_margin = cfg.getd_or("grid", "interior_margin", g.interior_margin);
  g.contamination_tol = cfg.getd_or("grid", "contamination_tol", g.contamination_tol);
  const std::string scheme = cfg.get_or("grid", "scheme", "fused");
  if (scheme == "split")
    g.scheme = Scheme::split;
  else if (scheme != "fused")
    throw ValidationError{"grid.scheme"};
  return g;
}

std::vector<OperatorWord> parse_words(const std::string& text) {
  std::istringstream ss(text);
  std::vector<OperatorWord> out;
  std::string tok;
  while (ss >> tok) {
    OperatorWord w;
    std::istringstream ts(tok);
    std::string part;
    while (std::getline(ts, part, ',')) w.indices.push_back(std::stoi(part));
    out.push_back(w);
  }
  if (out.empty()) throw ValidationError{"simulation.words"};
  return out;
}

// Gaussian bump with a steep tanh front along the chosen axis; the default
// initial datum for smoothing measurements.
std::function<double(double, double)> build_initial(const Config& cfg) {
  const std::string kind = cfg.get_or("simulation", "initial", "bump");
  if (kind == "bump") return [](double a, double b) { return std::exp(-a * a - b * b); };
  if (kind == "front1") {
    const double w = cfg.getd("simulation", "front_width");
    return [w](double a, double b) { return std::tanh(a / w) * std::exp(-a * a - b * b); };
  }
  if (kind == "front2") {
    const double w = cfg.getd("simulation", "front_width");
    return [w](double a, double b) { return std::tanh(b / w) * std::exp(-b * b - 1.5 * a * a); };
  }
  throw ValidationError{"simulation.initial"};
}

// ---------------------------------------------------------------- lattice ---
// OU-fiber chain with nearest-neighbor first-order coupling of strength theta
// and optional symmetric second-order coupling s on neighboring channels.
LatticeModel build_lattice(const Config& cfg, int radius_override = -1) {
  const int radius = radius_override >= 0
                         ? radius_override
                         : static_cast<int>(cfg.geti("lattice", "radius"));
  VectorField Y0 = parse_vector_field(cfg.get_or("lattice", "Y0", "[1]"));
  LatticeModel m = make_chain(radius, Y0.dimension(), {Y0}, 1);
  m.lambda = cfg.getd_or("lattice", "lambda", 1.0);
  m.D = parse_vector_field(cfg.get_or("lattice", "D", "[x1]"));
  const double theta = cfg.getd_or("lattice", "theta", 0.0);
  if (theta != 0.0) {
    const Rational th(static_cast<long long>(std::llround(theta * 1048576)), 1048576);
    for (int x = 0; x < m.nsites(); ++x) {
      Polynomial p(m.nvars());
      for (int y = 0; y < m.nsites(); ++y)
        if (m.distance(x, y) == 1) p = p + Polynomial::variable(m.nvars(), m.var(y, 0)) * th;
      if (!p.is_zero()) m.q[x][0] = p;
    }
  }
  const double s = cfg.getd_or("lattice", "s", 0.0);
  if (s != 0.0) {
    for (int x = 0; x < m.nsites(); ++x)
      for (int y = x + 1; y < m.nsites(); ++y)
        if (m.distance(x, y) == 1) m.S[{x, y}] = {{s}};
    m.delta = std::abs(s);
  }
  return m;
}

Configuration lattice_start(const Config& cfg, const LatticeModel& m) {
  Configuration w;
  if (cfg.has("lattice", "omega0")) {
    const std::vector<double> v = cfg.getlist("lattice", "omega0");
    if (static_cast<int>(v.size()) != m.nsites()) throw ValidationError{"lattice.omega0"};
    for (double u : v) w.omega.push_back({u});
  } else {
    w.omega.assign(m.nsites(), std::vector<double>(m.m, 0.5));
  }
  return w;
}

CylinderFn lattice_observable(const Config& cfg, const LatticeModel& m) {
  CylinderFn f;
  f.support = {{static_cast<int>(cfg.geti_or("lattice", "f_site", 0))}};
  f.p = parse_polynomial(cfg.get_or("lattice", "f", "x1"), m.m);
  return f;
}

LatticeMcParams lattice_mc_params(const Config& cfg, std::uint64_t seed) {
  LatticeMcParams mc;
  mc.seed = seed;
  mc.paths = cfg.geti_or("simulation", "paths", 2000);
  mc.dt = cfg.getd_or("simulation", "dt", 1e-3);
  return mc;
}

// ------------------------------------------------------------ subcommands ---

int run_algebra(const std::string& mode, const Config& cfg, Run& run) {
  const VectorField Z0 = parse_vector_field(cfg.get("operator", "Z0"));
  const VectorField B = parse_vector_field(cfg.get("operator", "B"));
  ChainResult chain =
      generate_chain(Z0, B, static_cast<int>(cfg.geti_or("operator", "max_depth", 8)));
  std::vector<std::string> rows;
  int rc = 0;
  if (mode == "chain" || mode == "verify") {
    CriReport rep = chain.closed ? verify_cri(chain) : CriReport{};
    std::cout << "closed = " << chain.closed << ", N = " << chain.constants.N
              << ", closure = " << rep.closure
              << ", lower_triangular = " << rep.lower_triangular_ok
              << ", sign_cN = " << rep.sign_cN << ", all_zero = " << rep.all_zero << "\n";
    for (const std::string& s : rep.failures) std::cout << "failure: " << s << "\n";
    rows.push_back(std::string("closed,") + (chain.closed ? "1" : "0"));
    rows.push_back("N," + std::to_string(chain.constants.N));
    rows.push_back(std::string("closure,") + (rep.closure ? "1" : "0"));
    rows.push_back(std::string("lower_triangular,") + (rep.lower_triangular_ok ? "1" : "0"));
    rows.push_back("sign_cN," + std::to_string(rep.sign_cN));
    rows.push_back(std::string("all_zero,") + (rep.all_zero ? "1" : "0"));
    run.csv("algebra.csv", "key,value", rows);
    rc = (chain.closed && rep.closure) ? 0 : 1;
  } else { // span
    const std::vector<double> pt = cfg.getlist("operator", "point");
    std::vector<Rational> rpt;
    for (double x : pt)
      rpt.push_back(Rational(static_cast<long long>(std::llround(x * 1048576)), 1048576));
    auto [spans, depth] = hormander_span_check(
        {Z0, B}, rpt, static_cast<int>(cfg.geti_or("operator", "max_depth", 8)));
    std::cout << "spans = " << spans << ", depth = " << depth << "\n";
    rows.push_back(std::string("spans,") + (spans ? "1" : "0"));
    rows.push_back("depth," + std::to_string(depth));
    run.csv("algebra.csv", "key,value", rows);
    rc = spans ? 0 : 1;
  }
  return rc;
}

int run_coeffs(const std::string& mode, const Config& cfg, Run& run) {
  CoefficientTable table;
  if (mode == "synth") {
    table = synthesize(static_cast<int>(cfg.geti("coefficients", "n")),
                       static_cast<int>(cfg.geti("coefficients", "N")),
                       cfg.getd("coefficients", "C"), cfg.getd("coefficients", "Cprime"));
    std::ofstream f(std::filesystem::path(run.out) / "table.txt");
    f << serialize_table(table);
  } else {
    std::ifstream f(cfg.get("coefficients", "table"));
    if (!f) throw ValidationError{"coefficients.table"};
    std::ostringstream ss;
    ss << f.rdbuf();
    table = parse_table(ss.str());
  }
  DissipativityReport rep = verify(table);
  std::cout << "pass = " << rep.pass << ", worst_B = " << rep.worst_B
            << ", cond1 = " << rep.cond1_ok << "\n";
  std::vector<std::string> rows = {std::string("pass,") + (rep.pass ? "1" : "0"),
                                   "worst_B," + fmt(rep.worst_B),
                                   std::string("cond1,") + (rep.cond1_ok ? "1" : "0")};
  if (mode == "compare") {
    const double bar_d = comparability(table);
    const std::uint64_t seed = require_seed(cfg, std::nullopt);
    // property: Gamma >= bar_d * barGamma on random derivative samples
    double worst = 1e300;
    for (int i = 0; i < 1000; ++i) {
      std::map<WordKey, double> derivs;
      std::uint64_t ch = 0;
      for (int l = 1; l <= table.n; ++l)
        for (const WordKey& w : all_words(l, table.N))
          derivs[w] = 2.0 * u01(key4(seed, i, ++ch, 17)) - 1.0;
      const double t = u01(key4(seed, i, 0, 18));
      auto [barG, G] = evaluate_gamma(table, derivs, t);
      worst = std::min(worst, G - bar_d * barG);
    }
    std::cout << "bar_d = " << bar_d << ", worst comparability margin = " << worst << "\n";
    rows.push_back("bar_d," + fmt(bar_d));
    rows.push_back("comparability_margin," + fmt(worst));
    if (worst < -1e-9) rep.pass = false;
  }
  run.csv("coeffs.csv", "key,value", rows);
  return rep.pass ? 0 : 1;
}

int run_smooth(const std::string& mode, const Config& cfg, Run& run,
               const std::optional<std::uint64_t>& cli_seed) {
  require_seed(cfg, cli_seed); // seed mandatory even for the deterministic grid
  const ModelOperator op = build_operator(cfg);
  const GridConfig grid = build_grid(cfg);
  const auto f0 = build_initial(cfg);
  if (mode == "probe") {
    CoefficientTable table =
        synthesize(static_cast<int>(cfg.geti_or("coefficients", "n", 1)),
                   static_cast<int>(cfg.geti_or("coefficients", "N", op.constants.N)),
                   cfg.getd_or("coefficients", "C", 4), cfg.getd_or("coefficients", "Cprime", 4));
    ProbeResult pr = q_monotonicity_probe(op, f0, table, cfg.getd("simulation", "t"),
                                          cfg.getlist("simulation", "s_list"), grid);
    std::vector<std::string> rows;
    for (size_t i = 0; i < pr.s_values.size(); ++i)
      rows.push_back(fmt(pr.s_values[i]) + "," + fmt(pr.q_values[i]));
    run.csv("probe.csv", "s,q_value", rows);
    std::cout << "non_increasing = " << pr.non_increasing
              << ", identity_rel_err = " << pr.identity_rel_err << "\n";
    return pr.non_increasing ? 0 : 1;
  }
  const std::vector<OperatorWord> words = parse_words(cfg.get("simulation", "words"));
  const std::vector<double> t_list = cfg.getlist("simulation", "t_list");
  std::vector<std::string> srows, frows;
  int rc = 0;
  for (const OperatorWord& w : words) {
    SmoothingResult res = smoothing_exponent(op, f0, w, t_list, grid);
    std::string wname;
    for (size_t i = 0; i < w.indices.size(); ++i)
      wname += (i ? "." : "") + std::to_string(w.indices[i]);
    for (const SmoothingPoint& p : res.points)
      srows.push_back(fmt(p.t) + "," + wname + "," + fmt(p.sup_norm) + "," +
                      fmt(p.contamination));
    frows.push_back(wname + "," + fmt(res.fitted_slope) + "," + fmt(res.predicted_slope) + "," +
                    fmt(res.r2));
    std::cout << "word (" << wname << "): slope " << res.fitted_slope << " vs predicted "
              << res.predicted_slope << " (r2 " << res.r2 << ")\n";
  }
  if (mode != "fit") run.csv("smoothing.csv", "t,word,sup_norm,contamination", srows);
  run.csv("fits.csv", "word,fitted_slope,predicted_slope,r2", frows);
  return rc;
}

int run_sde_check(const Config& cfg, Run& run,
                  const std::optional<std::uint64_t>& cli_seed) {
  const std::uint64_t seed = require_seed(cfg, cli_seed);
  const ModelOperator op = build_operator(cfg); // chain + dilation verified here
  const SdeSystem sde = to_sde(op);             // generator-match asserted here
  McResult one = mc_expectation(
      sde, [](const double*) { return 1.0; },
      std::vector<double>(op.m, 0.25), cfg.getd_or("simulation", "t", 0.5),
      cfg.geti_or("simulation", "paths", 500), cfg.getd_or("simulation", "dt", 1e-3), seed);
  std::cout << "generator match ok; E[1] = " << one.mean << " (stderr " << one.stderr_ << ")\n";
  std::vector<std::string> rows = {"markov_mean," + fmt(one.mean),
                                   "markov_stderr," + fmt(one.stderr_)};
  run.csv("sde.csv", "key,value", rows);
  return (one.mean == 1.0 && one.stderr_ == 0.0) ? 0 : 1;
}

int run_lattice(const std::string& mode, const Config& cfg, Run& run,
                const std::optional<std::uint64_t>& cli_seed) {
  if (mode == "check-conditions") {
    const VectorField Z0 = parse_vector_field(cfg.get("operator", "Z0"));
    const VectorField B = parse_vector_field(cfg.get("operator", "B"));
    ChainResult chain =
        generate_chain(Z0, B, static_cast<int>(cfg.geti_or("operator", "max_depth", 8)));
    if (!chain.closed) throw ValidationError{"operator (chain does not close)"};
    verify_cri(chain);
    LatticeModel m = make_chain(static_cast<int>(cfg.geti("lattice", "radius")),
                                Z0.dimension(), chain.chain, 1);
    for (size_t j = 0; j < chain.chain.size(); ++j) {
      const std::string key = "q" + std::to_string(j);
      if (cfg.has("lattice", key)) {
        const Polynomial p = parse_polynomial(cfg.get("lattice", key), m.nvars());
        for (int x = 0; x < m.nsites(); ++x) m.q[x][j] = p;
      }
    }
    ConditionReport rep = smoothing_conditions_check(m, chain);
    std::cout << "si1 = " << rep.si1 << ", si2 = " << rep.si2 << ", si3 = " << rep.si3
              << ", si4 = " << rep.si4 << ", q_diagonal = " << rep.q_diagonal << "\n";
    for (const std::string& v : rep.violations) std::cout << v << "\n";
    std::vector<std::string> rows = {
        std::string("si1,") + (rep.si1 ? "1" : "0"), std::string("si2,") + (rep.si2 ? "1" : "0"),
        std::string("si3,") + (rep.si3 ? "1" : "0"), std::string("si4,") + (rep.si4 ? "1" : "0"),
        std::string("q_diagonal,") + (rep.q_diagonal ? "1" : "0")};
    run.csv("conditions.csv", "key,value", rows);
    return rep.all_core() ? 0 : 1;
  }

  const std::uint64_t seed = require_seed(cfg, cli_seed);
  const LatticeMcParams mc = lattice_mc_params(cfg, seed);

  if (mode == "fsp") {
    const LatticeModel m = build_lattice(cfg);
    const CylinderFn f = lattice_observable(cfg, m);
    const Configuration w0 = lattice_start(cfg, m);
    const double t = cfg.getd("simulation", "t");
    std::vector<std::vector<int>> probes;
    for (int s = 0; s < m.nsites(); ++s) probes.push_back({s});
    auto prof = derivative_profile(m, f, t, 1, probes, w0, mc);
    std::vector<std::string> rows;
    for (const ProfileEntry& e : prof)
      rows.push_back(std::to_string(e.site_tuple[0]) + "," + fmt(e.distance) + "," + fmt(e.t) +
                     "," + fmt(e.norm) + "," + fmt(e.stderr_));
    run.csv("propagation.csv", "site,distance,t,norm,stderr", rows);
    FspFit fit = fsp_fit(prof);
    std::cout << "fit ok = " << fit.ok << ", v = " << fit.env.v << ", r2 = " << fit.r2
              << (fit.diagnostic.empty() ? "" : " (" + fit.diagnostic + ")") << "\n";
    return fit.ok ? 0 : 1;
  }
  if (mode == "converge") {
    std::vector<LatticeModel> family;
    for (double r : cfg.getlist("lattice", "radii"))
      family.push_back(build_lattice(cfg, static_cast<int>(r)));
    const CylinderFn f = lattice_observable(cfg, family.front());
    std::vector<std::function<std::vector<double>(const std::vector<int>&)>> samples = {
        [](const std::vector<int>&) { return std::vector<double>{0.5}; },
        [](const std::vector<int>& c) { return std::vector<double>{0.1 * c[0]}; },
        [](const std::vector<int>& c) { return std::vector<double>{c[0] % 2 ? -0.4 : 0.7}; }};
    VolumeResult vr = volume_convergence(family, f, cfg.getd("simulation", "t"), samples, mc);
    std::vector<std::string> rows;
    for (size_t k = 0; k < vr.sup_diff.size(); ++k)
      rows.push_back(std::to_string(k) + "," + fmt(vr.sup_diff[k]) + "," +
                     fmt(k < vr.ratios.size() + 1 && k >= 1 ? vr.ratios[k - 1] : 0.0));
    run.csv("convergence.csv", "k,sup_diff,ratio", rows);
    std::cout << "mean ratio = " << vr.mean_ratio << "\n";
    return (vr.ratios.empty() || vr.mean_ratio < 1.0) ? 0 : 1;
  }
  if (mode == "lyapunov") {
    const LatticeModel m = build_lattice(cfg);
    const double theta = cfg.getd_or("lattice", "theta", 0.0);
    LyapunovSpec spec;
    spec.rho = [](const std::vector<double>& u) { return std::sqrt(1.0 + u[0] * u[0]); };
    spec.C2 = cfg.getd_or("lyapunov", "C2", m.lambda);
    spec.C1 = cfg.has("lyapunov", "C1") ? cfg.getd("lyapunov", "C1")
                                        : certify_site_lyapunov(m, spec.rho, spec.C2);
    spec.C3 = cfg.getd_or("lyapunov", "C3", 0.0);
    spec.C4 = cfg.getd_or("lyapunov", "C4", 2.5 * std::abs(theta));
    const int ns = m.nsites();
    spec.eta.assign(ns, std::vector<double>(ns, 0.0));
    for (int x = 0; x < ns; ++x)
      for (int y = 0; y < ns; ++y)
        if (m.distance(x, y) == 1) spec.eta[x][y] = std::abs(theta);
    spec.S_sup = 2.0 * std::abs(theta);
    for (int x = 0; x < ns; ++x)
      spec.weights.push_back(std::pow(2.0, -std::abs(m.sites[x][0])));
    auto drift = lyapunov_drift(m, spec, lattice_start(cfg, m),
                                cfg.getlist("simulation", "t_grid"), mc);
    std::vector<std::string> rows;
    bool ok = true;
    for (const LyapunovPoint& p : drift) {
      rows.push_back(fmt(p.t) + "," + fmt(p.F) + "," + fmt(p.stderr_) + "," + fmt(p.bound));
      ok = ok && !p.violated;
    }
    run.csv("lyapunov.csv", "t,F_t,stderr,bound", rows);
    std::cout << "C1 = " << spec.C1 << ", bound = " << drift.front().bound
              << ", within bound = " << ok << "\n";
    return ok ? 0 : 1;
  }
  if (mode == "ergodic") {
    const LatticeModel m = build_lattice(cfg);
    const CylinderFn f = lattice_observable(cfg, m);
    Configuration w(lattice_start(cfg, m)), wp = w;
    const double a = cfg.getd_or("lattice", "ergodic_a", 2.0);
    const double b = cfg.getd_or("lattice", "ergodic_b", -2.0);
    for (auto& site : w.omega) site[0] = a;
    for (auto& site : wp.omega) site[0] = b;
    ErgodicResult r =
        ergodic_contraction(m, f, w, wp, cfg.getlist("simulation", "t_grid"), mc);
    std::vector<std::string> rows;
    for (const ErgodicPoint& p : r.points)
      rows.push_back(fmt(p.t) + "," + fmt(p.diff) + "," + fmt(p.stderr_));
    run.csv("ergodic.csv", "t,diff,stderr", rows);
    std::cout << "fitted rate = " << r.fitted_rate << ", inconclusive = " << r.inconclusive
              << (r.diagnostic.empty() ? "" : " (" + r.diagnostic + ")") << "\n";
    return r.inconclusive ? 1 : 0;
  }
  throw ValidationError{"lattice mode"};
}

int run_bounds(const std::string& mode, const Config& cfg, Run& run) {
  if (mode == "constants") {
    StructuralConstants s = structural_constants(
        static_cast<int>(cfg.geti("bounds", "n")), static_cast<int>(cfg.geti("bounds", "cardI")),
        cfg.getd("bounds", "c"), cfg.getd("bounds", "b"), cfg.getd("bounds", "kappa"),
        cfg.getd("bounds", "lambda"), cfg.getd("bounds", "epsilon"),
        cfg.getd("bounds", "qbar"), cfg.getd("bounds", "S_row_sum"),
        cfg.getd("bounds", "S_sup"));
    std::vector<std::string> rows = {"A_n," + fmt(s.A_n), "B_n," + fmt(s.B_n),
                                     "C_n," + fmt(s.C_n), "Cbar_n," + fmt(s.Cbar_n),
                                     "v_n," + fmt(s.v_n)};
    run.csv("constants.csv", "key,value", rows);
    std::cout << "A_n = " << s.A_n << ", v_n = " << s.v_n << "\n";
    return 0;
  }
  if (mode == "envelope") {
    const std::vector<double> v_levels = cfg.getlist("bounds", "v_levels");
    const int n = static_cast<int>(v_levels.size());
    std::vector<std::vector<double>> u0;
    for (int l = 1; l <= n; ++l) u0.push_back(cfg.getlist("bounds", "u0_" + std::to_string(l)));
    EnvelopeSurface e = gronwall_envelope(
        n, v_levels, cfg.getd("bounds", "C0"), static_cast<int>(cfg.geti("bounds", "R")), u0,
        cfg.getd("bounds", "t"), static_cast<int>(cfg.geti_or("bounds", "steps", 400)),
        cfg.geti_or("bounds", "graded", 0) != 0);
    std::vector<std::string> rows;
    for (size_t l = 0; l < e.bound.size(); ++l)
      for (size_t k = 0; k < e.bound[l].size(); ++k)
        for (size_t mi = 0; mi < e.t_grid.size(); ++mi)
          rows.push_back(std::to_string(l + 1) + "," + std::to_string(k) + "," +
                         fmt(e.t_grid[mi]) + "," + fmt(e.bound[l][k][mi]));
    run.csv("envelope.csv", "level,distance,t,bound", rows);
    std::cout << "converged = " << e.converged << ", refinement error = " << e.refinement_error
              << "\n";
    return e.converged ? 0 : 1;
  }
  throw ValidationError{"bounds mode"};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypoctl: experiment driver for the hypocoercive-smoothing toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  app.add_option("--config", config_path, "experiment config (INI)")->required();
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "override simulation.seed");
  app.add_option("--threads", threads, "worker threads (control flow is single-threaded)")
      ->check(CLI::PositiveNumber);

  std::map<std::string, std::vector<std::string>> groups = {
      {"algebra", {"chain", "verify", "span"}},
      {"coeffs", {"synth", "verify", "compare"}},
      {"smooth", {"run", "fit", "probe"}},
      {"sde", {"check"}},
      {"lattice", {"fsp", "converge", "lyapunov", "ergodic", "check-conditions"}},
      {"bounds", {"constants", "envelope"}}};
  std::string chosen_group, chosen_mode;
  for (const auto& [g, modes] : groups) {
    CLI::App* gapp = app.add_subcommand(g);
    gapp->require_subcommand(1);
    gapp->fallthrough();
    for (const std::string& m : modes) {
      CLI::App* mapp = gapp->add_subcommand(m);
      mapp->fallthrough();
      mapp->callback([&chosen_group, &chosen_mode, g = g, m = m] {
        chosen_group = g;
        chosen_mode = m;
      });
    }
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const Config cfg = Config::load(config_path);
    Run run;
    run.out = out;
    std::uint64_t hash_seed = 0;
    if (seed)
      hash_seed = *seed;
    else if (cfg.has("simulation", "seed"))
      hash_seed = static_cast<std::uint64_t>(cfg.geti("simulation", "seed"));
    run.init(cfg, hash_seed);
    int rc = 0;
    if (chosen_group == "algebra")
      rc = run_algebra(chosen_mode, cfg, run);
    else if (chosen_group == "coeffs")
      rc = run_coeffs(chosen_mode, cfg, run);
    else if (chosen_group == "smooth")
      rc = run_smooth(chosen_mode, cfg, run, seed);
    else if (chosen_group == "sde")
      rc = run_sde_check(cfg, run, seed);
    else if (chosen_group == "lattice")
      rc = run_lattice(chosen_mode, cfg, run, seed);
    else
      rc = run_bounds(chosen_mode, cfg, run);
    run.manifest();
    return rc;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.key << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

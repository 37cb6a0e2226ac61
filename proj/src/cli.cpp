#include "bubblelab/cli.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "bubblelab/errors.hpp"
#include "bubblelab/linearization.hpp"
#include "bubblelab/parallel.hpp"

namespace bubblelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double pi = std::numbers::pi;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Reads optional members of an object while recording problems per field.
class Reader {
 public:
  Reader(const json& obj, std::string prefix, std::vector<std::string>& bad,
         std::vector<std::string>& why)
      : obj_(obj), prefix_(std::move(prefix)), bad_(bad), why_(why) {}

  void allow(std::initializer_list<const char*> keys) {
    if (!obj_.is_object()) return;
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : obj_.items())
      if (!known.count(k)) fail(k, "unknown field");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        if constexpr (std::is_integral_v<T>) {
          const double d = v.get<double>();
          if (d != std::floor(d)) throw std::invalid_argument("expected an integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }

  void fail(const std::string& key, const std::string& message) {
    const std::string name = prefix_.empty() ? key : prefix_ + "." + key;
    bad_.push_back(name);
    why_.push_back(name + ": " + message);
  }

  const json& object() const { return obj_; }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& bad_;
  std::vector<std::string>& why_;
};

const json& member(const json& doc, const char* key) {
  static const json empty = json::object();
  return doc.is_object() && doc.contains(key) ? doc.at(key) : empty;
}

json fit_json(const diagnostics::LinearFit& fit) {
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"r2", fit.r2},
          {"r2_ok", fit.r2_ok},
          {"points", fit.points},
          {"window", {fit.window.lo, fit.window.hi}}};
}

struct Assertions {
  json list = json::array();
  bool failed = false;

  void add(const std::string& name, bool passed, double value, double threshold,
           const std::string& detail = {}) {
    list.push_back({{"name", name},
                    {"status", passed ? "pass" : "fail"},
                    {"value", value},
                    {"threshold", threshold},
                    {"detail", detail}});
    failed = failed || !passed;
  }
  void skip(const std::string& name, const std::string& reason) {
    list.push_back({{"name", name}, {"status", "skipped"}, {"detail", reason}});
  }
};

Branch sub_branch(const Branch& branch, double lambda_min) {
  Branch out = branch;
  out.points.clear();
  for (const auto& p : branch.points)
    if (p.lambda >= lambda_min - 1e-9) out.points.push_back(p);
  out.fold_flags = detect_folds(out.points);
  return out;
}

ContinuationOptions continuation_options(const RunConfig& config) {
  ContinuationOptions opts;
  opts.newton.r0 = config.r0;
  return opts;
}

void require_complete(const Branch& branch) {
  if (!branch.complete) throw SolverError("continuation stopped early: " + branch.failure);
}

}  // namespace

RunConfig parse_config(const json& doc) {
  std::vector<std::string> bad, why;
  RunConfig c;
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", {"<root>"});

  Reader root(doc, "", bad, why);
  root.allow({"schema", "alpha", "hstar", "mesh", "lambda", "diagnostics", "window", "r0",
              "outer_r0", "k_max", "thresholds", "output_dir"});
  std::string schema;
  root.get("schema", schema);
  if (!doc.contains("schema"))
    root.fail("schema", std::string("missing, expected \"") + kConfigSchema + "\"");
  else if (schema != kConfigSchema && doc.at("schema").is_string())
    root.fail("schema", "unsupported schema \"" + schema + "\"");

  if (!doc.contains("alpha")) root.fail("alpha", "missing");
  double alpha = c.spec.alpha;
  root.get("alpha", alpha);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    root.fail("alpha", alpha == 0.0 ? "alpha must be non-integer" : "alpha must be positive");
  } else if (std::abs(alpha - std::round(alpha)) < 1e-12) {
    root.fail("alpha", "alpha must be non-integer");
  }

  const json& hs = member(doc, "hstar");
  Reader h(hs, "hstar", bad, why);
  h.allow({"kind", "c", "beta", "coeffs"});
  std::string kind = "constant";
  h.get("kind", kind);
  greenfns::WeightSpec spec;
  spec.alpha = alpha;
  try {
    spec.kind = greenfns::hstar_kind_from_string(kind);
  } catch (const std::exception&) {
    h.fail("kind", "must be constant, gaussian or polynomial");
  }
  h.get("c", spec.c);
  h.get("beta", spec.beta);
  if (hs.is_object() && hs.contains("coeffs")) {
    const json& co = hs.at("coeffs");
    if (!co.is_array() || co.empty() ||
        !std::all_of(co.begin(), co.end(), [](const json& v) { return v.is_number(); }))
      h.fail("coeffs", "expected a non-empty array of numbers");
    else
      spec.coefficients = co.get<std::vector<double>>();
  }
  if (spec.kind == greenfns::HstarKind::polynomial && spec.coefficients.empty())
    h.fail("coeffs", "polynomial h_* needs coefficients");
  if (spec.kind == greenfns::HstarKind::constant && !(spec.c > 0.0))
    h.fail("c", "constant h_* must be positive");
  if (bad.empty()) {
    try {
      spec.validate();
    } catch (const std::exception& e) {
      h.fail("kind", e.what());
    }
  }
  c.spec = spec;

  Reader m(member(doc, "mesh"), "mesh", bad, why);
  m.allow({"nodes", "degree", "core_fraction"});
  m.get("nodes", c.mesh.nodes);
  m.get("degree", c.mesh.degree);
  m.get("core_fraction", c.mesh.core_fraction);
  if (c.mesh.nodes < 9) m.fail("nodes", "need at least 9 nodes");
  if (c.mesh.degree < 2 || c.mesh.degree > 16) m.fail("degree", "must lie in [2, 16]");
  if (!(c.mesh.core_fraction > 0.0 && c.mesh.core_fraction < 1.0))
    m.fail("core_fraction", "must lie in (0, 1)");

  Reader l(member(doc, "lambda"), "lambda", bad, why);
  l.allow({"start", "end", "steps"});
  l.get("start", c.lambda_start);
  l.get("end", c.lambda_end);
  l.get("steps", c.steps);
  if (!(c.lambda_start >= 0.0)) l.fail("start", "must be >= 0");
  if (!(c.lambda_end >= c.lambda_start)) l.fail("end", "must be >= start");
  if (c.steps < 1) l.fail("steps", "must be >= 1");
  if (c.lambda_end > c.lambda_start && c.steps < 2) l.fail("steps", "must be >= 2 for a range");

  if (doc.contains("diagnostics")) {
    const json& dj = doc.at("diagnostics");
    Reader d(dj, "diagnostics", bad, why);
    if (!dj.is_object()) {
      root.fail("diagnostics", "expected an object of booleans");
    } else {
      d.allow({"rate_fit", "local_rate_fit", "sign_law", "matching", "outer", "pohozaev", "b0",
               "uniqueness", "concentration", "nondegeneracy", "mesh_convergence", "psi1"});
      // Listed toggles switch on; an empty object switches everything off.
      Toggles t{false, false, false, false, false, false,
                false, false, false, false, false, false};
      d.get("rate_fit", t.rate_fit);
      d.get("local_rate_fit", t.local_rate_fit);
      d.get("sign_law", t.sign_law);
      d.get("matching", t.matching);
      d.get("outer", t.outer);
      d.get("pohozaev", t.pohozaev);
      d.get("b0", t.b0);
      d.get("uniqueness", t.uniqueness);
      d.get("concentration", t.concentration);
      d.get("nondegeneracy", t.nondegeneracy);
      d.get("mesh_convergence", t.mesh_convergence);
      d.get("psi1", t.psi1);
      c.diagnostics = t;
    }
  }

  if (doc.contains("window")) {
    const json& w = doc.at("window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
      root.fail("window", "expected [lo, hi]");
    } else {
      c.window = {w[0].get<double>(), w[1].get<double>()};
      if (!(c.window.lo < c.window.hi)) root.fail("window", "lo must be < hi");
    }
  }
  root.get("r0", c.r0);
  if (!(c.r0 > 0.0 && c.r0 < 1.0)) root.fail("r0", "must lie in (0, 1)");
  root.get("outer_r0", c.outer_r0);
  if (!(c.outer_r0 > 0.0 && c.outer_r0 < 1.0)) root.fail("outer_r0", "must lie in (0, 1)");
  root.get("k_max", c.k_max);
  if (c.k_max < 0 || c.k_max > 64) root.fail("k_max", "must lie in [0, 64]");
  root.get("output_dir", c.output_dir);

  Reader t(member(doc, "thresholds"), "thresholds", bad, why);
  t.allow({"slope_rel", "intercept_rel", "decay_rel", "pohozaev", "pohozaev_r_ratio", "kernel",
           "deficit", "mesh_convergence", "psi1"});
  auto& th = c.thresholds;
  t.get("slope_rel", th.slope_rel);
  t.get("intercept_rel", th.intercept_rel);
  t.get("decay_rel", th.decay_rel);
  t.get("pohozaev", th.pohozaev);
  t.get("pohozaev_r_ratio", th.pohozaev_r_ratio);
  t.get("kernel", th.kernel);
  t.get("deficit", th.deficit);
  t.get("mesh_convergence", th.mesh_convergence);
  t.get("psi1", th.psi1);

  for (const char* key : {"hstar", "mesh", "lambda", "thresholds"})
    if (doc.contains(key) && !doc.at(key).is_object()) root.fail(key, "expected an object");

  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "invalid config:";
    for (const auto& w : why) msg << " " << w << ";";
    std::string text = msg.str();
    text.pop_back();
    throw ConfigError(text, bad);
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string(), {"--config"});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(), {"<root>"});
  }
  return parse_config(doc);
}

json config_to_json(const RunConfig& c) {
  json hs = {{"kind", greenfns::to_string(c.spec.kind)}};
  switch (c.spec.kind) {
    case greenfns::HstarKind::constant: hs["c"] = c.spec.c; break;
    case greenfns::HstarKind::gaussian: hs["beta"] = c.spec.beta; break;
    case greenfns::HstarKind::polynomial: hs["coeffs"] = c.spec.coefficients; break;
  }
  const auto& d = c.diagnostics;
  const auto& t = c.thresholds;
  return {
      {"schema", kConfigSchema},
      {"alpha", c.spec.alpha},
      {"hstar", hs},
      {"mesh",
       {{"nodes", c.mesh.nodes}, {"degree", c.mesh.degree}, {"core_fraction", c.mesh.core_fraction}}},
      {"lambda", {{"start", c.lambda_start}, {"end", c.lambda_end}, {"steps", c.steps}}},
      {"diagnostics",
       {{"rate_fit", d.rate_fit},
        {"local_rate_fit", d.local_rate_fit},
        {"sign_law", d.sign_law},
        {"matching", d.matching},
        {"outer", d.outer},
        {"pohozaev", d.pohozaev},
        {"b0", d.b0},
        {"uniqueness", d.uniqueness},
        {"concentration", d.concentration},
        {"nondegeneracy", d.nondegeneracy},
        {"mesh_convergence", d.mesh_convergence},
        {"psi1", d.psi1}}},
      {"window", {c.window.lo, c.window.hi}},
      {"r0", c.r0},
      {"outer_r0", c.outer_r0},
      {"k_max", c.k_max},
      {"thresholds",
       {{"slope_rel", t.slope_rel},
        {"intercept_rel", t.intercept_rel},
        {"decay_rel", t.decay_rel},
        {"pohozaev", t.pohozaev},
        {"pohozaev_r_ratio", t.pohozaev_r_ratio},
        {"kernel", t.kernel},
        {"deficit", t.deficit},
        {"mesh_convergence", t.mesh_convergence},
        {"psi1", t.psi1}}},
      {"output_dir", c.output_dir},
  };
}

std::string config_hash(const RunConfig& config) {
  json canon = config_to_json(config);
  canon.erase("output_dir");
  const std::string text = canon.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::uint64_t config_seed(const RunConfig& config) {
  return std::stoull(config_hash(config).substr(0, 16), nullptr, 16);
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string branch_csv(const Branch& branch, const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash: " << hash << "\n";
  out << "lambda,rho,sigma,gamma,mass_total,local_mass_r0,res_norm,fold_flag\n";
  const std::set<int> folds(branch.fold_flags.begin(), branch.fold_flags.end());
  for (std::size_t i = 0; i < branch.points.size(); ++i) {
    const auto& p = branch.points[i];
    out << fmt(p.lambda) << ',' << fmt(p.rho) << ',' << fmt(p.sigma) << ',' << fmt(p.gamma) << ','
        << fmt(p.mass_total) << ',' << fmt(p.local_mass) << ',' << fmt(p.res_norm) << ','
        << (folds.count(static_cast<int>(i)) ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string field_csv(const SolutionPoint& point, const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash: " << hash << "\n";
  out << "# lambda: " << fmt(point.lambda) << "\n";
  out << "radius,u\n";
  const auto& r = point.mesh->r();
  for (std::size_t i = 0; i < r.size(); ++i) out << fmt(r[i]) << ',' << fmt(point.u[i]) << "\n";
  return out.str();
}

Branch run_branch(const RunConfig& config) {
  return continue_branch(config.lambda_start, config.lambda_end, config.steps, config.spec,
                         config.mesh, continuation_options(config));
}

CommandOutput cmd_branch(const RunConfig& config, const fs::path& out) {
  const std::string hash = config_hash(config);
  const Branch branch = run_branch(config);
  CommandOutput result;
  const fs::path csv = out / "branch.csv";
  write_atomic(csv, branch_csv(branch, hash));
  result.files.push_back(csv);
  for (std::size_t i = 0; i < branch.points.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "point_%04zu.csv", i);
    const fs::path f = out / "fields" / name;
    write_atomic(f, field_csv(branch.points[i], hash));
    result.files.push_back(f);
  }
  result.summary = {{"command", "branch"},
                    {"config_hash", hash},
                    {"points", branch.points.size()},
                    {"complete", branch.complete}};
  if (!branch.complete) {
    result.exit_code = exit_solver;
    result.summary["failure"] = branch.failure;
  }
  return result;
}

json verify_report(const RunConfig& config, const Branch& branch) {
  using namespace diagnostics;
  const auto& D = config.diagnostics;
  const auto& T = config.thresholds;
  const double a1 = 1.0 + config.spec.alpha;
  const double limit = 8.0 * pi * a1;
  const double ell = greenfns::ell_coefficient(config.spec);
  const bool degenerate = std::abs(ell) < 1e-14;
  const double sigma_rate = 1.0 / (2.0 * a1);
  Assertions checks;

  json report;
  report["schema"] = kReportSchema;
  report["config_hash"] = config_hash(config);
  report["window"] = {config.window.lo, config.window.hi};
  json meta = {{"points", branch.points.size()},
               {"complete", branch.complete},
               {"fold_flags", branch.fold_flags},
               {"alpha", config.spec.alpha},
               {"hstar", greenfns::to_string(config.spec.kind)},
               {"ell", ell}};
  if (!branch.points.empty()) {
    meta["lambda_min"] = branch.points.front().lambda;
    meta["lambda_max"] = branch.points.back().lambda;
  }
  report["branch"] = meta;
  for (const char* key : {"rate_fit", "local_rate_fit", "matching", "outer", "pohozaev", "b0",
                          "uniqueness", "concentration", "nondegeneracy", "mesh_convergence"})
    report[key] = nullptr;

  const double target_slope = degenerate ? -1.0 : -1.0 / a1;
  const double target_intercept = degenerate ? std::log(8.0 * a1 * a1) : std::log(std::abs(ell));
  auto check_rate = [&](const std::string& name, const LinearFit& fit) {
    json j = fit_json(fit);
    j["target_slope"] = target_slope;
    j["target_intercept"] = target_intercept;
    const double ds = std::abs(fit.slope - target_slope) / std::abs(target_slope);
    const double di = std::abs(fit.intercept - target_intercept) / std::abs(target_intercept);
    checks.add(name + ".slope", ds <= T.slope_rel, ds, T.slope_rel, "relative slope error");
    checks.add(name + ".intercept", di <= T.intercept_rel, di, T.intercept_rel,
               "relative intercept error");
    return j;
  };
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const InsufficientDataError& e) {
      checks.skip(name, e.what());
    } catch (const PreconditionError& e) {
      checks.skip(name, e.what());
    }
  };

  if (D.rate_fit)
    guarded("rate_fit", [&] { report["rate_fit"] = check_rate("rate_fit", rate_law_fit(branch, config.window)); });
  if (D.local_rate_fit)
    guarded("local_rate_fit", [&] {
      report["local_rate_fit"] =
          check_rate("local_rate_fit", local_rate_law_fit(branch, config.r0, config.window));
      report["local_rate_fit"]["r0"] = config.r0;
    });

  if (D.sign_law) {
    if (degenerate) {
      checks.skip("sign_law", "ell = 0");
    } else {
      int checked = 0, wrong = 0;
      for (const auto& p : branch.points) {
        if (p.lambda < config.window.lo - 1e-9) continue;
        ++checked;
        if ((p.rho - limit > 0.0) != (ell > 0.0)) ++wrong;
      }
      if (checked == 0)
        checks.skip("sign_law", "no points above the window start");
      else
        checks.add("sign_law", wrong == 0, wrong, 0, "points with sign(rho - 8 pi (1+a)) != sign ell");
    }
  }

  auto decay = [&](const std::string& name, json& slot,
                   const std::function<double(const SolutionPoint&)>& f) {
    json series = {{"lambda", json::array()}, {"residual", json::array()}};
    for (const auto& p : branch.points) {
      series["lambda"].push_back(p.lambda);
      series["residual"].push_back(f(p));
    }
    slot = series;
    guarded(name, [&] {
      const LinearFit fit = fit_log_decay(branch, f, config.window);
      slot["fit"] = fit_json(fit);
      const double bound = (1.0 - T.decay_rel) * sigma_rate;
      checks.add(name + ".decay_exponent", -fit.slope >= bound, -fit.slope, bound,
                 "fitted decay exponent vs sigma-rate");
    });
  };
  if (D.matching) decay("matching", report["matching"], matching_residual);
  if (D.outer) {
    json value, gradient;
    const double r0 = config.outer_r0;
    decay("outer", value, [&](const SolutionPoint& p) { return outer_profile_residual(p, r0); });
    decay("outer_gradient", gradient,
          [&](const SolutionPoint& p) { return outer_gradient_residual(p, r0); });
    report["outer"] = {{"r_min", r0}, {"value", value}, {"gradient", gradient}};
  }

  std::vector<FoldPair> pairs;
  if ((D.pohozaev || D.b0) && !branch.fold_flags.empty())
    pairs = find_fold_pairs(branch, config.mesh, continuation_options(config));

  if (D.pohozaev) {
    json rows = json::array();
    const double ra = 0.5 * config.r0, rb = config.r0;
    double worst = 0.0;
    int r_dependent = 0, evaluated = 0;
    for (const auto& p : branch.points) {
      if (!config.window.contains(p.lambda)) continue;
      const auto xi = local_kernel_field(p);
      const double res_a = pohozaev_residual_linearized(p, xi, ra);
      const double res_b = pohozaev_residual_linearized(p, xi, rb);
      rows.push_back({{"kind", "linearized"}, {"lambda", p.lambda}, {"r", ra}, {"residual", res_a}});
      rows.push_back({{"kind", "linearized"}, {"lambda", p.lambda}, {"r", rb}, {"residual", res_b}});
      worst = std::max({worst, std::abs(res_a), std::abs(res_b)});
      const double lo = std::min(std::abs(res_a), std::abs(res_b));
      const double hi = std::max(std::abs(res_a), std::abs(res_b));
      if (std::abs(res_a - res_b) > T.pohozaev && hi > T.pohozaev_r_ratio * lo) ++r_dependent;
      ++evaluated;
    }
    if (evaluated == 0) {
      checks.skip("pohozaev.linearized", "no points inside the window");
    } else {
      checks.add("pohozaev.linearized", worst <= T.pohozaev, worst, T.pohozaev,
                 "max |LHS - RHS| for the zero-mode field");
      checks.add("pohozaev.r_independence", r_dependent == 0, r_dependent, 0,
                 "points whose residual changes beyond tolerance between r0/2 and r0");
      const auto& top = branch.points.back();
      const std::vector<double> one(top.u.size(), 1.0);
      const double manufactured = std::abs(pohozaev_residual_linearized(top, one, rb));
      rows.push_back({{"kind", "manufactured_constant"}, {"lambda", top.lambda}, {"r", rb},
                      {"residual", manufactured}});
      checks.add("pohozaev.detects_non_solutions", manufactured >= 1e-2, manufactured, 1e-2,
                 "xi = 1 is not a solution");
    }
    double worst_pair = 0.0;
    for (const auto& pair : pairs) {
      for (double r : {ra, rb}) {
        const double res = pohozaev_residual(pair.first, pair.second, r);
        rows.push_back({{"kind", "pair"},
                        {"lambda", pair.first.lambda},
                        {"lambda_b", pair.second.lambda},
                        {"r", r},
                        {"residual", res}});
        worst_pair = std::max(worst_pair, std::abs(res));
      }
    }
    if (!pairs.empty())
      checks.add("pohozaev.pair", worst_pair <= T.pohozaev, worst_pair, T.pohozaev,
                 "fold pairs sharing rho");
    report["pohozaev"] = rows;
  }

  if (D.b0) {
    json rows = json::array();
    for (const auto& pair : pairs) {
      const auto xi = normalized_difference(pair.first, pair.second);
      const auto b0 = b0_projection(xi, pair.first, config.r0);
      rows.push_back({{"lambda_a", pair.first.lambda},
                      {"lambda_b", pair.second.lambda},
                      {"rho", pair.first.rho},
                      {"b0", b0.b0},
                      {"unreliable_scale", b0.unreliable_scale}});
    }
    report["b0"] = rows;
  }

  if (D.uniqueness) {
    guarded("uniqueness", [&] {
      const auto v = uniqueness_probe(branch, config.window);
      report["uniqueness"] = {{"lambda_mid", v.lambda_mid},
                              {"derivative", v.derivative},
                              {"sign", v.sign},
                              {"expected_sign", v.expected_sign},
                              {"constant_sign", v.constant_sign}};
      checks.add("uniqueness", v.matches_expected, v.sign, v.expected_sign,
                 "sign of d rho / d lambda on the window");
    });
  }

  if (D.concentration && !branch.points.empty()) {
    const auto& top = branch.points.back();
    if (top.lambda < config.window.hi - 1e-9) {
      checks.skip("concentration", "branch ends below the window");
    } else {
      json rows = json::array();
      double worst = 0.0;
      for (double r : {0.1, 0.25, 0.5}) {
        const double d = concentration_deficit(top, r);
        rows.push_back({{"r0", r}, {"deficit", d}});
        worst = std::max(worst, d);
      }
      report["concentration"] = {{"lambda", top.lambda}, {"deficits", rows}};
      checks.add("concentration", worst <= T.deficit, worst, T.deficit,
                 "relative local-mass deficit at the top of the branch");
    }
  }

  if (D.nondegeneracy) {
    const Branch scan_branch = degenerate ? branch : sub_branch(branch, 6.0);
    if (scan_branch.points.empty()) {
      checks.skip("nondegeneracy", "no points with lambda >= 6");
    } else {
      ScanOptions opts;
      opts.kernel_threshold = T.kernel;
      opts.seed = config_seed(config);
      opts.threads = configured_threads();
      const auto rows = nondegeneracy_scan(scan_branch, config.k_max, opts);
      json table = json::array();
      int flags = 0;
      double overall = std::numeric_limits<double>::infinity();
      for (const auto& row : rows) {
        table.push_back({{"lambda", row.lambda},
                         {"eig_min", row.eig_min},
                         {"min_magnitude", row.min_magnitude},
                         {"kernel_flag", row.kernel_flag}});
        flags += row.kernel_flag ? 1 : 0;
        overall = std::min(overall, row.min_magnitude);
      }
      report["nondegeneracy"] = {{"k_max", config.k_max}, {"rows", table}, {"kernel_flags", flags}};
      if (degenerate)
        checks.skip("nondegeneracy", "ell = 0: kernel flags are reported only");
      else
        checks.add("nondegeneracy", flags == 0, overall, T.kernel,
                   "smallest eigenvalue magnitude over points and modes");
    }
  }

  if (D.mesh_convergence && !branch.points.empty()) {
    const auto& top = branch.points.back();
    MeshPolicy fine = config.mesh;
    fine.nodes = 2 * (top.mesh->size() - 1) + 1;
    auto mesh = std::make_shared<const RadialMesh>(
        RadialMesh::for_lambda(config.spec.alpha, fine, top.lambda, config.spec.hstar(0.0)));
    NewtonOptions newton = continuation_options(config).newton;
    newton.min_iterations = 2;  // the interpolated guess can already pass the tolerance
    const SolutionPoint refined = resolve_on_mesh(top, mesh, newton);
    const double scale = std::max(std::abs(refined.rho - limit), 1e-300);
    const double change = std::abs(top.rho - refined.rho) / scale;
    report["mesh_convergence"] = {{"lambda", top.lambda},
                                  {"nodes", top.mesh->size()},
                                  {"nodes_fine", mesh->size()},
                                  {"rho", top.rho},
                                  {"rho_fine", refined.rho},
                                  {"relative_change", change}};
    checks.add("mesh_convergence", change <= T.mesh_convergence, change, T.mesh_convergence,
               "|rho - rho_fine| / |rho_fine - 8 pi (1+a)| at the top of the branch");
  }

  if (D.psi1 && !branch.points.empty()) {
    double worst = 0.0;
    for (const auto& p : branch.points) worst = std::max(worst, psi1_gradient_check(p));
    checks.add("psi1", worst <= T.psi1, worst, T.psi1, "gradient of log hbar1 e^{R_{n,1}} at 0");
  }

  report["assertions"] = checks.list;
  report["passed"] = !checks.failed;
  return report;
}

namespace {

std::string diagnostics_csv(const RunConfig& config, const Branch& branch, const std::string& hash) {
  using namespace diagnostics;
  const double limit = 8.0 * pi * (1.0 + config.spec.alpha);
  std::ostringstream out;
  out << "# config_hash: " << hash << "\n";
  out << "lambda,rho_excess,local_excess,matching,outer,outer_gradient\n";
  for (const auto& p : branch.points)
    out << fmt(p.lambda) << ',' << fmt(p.rho - limit) << ',' << fmt(p.local_mass_at(config.r0) - limit)
        << ',' << fmt(matching_residual(p)) << ',' << fmt(outer_profile_residual(p, config.outer_r0))
        << ',' << fmt(outer_gradient_residual(p, config.outer_r0)) << "\n";
  return out.str();
}

std::string fits_csv(const json& report, const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash: " << hash << "\n";
  out << "name,slope,intercept,r2,points,window_lo,window_hi,r2_ok\n";
  auto row = [&](const std::string& name, const json& f) {
    if (!f.is_object() || !f.contains("slope")) return;
    auto num = [&](const json& v) { return v.is_number() ? fmt(v.get<double>()) : std::string("nan"); };
    out << name << ',' << num(f["slope"]) << ',' << num(f["intercept"]) << ',' << num(f["r2"])
        << ',' << f["points"].get<int>() << ',' << num(f["window"][0]) << ','
        << num(f["window"][1]) << ',' << (f["r2_ok"].get<bool>() ? 1 : 0) << "\n";
  };
  row("rate_fit", report["rate_fit"]);
  row("local_rate_fit", report["local_rate_fit"]);
  if (report["matching"].is_object()) row("matching", report["matching"].value("fit", json()));
  if (report["outer"].is_object()) {
    row("outer", report["outer"]["value"].value("fit", json()));
    row("outer_gradient", report["outer"]["gradient"].value("fit", json()));
  }
  return out.str();
}

}  // namespace

CommandOutput cmd_verify(const RunConfig& config, const fs::path& out) {
  const std::string hash = config_hash(config);
  const Branch branch = run_branch(config);
  require_complete(branch);
  const json report = verify_report(config, branch);
  CommandOutput result;
  const fs::path rpath = out / "report.json";
  write_atomic(rpath, report.dump(2) + "\n");
  write_atomic(out / "fits.csv", fits_csv(report, hash));
  write_atomic(out / "diagnostics.csv", diagnostics_csv(config, branch, hash));
  result.files = {rpath, out / "fits.csv", out / "diagnostics.csv"};
  json failed = json::array();
  for (const auto& a : report["assertions"])
    if (a["status"] == "fail") failed.push_back(a["name"]);
  result.summary = {{"command", "verify"},
                    {"config_hash", hash},
                    {"passed", report["passed"]},
                    {"failed", failed}};
  result.exit_code = report["passed"].get<bool>() ? exit_ok : exit_assertion;
  return result;
}

CommandOutput cmd_spectrum(const RunConfig& config, const fs::path& out) {
  const std::string hash = config_hash(config);
  const Branch branch = run_branch(config);
  require_complete(branch);
  ScanOptions opts;
  opts.kernel_threshold = config.thresholds.kernel;
  opts.seed = config_seed(config);
  opts.threads = configured_threads();
  const auto rows = nondegeneracy_scan(branch, config.k_max, opts);
  std::ostringstream csv;
  csv << "# config_hash: " << hash << "\n";
  csv << "lambda,k,eig_min,eig_min_next,kernel_flag\n";
  int flags = 0;
  for (const auto& row : rows)
    for (int k = 0; k <= config.k_max; ++k) {
      const bool flag = std::abs(row.eig_min[k]) < config.thresholds.kernel;
      flags += flag ? 1 : 0;
      csv << fmt(row.lambda) << ',' << k << ',' << fmt(row.eig_min[k]) << ','
          << fmt(row.eig_min_next[k]) << ',' << (flag ? 1 : 0) << "\n";
    }
  CommandOutput result;
  const fs::path path = out / "spectrum.csv";
  write_atomic(path, csv.str());
  result.files = {path};
  result.summary = {{"command", "spectrum"},
                    {"config_hash", hash},
                    {"rows", rows.size() * (config.k_max + 1)},
                    {"kernel_flags", flags}};
  return result;
}

CommandOutput cmd_pohozaev(const RunConfig& config, const fs::path& out) {
  using namespace diagnostics;
  const std::string hash = config_hash(config);
  const Branch branch = run_branch(config);
  require_complete(branch);
  std::ostringstream csv;
  csv << "# config_hash: " << hash << "\n";
  csv << "kind,lambda_a,lambda_b,r,residual\n";
  const double ra = 0.5 * config.r0, rb = config.r0;
  int rows = 0;
  for (const auto& p : branch.points) {
    const auto xi = local_kernel_field(p);
    for (double r : {ra, rb}) {
      csv << "linearized," << fmt(p.lambda) << ',' << fmt(p.lambda) << ',' << fmt(r) << ','
          << fmt(pohozaev_residual_linearized(p, xi, r)) << "\n";
      ++rows;
    }
  }
  if (!branch.fold_flags.empty())
    for (const auto& pair : find_fold_pairs(branch, config.mesh, continuation_options(config)))
      for (double r : {ra, rb}) {
        csv << "pair," << fmt(pair.first.lambda) << ',' << fmt(pair.second.lambda) << ','
            << fmt(r) << ',' << fmt(pohozaev_residual(pair.first, pair.second, r)) << "\n";
        ++rows;
      }
  CommandOutput result;
  const fs::path path = out / "pohozaev.csv";
  write_atomic(path, csv.str());
  result.files = {path};
  result.summary = {{"command", "pohozaev"}, {"config_hash", hash}, {"rows", rows}};
  return result;
}

json error_json(int exit_code, const std::string& kind, const std::string& message,
                const std::vector<std::string>& fields) {
  json e = {{"exit_code", exit_code}, {"kind", kind}, {"message", message}};
  if (!fields.empty()) e["fields"] = fields;
  return {{"error", e}};
}

}  // namespace bubblelab::cli

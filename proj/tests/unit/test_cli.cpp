#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "bubblelab/cli.hpp"
#include "bubblelab/errors.hpp"

using namespace bubblelab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "schema": "bubblelab.run/1",
  "alpha": 0.5,
  "hstar": {"kind": "constant", "c": 1.0},
  "mesh": {"nodes": 64},
  "lambda": {"start": 0, "end": 2, "steps": 4}
})";

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bubblelab_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::istringstream in(csv);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

std::string header_line(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  return {};
}

cli::RunConfig config_from(const std::string& text) { return cli::parse_config(json::parse(text)); }

json with(const char* base, const json& patch) {
  json doc = json::parse(base);
  doc.merge_patch(patch);
  return doc;
}

struct RunResult {
  int code;
  std::string out, err;
};

RunResult run_tool(const std::string& args, const fs::path& dir, const std::string& env = {}) {
  const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string("\"") + BUBBLELAB_TOOL + "\" " +
                          args + " >\"" + o.string() + "\" 2>\"" + e.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST_CASE("branch: minimal config gives one row per step") {
  const auto dir = scratch_dir("branch");
  const auto cfg = config_from(kMinimal);
  const auto res = cli::cmd_branch(cfg, dir);
  CHECK(res.exit_code == cli::exit_ok);
  const std::string csv = slurp(dir / "branch.csv");
  CHECK(header_line(csv) == "lambda,rho,sigma,gamma,mass_total,local_mass_r0,res_norm,fold_flag");
  CHECK(data_rows(csv).size() == 4);
  int fields = 0;
  for (const auto& f : fs::directory_iterator(dir / "fields")) {
    ++fields;
    CHECK(header_line(slurp(f.path())) == "radius,u");
  }
  CHECK(fields == 4);
}

TEST_CASE("branch: reruns are byte-identical") {
  const auto a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  const auto cfg = config_from(kMinimal);
  cli::cmd_branch(cfg, a);
  cli::cmd_branch(cfg, b);
  CHECK(slurp(a / "branch.csv") == slurp(b / "branch.csv"));
  CHECK(slurp(a / "fields" / "point_0003.csv") == slurp(b / "fields" / "point_0003.csv"));
}

TEST_CASE("config validation") {
  try {
    cli::parse_config(with(kMinimal, {{"alpha", 1.0}}));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("alpha must be non-integer") != std::string::npos);
    CHECK(e.fields() == std::vector<std::string>{"alpha"});
  }
  try {
    cli::parse_config(with(kMinimal, {{"foo", 1}, {"mesh", {{"nodes", 3}}}, {"hstar", {{"kind", "cubic"}}}}));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto& f = e.fields();
    for (const char* name : {"foo", "mesh.nodes", "hstar.kind"})
      CHECK(std::find(f.begin(), f.end(), name) != f.end());
  }
  CHECK_THROWS_AS(cli::parse_config(with(kMinimal, {{"schema", "bubblelab.run/0"}})), ConfigError);
  CHECK_THROWS_AS(cli::parse_config(with(kMinimal, {{"alpha", -0.5}})), ConfigError);
  CHECK_THROWS_AS(cli::parse_config(with(kMinimal, {{"hstar", {{"kind", "polynomial"}, {"coeffs", {1.0, -2.0}}}}})),
                  ConfigError);
  CHECK_THROWS_AS(cli::parse_config(with(kMinimal, {{"window", {14, 8}}})), ConfigError);
  CHECK_THROWS_AS(cli::parse_config(with(kMinimal, {{"diagnostics", {{"rate", true}}}})), ConfigError);
}

TEST_CASE("config round trip and hashing") {
  const auto cfg = config_from(kMinimal);
  const json canon = cli::config_to_json(cfg);
  const auto again = cli::parse_config(canon);
  CHECK(cli::config_to_json(again).dump() == canon.dump());
  CHECK(cli::config_hash(again) == cli::config_hash(cfg));
  CHECK(cli::config_hash(cfg).size() == 64);
  CHECK(cli::config_seed(cfg) == cli::config_seed(again));

  auto moved = cfg;
  moved.output_dir = "elsewhere";
  CHECK(cli::config_hash(moved) == cli::config_hash(cfg));
  const auto other = cli::parse_config(with(kMinimal, {{"alpha", 0.6}}));
  CHECK(cli::config_hash(other) != cli::config_hash(cfg));
  const auto other2 = cli::parse_config(with(kMinimal, {{"mesh", {{"nodes", 65}}}}));
  CHECK(cli::config_hash(other2) != cli::config_hash(cfg));
}

TEST_CASE("every output file carries the config hash; no temp files remain") {
  const auto dir = scratch_dir("hash");
  const auto cfg = cli::parse_config(with(kMinimal, {{"diagnostics", json::object({{"matching", true}})},
                                                     {"lambda", {{"start", 6}, {"end", 14}, {"steps", 17}}},
                                                     {"mesh", {{"nodes", 256}}}}));
  const std::string hash = cli::config_hash(cfg);
  cli::cmd_branch(cfg, dir);
  cli::cmd_verify(cfg, dir);
  cli::cmd_spectrum(cfg, dir);
  cli::cmd_pohozaev(cfg, dir);
  int files = 0;
  for (const auto& f : fs::recursive_directory_iterator(dir)) {
    if (!f.is_regular_file()) continue;
    ++files;
    const std::string name = f.path().filename().string();
    CHECK_MESSAGE(name.find(".tmp") == std::string::npos, name);
    const std::string text = slurp(f.path());
    if (f.path().extension() == ".json")
      CHECK(json::parse(text)["config_hash"] == hash);
    else
      CHECK_MESSAGE(text.rfind("# config_hash: " + hash, 0) == 0, name);
  }
  CHECK(files >= 17 + 6);
}

TEST_CASE("verify: empty toggles give a metadata-only report") {
  const auto dir = scratch_dir("empty");
  const auto cfg = cli::parse_config(with(kMinimal, {{"diagnostics", json::object()}}));
  const auto res = cli::cmd_verify(cfg, dir);
  CHECK(res.exit_code == cli::exit_ok);
  const json report = json::parse(slurp(dir / "report.json"));
  CHECK(report["assertions"].empty());
  CHECK(report["passed"] == true);
  CHECK(report["schema"] == cli::kReportSchema);
  for (const char* key : {"rate_fit", "local_rate_fit", "matching", "outer", "pohozaev", "b0"})
    CHECK(report[key].is_null());
  CHECK(report.contains("window"));
  CHECK(report.contains("branch"));
}

TEST_CASE("verify: a coarse mesh fails the mesh-convergence check") {
  const auto dir = scratch_dir("coarse");
  const auto cfg = cli::parse_config(json::parse(R"({
    "schema": "bubblelab.run/1", "alpha": 0.5,
    "hstar": {"kind": "gaussian", "beta": 0.25},
    "mesh": {"nodes": 64},
    "lambda": {"start": 6, "end": 14, "steps": 33}
  })"));
  const auto res = cli::cmd_verify(cfg, dir);
  CHECK(res.exit_code == cli::exit_assertion);
  const json report = json::parse(slurp(dir / "report.json"));
  bool named = false;
  for (const auto& a : report["assertions"])
    if (a["name"] == "mesh_convergence") named = a["status"] == "fail";
  CHECK(named);
}

TEST_CASE("verify: reports are deterministic across runs and thread counts") {
  const auto dir = scratch_dir("verify_det");
  const std::string cfg = R"({
    "schema": "bubblelab.run/1", "alpha": 0.5,
    "hstar": {"kind": "gaussian", "beta": -0.25},
    "mesh": {"nodes": 256},
    "lambda": {"start": 6, "end": 14, "steps": 17},
    "k_max": 3
  })";
  write_file(dir / "cfg.json", cfg);
  const auto r1 = run_tool("verify --config \"" + (dir / "cfg.json").string() + "\" --out \"" + (dir / "a").string() + "\"", dir);
  const auto r2 = run_tool("verify --config \"" + (dir / "cfg.json").string() + "\" --out \"" + (dir / "b").string() + "\"", dir,
                           "BUBBLELAB_THREADS=4");
  CHECK(r1.code == r2.code);
  CHECK(r1.code != cli::exit_config);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK_FALSE(slurp(dir / "a" / "report.json").empty());
}

TEST_CASE("spectrum: rows, determinism and the ell = 0 kernel flag") {
  const auto a = scratch_dir("spec_a"), b = scratch_dir("spec_b");
  const auto cfg = cli::parse_config(with(kMinimal, {{"lambda", {{"start", 10}, {"end", 16}, {"steps", 4}}},
                                                     {"mesh", {{"nodes", 512}}},
                                                     {"k_max", 2}}));
  cli::cmd_spectrum(cfg, a);
  cli::cmd_spectrum(cfg, b);
  const std::string csv = slurp(a / "spectrum.csv");
  CHECK(csv == slurp(b / "spectrum.csv"));
  CHECK(header_line(csv) == "lambda,k,eig_min,eig_min_next,kernel_flag");
  const auto rows = data_rows(csv);
  CHECK(rows.size() == 4 * 3);
  int flagged = 0;
  for (const auto& row : rows) flagged += row.back() == '1';
  CHECK(flagged > 0);
}

TEST_CASE("pohozaev command writes linearized rows for every point") {
  const auto dir = scratch_dir("poho");
  const auto cfg = cli::parse_config(with(kMinimal, {{"lambda", {{"start", 6}, {"end", 10}, {"steps", 5}}}}));
  const auto res = cli::cmd_pohozaev(cfg, dir);
  CHECK(res.exit_code == cli::exit_ok);
  const std::string csv = slurp(dir / "pohozaev.csv");
  CHECK(header_line(csv) == "kind,lambda_a,lambda_b,r,residual");
  CHECK(data_rows(csv).size() == 10);
}

TEST_CASE("command line tool: exit codes and error documents") {
  const auto dir = scratch_dir("tool");
  write_file(dir / "ok.json", kMinimal);
  write_file(dir / "int.json", with(kMinimal, {{"alpha", 1}}).dump());
  write_file(dir / "broken.json", "{ not json");

  const auto ok = run_tool("branch --config \"" + (dir / "ok.json").string() + "\" --out \"" + (dir / "o").string() + "\"", dir);
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out)["exit_code"] == 0);
  CHECK(fs::exists(dir / "o" / "branch.csv"));

  const auto bad = run_tool("branch --config \"" + (dir / "int.json").string() + "\"", dir);
  CHECK(bad.code == 2);
  const json err = json::parse(bad.err);
  CHECK(err["error"]["exit_code"] == 2);
  CHECK(err["error"]["message"].get<std::string>().find("alpha must be non-integer") != std::string::npos);
  CHECK(err["error"]["fields"] == json::array({"alpha"}));

  CHECK(run_tool("branch --config \"" + (dir / "broken.json").string() + "\"", dir).code == 2);
  CHECK(run_tool("branch --config \"" + (dir / "missing.json").string() + "\"", dir).code == 2);
  CHECK(run_tool("verify --config \"" + (dir / "ok.json").string() + "\" --window 8", dir).code == 2);
  CHECK(run_tool("frobnicate", dir).code == 2);

  const auto windowed = run_tool("verify --config \"" + (dir / "ok.json").string() + "\" --window 0.5,2 --out \"" +
                                     (dir / "w").string() + "\"",
                                 dir);
  const json report = json::parse(slurp(dir / "w" / "report.json"));
  CHECK(report["window"] == json::array({0.5, 2.0}));
  CHECK(windowed.code != 2);
}

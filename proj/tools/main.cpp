// arena360 command line: RD fitting, navigation profiling, session
// simulation, parameter sweeps, and transmitter matching.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arena360/assignment.hpp"
#include "arena360/csv.hpp"
#include "arena360/scenario.hpp"
#include "arena360/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInfeasible = 3;

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw arena360::data_error("cannot write '" + path + "'");
  f << content;
}

int cmd_fit_rd(const std::string& samples_path, const std::string& kind_s,
               const std::string& out_path) {
  using namespace arena360;
  const RdKind kind = kind_s == "exponential" ? RdKind::exponential : RdKind::power;
  const auto samples = load_rd_samples_csv(samples_path);
  int nx = 0, ny = 0;
  for (const RdSample& s : samples) {
    nx = std::max(nx, s.n + 1);
    ny = std::max(ny, s.m + 1);
  }
  const RdModel model = fit_rd(samples, kind, nx, ny);

  nlohmann::json j;
  j["kind"] = kind == RdKind::power ? "power" : "exponential";
  j["tiles_x"] = nx;
  j["tiles_y"] = ny;
  auto& tiles = j["tiles"] = nlohmann::json::array();
  for (int m = 0; m < ny; ++m)
    for (int n = 0; n < nx; ++n) {
      const RdTileParams& t = model.tiles.at(n, m);
      nlohmann::json tj{{"n", n}, {"m", m}, {"fit_rms_rel", t.fit_rms_rel}};
      if (kind == RdKind::power) {
        tj["a"] = t.a;
        tj["b"] = t.b;
      } else {
        tj["c"] = t.c;
        tj["d"] = t.d;
      }
      tiles.push_back(tj);
    }
  write_file(out_path, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_nav_profile(const std::string& trace_path, const arena360::TilingConfig& cfg,
                    double gop_duration, double frame_rate, const std::string& out_path) {
  using namespace arena360;
  cfg.validate();
  const NavigationTrace trace = load_trace_csv(trace_path);

  std::string out = "gop,tile_x,tile_y,p\n";
  int gop = 0;
  for (double t0 = trace.t_begin(); t0 + gop_duration <= trace.t_end() + 1e-9;
       t0 += gop_duration, ++gop) {
    const GopInterval iv{t0, gop_duration, frame_rate};
    const NavigationProfile prof = profile_for_interval(trace, iv, cfg);
    for (int m = 0; m < cfg.tiles_y; ++m)
      for (int n = 0; n < cfg.tiles_x; ++n)
        out += std::to_string(gop) + ',' + std::to_string(n) + ',' + std::to_string(m) + ',' +
               format_g(prof.p.at(n, m)) + '\n';
  }
  if (gop == 0) throw std::out_of_range("trace underflow: no full GOP in trace span");
  write_file(out_path, out);
  return kExitOk;
}

int run_simulate(const arena360::Scenario& sc, const std::string& out_dir, bool quiet) {
  using namespace arena360;
  const SessionResult res = run_session(sc);
  std::filesystem::create_directories(out_dir);
  write_file(out_dir + "/metrics.csv", metrics_csv(res.gops));
  write_file(out_dir + "/summary.csv", summary_csv(sc.method, res.summary));
  if (!quiet) {
    std::printf("method          %s\n", method_name(sc.method));
    std::printf("psnr_db         %.3f  (std %.3f)\n", res.summary.psnr_mean,
                res.summary.psnr_std);
    std::printf("wspsnr_db       %.3f  (std %.3f)\n", res.summary.wspsnr_mean,
                res.summary.wspsnr_std);
    std::printf("rate_mbps       %.2f  (std %.2f)\n", res.summary.rate_mean,
                res.summary.rate_std);
    std::printf("downtime_pct    %.2f\n", res.summary.downtime_pct);
  }
  if (res.infeasible_allocations ==
      static_cast<int>(sc.traces.size()) * sc.n_gops)
    return kExitInfeasible;
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 const std::string& method_override) {
  using namespace arena360;
  Scenario sc = load_scenario_file(scenario_path);
  if (!method_override.empty())
    sc.method = scen::parse_method(method_override, "--method");
  return run_simulate(sc, out_dir, false);
}

int cmd_sweep(const std::string& scenario_path, const std::string& param,
              const std::vector<double>& values, const std::string& out_path) {
  using namespace arena360;
  if (values.empty()) {
    std::cerr << "sweep: empty value list\n";
    return kExitUsage;
  }
  std::ifstream f(scenario_path);
  if (!f) throw data_error("cannot open scenario '" + scenario_path + "'");
  nlohmann::json base;
  f >> base;

  std::string ptr_s = "/" + param;
  for (auto& c : ptr_s)
    if (c == '.') c = '/';
  const nlohmann::json::json_pointer ptr(ptr_s);
  if (!base.contains(ptr)) {
    std::cerr << "sweep: unknown param path '" << param << "'\n";
    return kExitUsage;
  }

  const auto base_dir = std::filesystem::path(scenario_path).parent_path();
  std::string out = "param,value,metric,mean,std\n";
  for (double v : values) {
    nlohmann::json j = base;
    j[ptr] = v;
    const Scenario sc = load_scenario_json(j, base_dir);
    const SessionResult res = run_session(sc);
    const auto row = [&](const char* metric, double mean, double sd) {
      out += param + ',' + format_g(v) + ',' + metric + ',' + format_g(mean) + ',' +
             format_g(sd) + '\n';
    };
    row("psnr_db", res.summary.psnr_mean, res.summary.psnr_std);
    row("wspsnr_db", res.summary.wspsnr_mean, res.summary.wspsnr_std);
    row("rate_mbps", res.summary.rate_mean, res.summary.rate_std);
    row("downtime_pct", res.summary.downtime_pct, 0.0);
  }
  write_file(out_path, out);
  return kExitOk;
}

int cmd_match(const std::string& weights_path, const std::string& objective) {
  using namespace arena360;
  std::ifstream f(weights_path);
  if (!f) throw data_error("cannot open weights '" + weights_path + "'");
  AssignmentProblem prob;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split_line(line);
    std::vector<double> row;
    for (const auto& s : fields) row.push_back(csv::parse_double(s, line_no, "weight"));
    prob.w.push_back(std::move(row));
  }
  const Assignment a =
      objective == "snr" ? max_min_snr_assign(prob) : bottleneck_match(prob);
  std::printf("user,tx\n");
  for (size_t u = 0; u < a.tx_of_user.size(); ++u)
    std::printf("%zu,%d\n", u, a.tx_of_user[u]);
  std::printf("# bottleneck,%s\n", format_g(a.bottleneck).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiled 360-degree dual-connectivity VR arena simulator"};
  app.require_subcommand(1);

  // fit-rd
  std::string fit_samples, fit_kind = "power", fit_out = "model.json";
  auto* fit = app.add_subcommand("fit-rd", "Fit a tile rate-distortion model from samples");
  fit->add_option("samples", fit_samples, "RD sample CSV (tile_x,tile_y,rate_mbps,mse)")
      ->required();
  fit->add_option("--kind", fit_kind, "Model kind")
      ->check(CLI::IsMember({"power", "exponential"}));
  fit->add_option("--out", fit_out, "Output model JSON");

  // nav-profile
  std::string nav_trace, nav_out = "profiles.csv";
  arena360::TilingConfig nav_cfg;
  double nav_gop = 1.0, nav_fps = 30.0;
  auto* nav = app.add_subcommand("nav-profile", "Per-GOP tile navigation probabilities");
  nav->add_option("trace", nav_trace, "Trace CSV (t,yaw,pitch,roll,x,y)")->required();
  nav->add_option("--width", nav_cfg.panorama_width, "Panorama width, px");
  nav->add_option("--height", nav_cfg.panorama_height, "Panorama height, px");
  nav->add_option("--tiles-x", nav_cfg.tiles_x, "Tile columns");
  nav->add_option("--tiles-y", nav_cfg.tiles_y, "Tile rows");
  nav->add_option("--fov-h", nav_cfg.fov_h_deg, "Horizontal FOV, deg");
  nav->add_option("--fov-v", nav_cfg.fov_v_deg, "Vertical FOV, deg");
  nav->add_option("--raster-grid", nav_cfg.raster_grid, "Raster samples per axis");
  nav->add_option("--gop-duration", nav_gop, "GOP duration, s");
  nav->add_option("--frame-rate", nav_fps, "Frame rate, fps");
  nav->add_option("--out", nav_out, "Output CSV");

  // simulate
  std::string sim_scenario, sim_out, sim_method;
  auto* sim = app.add_subcommand("simulate", "Run a GOP-by-GOP session");
  sim->add_option("scenario", sim_scenario, "Scenario JSON")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--method", sim_method, "Override the scenario method")
      ->check(CLI::IsMember({"proposed", "prop_no_wifi", "lifi", "dash"}));

  // sweep
  std::string sweep_scenario, sweep_param, sweep_out = "sweep.csv";
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Simulate across one scenario parameter");
  sweep->add_option("scenario", sweep_scenario, "Scenario JSON")->required();
  sweep->add_option("--param", sweep_param, "Dotted config path, e.g. budgets.xgen_tx_mbps")
      ->required();
  sweep->add_option("--values", sweep_values, "Values to sweep")->required()->delimiter(',');
  sweep->add_option("--out", sweep_out, "Output CSV");

  // match
  std::string match_weights, match_objective = "distance";
  auto* match = app.add_subcommand("match", "Bottleneck assignment on a weight matrix CSV");
  match->add_option("weights", match_weights, "Weight matrix CSV, rows = users")->required();
  match->add_option("--objective", match_objective, "distance (min) or snr (max-min)")
      ->check(CLI::IsMember({"distance", "snr"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit) return cmd_fit_rd(fit_samples, fit_kind, fit_out);
    if (*nav) return cmd_nav_profile(nav_trace, nav_cfg, nav_gop, nav_fps, nav_out);
    if (*sim) return cmd_simulate(sim_scenario, sim_out, sim_method);
    if (*sweep) return cmd_sweep(sweep_scenario, sweep_param, sweep_values, sweep_out);
    if (*match) return cmd_match(match_weights, match_objective);
  } catch (const arena360::infeasible_error& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const arena360::data_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

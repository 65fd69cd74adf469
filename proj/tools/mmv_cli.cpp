// Command-line driver: sweep-out generation, the min-max pipeline,
// varifold fixture checks, and report inspection.
//
//   mmv sweep gen --manifold '<json>' --K 64 --out dir
//   mmv minmax run --config cfg.json
//   mmv varifold check --fixture appendixC
//   mmv report show dir
//
// Exit codes: 0 converged / all checks pass, 2 non-converged, 1 error.

#include "mmv/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

static int cmd_sweep_gen(const std::string& manifold_json, int K, int mesh_res,
                         std::string morse, const std::string& out_dir) {
  mmv::Manifold m = mmv::Manifold::from_json(nlohmann::json::parse(manifold_json));
  if (morse.empty()) morse = m.morse_function_names().front();
  mmv::SweepOut f = mmv::morse_sweepout(m, morse, K, mesh_res);
  auto val = mmv::validate_sweepout(f);
  fs::create_directories(out_dir + "/slices");
  std::ofstream(out_dir + "/sweepout.json") << mmv::sweepout_to_json(f).dump() << "\n";
  std::ofstream area(out_dir + "/area.csv");
  mmv::write_area_csv(area, f);
  for (std::size_t i = 0; i < f.slices.size(); ++i)
    mmv::write_obj_file(out_dir + "/slices/slice_" + std::to_string(i) + ".obj", f.slices[i]);
  auto [arg, F] = mmv::max_slice(f);
  std::printf("sweep-out: K=%d slices=%zu singular_times=%zu max slice %.6g at t=%.4g\n", K,
              f.slices.size(), f.singular_times.size(), F, f.times[arg]);
  std::printf("continuity: measure jump %.4g (tol %.4g), hausdorff %.4g (tol %.4g)%s\n",
              val.worst_measure_jump, f.delta_cont, val.worst_hausdorff_jump, f.h_cont,
              val.ok ? "" : "  [VIOLATED]");
  return val.ok ? 0 : 1;
}

static int cmd_minmax_run(const std::string& config_path) {
  nlohmann::json j;
  std::ifstream in(config_path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open config %s\n", config_path.c_str());
    return 1;
  }
  in >> j;
  mmv::RunConfig cfg = mmv::RunConfig::from_json(j);
  mmv::WidthReport rep = mmv::run_min_max(cfg);
  std::printf("width estimate     %.8g\n", rep.width);
  std::printf("argmax time        %.6g\n", rep.argmax_time);
  std::printf("residual           %.4g\n", rep.residual);
  std::printf("lower bound        %.6g (bisecting slice %.6g)\n", rep.lower_bound,
              rep.lower_bound_certificate);
  std::printf("monotonicity       %s\n", rep.monotonicity_verdict.c_str());
  std::printf("tangent planes     %s\n", rep.tangent_verdict.c_str());
  std::printf("smoothness         %.4g\n", rep.smoothness);
  std::printf("rounds             %d (%s)\n", rep.rounds,
              rep.converged ? "converged" : "budget exhausted");
  for (const auto& w : rep.warnings) std::printf("warning: %s\n", w.c_str());
  if (!cfg.out_dir.empty()) std::printf("report written to %s/report.json\n", cfg.out_dir.c_str());
  return rep.converged ? 0 : 2;
}

static int cmd_varifold_check(const std::string& fixture, const std::string& dump_csv) {
  if (!dump_csv.empty()) {
    mmv::DiscreteVarifold V = mmv::fixture_by_name(fixture);
    std::ofstream out(dump_csv);
    mmv::write_atom_csv(out, V);
    std::printf("dumped %zu atoms of '%s' to %s\n", V.atoms.size(), fixture.c_str(),
                dump_csv.c_str());
    return 0;
  }
  auto table = mmv::run_fixtures(fixture);
  bool all_pass = true;
  for (const auto& row : table) {
    all_pass = all_pass && row.pass;
    std::printf("%-42s %s  measured=%-12.6g expected=%-12.6g %s\n", row.name.c_str(),
                row.pass ? "PASS" : "FAIL", row.measured, row.expected, row.note.c_str());
  }
  return all_pass ? 0 : 1;
}

static int cmd_report_show(const std::string& dir) {
  std::ifstream in(dir + "/report.json");
  if (!in) {
    std::fprintf(stderr, "error: no report.json under %s\n", dir.c_str());
    return 1;
  }
  nlohmann::json j;
  in >> j;
  std::printf("width %.8g at t=%.6g, residual %.4g, %s\n", j["width"].get<double>(),
              j["argmax_time"].get<double>(), j["residual"].get<double>(),
              j["converged"].get<bool>() ? "converged" : "non-converged");
  std::printf("verdicts: monotonicity=%s tangent=%s smoothness=%.4g\n",
              j["monotonicity_verdict"].get<std::string>().c_str(),
              j["tangent_verdict"].get<std::string>().c_str(), j["smoothness"].get<double>());

  // recompute the claimed values from the serialized limit slice
  mmv::Slice limit = mmv::slice_from_json(j["limit_slice"]);
  mmv::Manifold m = mmv::Manifold::from_json(j["config"]["manifold"]);
  double width = mmv::measure(limit);
  mmv::DiscreteVarifold V = mmv::from_slice(limit, 2, mmv::Domain::on_manifold(m));
  double residual = mmv::stationarity_residual(V);
  double smooth = mmv::smoothness_diagnostic(limit, limit.verts[0],
                                             0.45 * m.inj_radius_bound(), &m);
  bool ok = std::abs(width - j["width"].get<double>()) <= 1e-9 * (1.0 + width) &&
            std::abs(residual - j["residual"].get<double>()) <= 1e-9 * (1.0 + residual) &&
            std::abs(smooth - j["smoothness"].get<double>()) <= 1e-9 * (1.0 + smooth);
  std::printf("recompute from slices/limit: width %.8g residual %.4g smoothness %.4g  [%s]\n",
              width, residual, smooth, ok ? "MATCH" : "MISMATCH");
  return ok ? 0 : 1;
}

int main(int argc, char** argv) {
  CLI::App app{"min-max sweep-out widths, closed geodesics, and discrete varifolds"};
  app.require_subcommand(1);

  auto* sweep = app.add_subcommand("sweep", "sweep-out construction");
  auto* gen = sweep->add_subcommand("gen", "generate a Morse-level sweep-out");
  std::string manifold_json = R"({"kind":"round-sphere-2","params":[1.0]})";
  int K = 64, mesh_res = 256;
  std::string morse, out_dir = "out";
  gen->add_option("--manifold", manifold_json, "manifold descriptor JSON");
  gen->add_option("--K", K, "time grid size");
  gen->add_option("--mesh-res", mesh_res, "slice mesh resolution");
  gen->add_option("--morse", morse, "Morse function name (default per kind)");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* minmax = app.add_subcommand("minmax", "the min-max pipeline");
  auto* run = minmax->add_subcommand("run", "run the pipeline from a config file");
  std::string config_path;
  run->add_option("--config", config_path, "RunConfig JSON file")->required();

  auto* varifold = app.add_subcommand("varifold", "varifold fixtures and checks");
  auto* check = varifold->add_subcommand("check", "run a named fixture suite");
  std::string fixture = "appendixC", dump_csv;
  check->add_option("--fixture", fixture, "appendixC | appendixB | covering | squeeze-euclid | squeeze-sphere | all");
  check->add_option("--dump", dump_csv, "dump the named fixture's atoms to a CSV file");

  auto* report = app.add_subcommand("report", "inspect a written report");
  auto* show = report->add_subcommand("show", "print and re-verify a report directory");
  std::string report_dir;
  show->add_option("dir", report_dir, "report directory")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_sweep_gen(manifold_json, K, mesh_res, morse, out_dir);
    if (run->parsed()) return cmd_minmax_run(config_path);
    if (check->parsed()) return cmd_varifold_check(fixture, dump_csv);
    if (show->parsed()) return cmd_report_show(report_dir);
    std::fprintf(stderr, "error: missing subcommand\n");
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

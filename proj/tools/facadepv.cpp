#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "facadepv/metrics.hpp"
#include "facadepv/pipeline.hpp"

namespace fs = std::filesystem;
using namespace facadepv;

namespace {

struct EvaluateArgs {
  std::string truth;
  std::string pred;
  std::string kind = "facade";
  std::string scale_from;
  double tolerance_px = 2.0;
  std::string out;
};

MetricsRecord evaluate_pair(const EvaluateArgs& a, const std::string& truth_path, const std::string& pred_path) {
  if (a.kind == "facade") return compare_facades(load_facade(truth_path), load_facade(pred_path), a.tolerance_px);
  auto read = [](const std::string& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + p);
    return layout_from_json(nlohmann::json::parse(in));
  };
  const auto facade = load_facade(a.scale_from);
  return compare_layouts(read(truth_path), read(pred_path), facade.require_scale(), a.tolerance_px);
}

int run_evaluate(const EvaluateArgs& a) {
  if (a.kind == "layout" && a.scale_from.empty()) {
    throw Error(ErrorKind::InvalidArgument, "--kind layout needs --scale-from FACADE.json");
  }
  nlohmann::json out;
  if (fs::is_directory(a.truth)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.truth)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<double> eps;
    out["records"] = nlohmann::json::object();
    for (const auto& t : files) {
      const auto p = fs::path(a.pred) / t.filename();
      if (!fs::exists(p)) continue;
      const auto r = evaluate_pair(a, t.string(), p.string());
      eps.push_back(r.epsilon);
      out["records"][t.stem().string()] = metrics_to_json(r);
    }
    if (eps.empty()) throw Error(ErrorKind::EmptyInput, "no matching record pairs");
    out["epsilon_summary"] = summary_to_json(summarize_errors(eps));
  } else {
    out = metrics_to_json(evaluate_pair(a, a.truth, a.pred));
  }
  const auto text = out.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(a.out, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + a.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Facade photovoltaic potential assessment"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string layout_mode = "deterministic", sky = "clearsky", electrical = "efficiency";
  auto* assess = app.add_subcommand("assess", "Lay out and simulate a batch of facade records");
  assess->add_option("--facades", cfg.facades_dir, "Directory of facade records (*.json)")->required();
  assess->add_option("--weather", cfg.weather_dir, "Directory of hourly weather CSVs");
  assess->add_option("--mode", layout_mode, "Layout mode")->check(CLI::IsMember({"deterministic", "llm"}));
  assess->add_option("--sky", sky, "Irradiance source")->check(CLI::IsMember({"clearsky", "tmy"}));
  assess->add_option("--electrical", electrical, "Electrical model")
      ->check(CLI::IsMember({"efficiency", "single_diode"}));
  assess->add_option("--out", cfg.out_dir, "Report directory")->required();
  assess->add_option("--seed", cfg.seed, "Random seed");
  assess->add_option("--jobs", cfg.jobs, "Buildings processed concurrently")->check(CLI::PositiveNumber);
  assess->add_option("--min-short-edge", cfg.constraints.min_short_edge_m, "Minimum short edge (m)");
  assess->add_option("--min-long-edge", cfg.constraints.min_long_edge_m, "Minimum long edge (m)");
  assess->add_option("--edge-margin", cfg.constraints.edge_margin_m, "Wall edge margin (m)");
  assess->add_option("--year", cfg.clear_sky_year, "Year of the synthetic clear-sky series");
  assess->add_option("--albedo", cfg.albedo, "Ground albedo");
  assess->add_option("--module-efficiency", cfg.system.module_efficiency, "Module efficiency");
  assess->add_flag("--rooftop", cfg.rooftop, "Also simulate an equal-area horizontal surface");
  assess->add_flag("!--no-rectify", cfg.apply_rectification, "Ignore rectification hints");
  assess->add_option("--llm-endpoint", cfg.llm.endpoint_url, "Chat-completion URL");
  assess->add_option("--llm-model", cfg.llm.model_name, "Model name");
  assess->add_option("--llm-token-env", cfg.llm.auth_token_env, "Environment variable holding the API token");
  assess->add_option("--llm-auth-header", cfg.llm.auth_header, "Header carrying the token");
  assess->add_option("--llm-attempts", cfg.llm.max_attempts, "Attempts per wall");
  assess->add_option("--llm-max-in-flight", cfg.llm.max_in_flight, "Concurrent LLM requests");
  assess->add_option("--llm-mock", cfg.llm_mock_script, "JSON array of scripted responses (no network)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compare predicted records against ground truth");
  evaluate->add_option("--truth", ev.truth, "Truth record or directory")->required();
  evaluate->add_option("--pred", ev.pred, "Predicted record or directory")->required();
  evaluate->add_option("--kind", ev.kind, "Record kind")->check(CLI::IsMember({"facade", "layout"}));
  evaluate->add_option("--scale-from", ev.scale_from, "Facade record supplying the scale for layouts");
  evaluate->add_option("--tolerance", ev.tolerance_px, "Boundary tolerance (px)");
  evaluate->add_option("--out", ev.out, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evaluate) return run_evaluate(ev);

    cfg.layout_mode = layout_mode == "llm" ? LayoutMode::Llm : LayoutMode::Deterministic;
    cfg.sky = sky == "tmy" ? SkyMode::Tmy : SkyMode::ClearSky;
    cfg.electrical = electrical == "single_diode" ? ElectricalMode::SingleDiode : ElectricalMode::Efficiency;
    cfg.validate();
    const auto report = run_batch(cfg);
    write_reports(report, cfg);
    for (const auto& r : report.rows) {
      if (r.ok()) {
        std::cerr << fmt::format("{}: {:.2f} m2, {:.1f} kWh/yr ({})\n", r.building_id, r.estimated_area_m2,
                                 r.annual_yield_kwh, to_string(r.provenance));
      } else {
        std::cerr << fmt::format("{}: {}\n", r.building_id, r.error_message);
      }
    }
    return report.failures() == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

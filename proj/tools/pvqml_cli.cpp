// pvqml command-line tool. Talks to the library only through the C API.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pvqml/pvqml.h"

namespace {

using nlohmann::json;

// Carries a library status out of a command.
struct Failure {
  pvq_status status;
};

void check(pvq_status s, const std::string& what) {
  if (s != PVQ_OK) {
    std::cerr << "error: " << what << ": " << pvq_last_error() << " [" << pvq_status_name(s) << "]\n";
    throw Failure{s};
  }
}

struct CString {
  char* p = nullptr;
  ~CString() { pvq_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};

using Frame = Handle<pvq_frame, pvq_frame_free>;
using Config = Handle<pvq_config, pvq_config_free>;
using Model = Handle<pvq_model, pvq_model_free>;

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    std::cerr << "error: cannot write " << path.string() << "\n";
    throw Failure{PVQ_ERR_IO};
  }
}

// "1..7" or "1,2,4"
std::vector<int> parse_depths(const std::string& s) {
  std::vector<int> out;
  const auto dots = s.find("..");
  try {
    if (dots != std::string::npos) {
      const int a = std::stoi(s.substr(0, dots)), b = std::stoi(s.substr(dots + 2));
      for (int d = a; d <= b; ++d) out.push_back(d);
    } else {
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const std::exception&) {
    throw CLI::ValidationError("--depths", "expected a range like 1..7 or a list like 1,2,3");
  }
  return out;
}

std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  } catch (const std::exception&) {
    throw CLI::ValidationError("--fraction", "expected numbers like 0.25,0.5,1");
  }
  return out;
}

void load_config(Config& cfg, const std::string& path) {
  if (path.empty()) check(pvq_config_new(&cfg.p), "config");
  else check(pvq_config_load(path.c_str(), &cfg.p), "loading " + path);
}

std::string config_value(const Config& cfg, const char* key) {
  CString v;
  check(pvq_config_get(cfg.p, key, &v.p), "config");
  return v.str();
}

void load_clean(Frame& out, const std::string& path, bool quiet) {
  Frame raw;
  check(pvq_frame_load_csv(path.c_str(), &raw.p), "loading " + path);
  CString report;
  check(pvq_frame_clean(raw.p, &out.p, &report.p), "cleaning " + path);
  if (!quiet) {
    const auto r = json::parse(report.str());
    if (r.value("rows_out", 0) != r.value("rows_in", 0) || r.value("hours_inserted", 0) > 0) {
      std::cerr << "note: input was not clean; " << r.value("hours_inserted", 0) << " hours inserted, "
                << r.value("rows_excluded", 0) << " rows excluded\n";
    }
  }
}

// ------------------------------------------------------------------ commands

struct PreprocessArgs {
  std::string input, output, report;
};

void cmd_preprocess(const PreprocessArgs& a) {
  Frame raw, clean;
  check(pvq_frame_load_csv(a.input.c_str(), &raw.p), "loading " + a.input);
  CString report;
  check(pvq_frame_clean(raw.p, &clean.p, &report.p), "cleaning " + a.input);
  check(pvq_frame_write_csv(clean.p, a.output.c_str()), "writing " + a.output);
  if (!a.report.empty()) write_file(a.report, report.str() + "\n");
  const auto r = json::parse(report.str());
  std::cout << "rows in " << r["rows_in"] << ", rows out " << r["rows_out"] << ", excluded "
            << r["rows_excluded"] << ", duplicates " << r["duplicates_dropped"] << ", hours inserted "
            << r["hours_inserted"] << ", filled by day mean " << r["cells_day_mean"]
            << ", interpolated " << r["cells_interpolated"] << "\n";
  for (const auto& d : r["excluded_dates"]) std::cout << "excluded day " << d.get<std::string>() << "\n";
  std::cout << "span " << r["span_start"].get<std::string>() << " .. " << r["span_end"].get<std::string>()
            << "\n";
}

struct TrainArgs {
  std::string model, config, data, out, fraction;
  std::optional<std::size_t> folds, workers, epochs;
  std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a) {
  Config cfg;
  load_config(cfg, a.config);
  if (a.folds) check(pvq_config_set(cfg.p, "folds", std::to_string(*a.folds).c_str()), "--folds");
  if (a.workers) check(pvq_config_set(cfg.p, "workers", std::to_string(*a.workers).c_str()), "--workers");
  if (a.epochs) check(pvq_config_set(cfg.p, "epochs", std::to_string(*a.epochs).c_str()), "--epochs");
  if (a.seed) check(pvq_config_set(cfg.p, "seed", std::to_string(*a.seed).c_str()), "--seed");

  std::string model = a.model.empty() ? config_value(cfg, "model") : a.model;
  if (model.empty()) throw CLI::ValidationError("--model", "required (or set model in the config)");
  const std::string data = a.data.empty() ? config_value(cfg, "data") : a.data;
  if (data.empty()) throw CLI::ValidationError("--data", "required (or set data in the config)");
  std::string out = a.out.empty() ? config_value(cfg, "out") : a.out;
  if (out.empty()) out = "runs/" + model;

  Frame frame;
  load_clean(frame, data, false);

  CString result;
  if (!a.fraction.empty()) {
    const auto fr = parse_fractions(a.fraction);
    const auto s = pvq_train_reduced(frame.p, cfg.p, model.c_str(), fr.data(), fr.size(), out.c_str(), &result.p);
    if (result.p) {
      for (const auto& r : json::parse(result.str())) {
        std::cout << r["model"].get<std::string>() << " fraction " << r["fraction"] << ": ";
        if (r["ok"].get<bool>()) {
          std::cout << "test RMSE " << r["test"]["rmse"] << ", MAE " << r["test"]["mae"]
                    << " (" << r["train_samples"] << " training samples)\n";
        } else {
          std::cout << "failed: " << r.value("error", std::string("unknown")) << "\n";
        }
      }
    }
    check(s, "reduced-data training");
  } else {
    if (model.find(',') != std::string::npos) {
      throw CLI::ValidationError("--model", "several models are only accepted together with --fraction");
    }
    const auto s = pvq_train_cv(frame.p, cfg.p, model.c_str(), out.c_str(), &result.p);
    if (result.p) {
      const auto r = json::parse(result.str());
      std::cout << model << ": " << r["total_params"] << " trainable parameters\n";
      for (const auto& f : r["folds"]) {
        std::cout << "fold " << f["fold"] << ": ";
        if (f["ok"].get<bool>()) {
          std::cout << "test MAE " << f["test"]["mae"] << ", MSE " << f["test"]["mse"]
                    << ", best epoch " << f["best_epoch"] << "\n";
        } else {
          std::cout << "failed: " << f.value("error", std::string("unknown")) << "\n";
        }
      }
      const auto& agg = r["aggregate"];
      if (agg["folds"].get<std::size_t>() > 0) {
        std::cout << "mean test MAE " << agg["mean"]["mae"] << " +- " << agg["std"]["mae"] << ", MSE "
                  << agg["mean"]["mse"] << " over " << agg["folds"] << " folds\n";
      }
    }
    check(s, "training");
  }
  std::cout << "artifacts in " << out << "\n";
}

struct ForecastArgs {
  std::string model_file, history, out;
  std::size_t horizon = 1;
  bool clamp = false;
};

void cmd_forecast(const ForecastArgs& a) {
  Model model;
  check(pvq_model_load(a.model_file.c_str(), &model.p), "loading " + a.model_file);
  Frame history;
  load_clean(history, a.history, true);
  std::vector<double> values(a.horizon);
  CString csv;
  check(pvq_model_forecast(model.p, history.p, a.horizon, a.clamp ? 1 : 0, values.data(), &csv.p), "forecast");
  if (a.out.empty()) std::cout << csv.str();
  else write_file(a.out, csv.str());
}

struct EvaluateArgs {
  std::string model_file, data, out;
  std::size_t horizon = 0;
};

void cmd_evaluate(const EvaluateArgs& a) {
  Model model;
  check(pvq_model_load(a.model_file.c_str(), &model.p), "loading " + a.model_file);
  Frame frame;
  load_clean(frame, a.data, true);
  CString doc;
  check(pvq_model_evaluate(model.p, frame.p, a.horizon, &doc.p), "evaluate");
  if (a.out.empty()) std::cout << doc.str() << "\n";
  else write_file(a.out, doc.str() + "\n");
}

struct AnalyzeArgs {
  std::string kind, circuit = "vvrq", depths, dims, options, out;
  std::optional<int> depth;
  std::optional<std::size_t> theta_draws, x_draws, workers;
  std::optional<std::uint64_t> seed;
  bool reupload = false, no_reupload = false;
};

void cmd_analyze(const AnalyzeArgs& a) {
  json o = a.options.empty() ? json::object() : json::parse(a.options, nullptr, false);
  if (o.is_discarded() || !o.is_object()) throw CLI::ValidationError("--options", "expected a JSON object");
  std::optional<std::uint64_t> seed = a.seed;
  if (!seed) {
    if (const char* env = std::getenv("PVQML_SEED")) seed = std::stoull(env);
  }
  if (seed) o["seed"] = *seed;
  if (a.theta_draws) o["theta_draws"] = *a.theta_draws;
  if (a.workers) o["workers"] = *a.workers;
  if (a.reupload) o["reupload"] = true;
  if (a.no_reupload) o["reupload"] = false;
  const std::filesystem::path out = std::filesystem::path(a.out.empty() ? "analysis" : a.out);
  CString result;

  if (a.kind == "fim") {
    if (!a.depths.empty()) o["depths"] = parse_depths(a.depths);
    if (a.x_draws) o["x_draws"] = *a.x_draws;
    check(pvq_analyze_fim(a.circuit.c_str(), o.dump().c_str(), &result.p), "FIM analysis");
    auto r = json::parse(result.str());
    write_file(out / (a.circuit + "_fim_rank_curve.csv"), r["csv"]["rank_curve"].get<std::string>());
    write_file(out / (a.circuit + "_fim_eigenvalues.csv"), r["csv"]["eigenvalues"].get<std::string>());
    write_file(out / (a.circuit + "_fim_histogram.csv"), r["csv"]["histogram"].get<std::string>());
    r.erase("csv");
    write_file(out / (a.circuit + "_fim.json"), r.dump(2) + "\n");
    std::cout << "depth,n_params,rank\n";
    for (const auto& p : r["curve"]) std::cout << p["depth"] << ',' << p["n_params"] << ',' << p["rank"] << "\n";
    std::cout << "rank strictly increasing: " << (r["rank_strictly_increasing"].get<bool>() ? "yes" : "no");
    if (!r["saturation_depth"].is_null()) std::cout << " (stops growing after depth " << r["saturation_depth"] << ")";
    std::cout << "\nnear-zero eigenvalue fraction at depth " << r["deepest"]["depth"] << ": "
              << r["deepest"]["near_zero_fraction"] << "\n";
  } else {
    if (a.depth) o["depth"] = *a.depth;
    if (!a.dims.empty()) o["dims"] = parse_depths(a.dims);
    check(pvq_analyze_fourier(a.circuit.c_str(), o.dump().c_str(), &result.p), "Fourier analysis");
    auto r = json::parse(result.str());
    write_file(out / (a.circuit + "_fourier_coefficients.csv"), r["csv"]["coefficients"].get<std::string>());
    write_file(out / (a.circuit + "_fourier_draws.csv"), r["csv"]["draws"].get<std::string>());
    r.erase("csv");
    write_file(out / (a.circuit + "_fourier.json"), r.dump(2) + "\n");
    std::cout << "scanned feature slots " << r["dims"].dump() << ", degrees " << r["degrees"].dump() << "\n"
              << "nonzero coefficients " << r["nonzero"] << " of " << r["grid_size"] << " ("
              << r["nonzero_fraction"].get<double>() * 100.0 << "%)\n"
              << "nonzero real components " << r["nonzero_components"] << " of " << r["components"] << "\n";
  }
  std::cout << "CSV files in " << out.string() << "\n";
}

struct SynthArgs {
  std::size_t days = 60;
  std::uint64_t seed = 1;
  std::string output;
};

void cmd_synth(const SynthArgs& a) {
  Frame frame;
  check(pvq_frame_synth(a.days, a.seed, &frame.p), "synth");
  check(pvq_frame_write_csv(frame.p, a.output.c_str()), "writing " + a.output);
  std::size_t rows = 0;
  pvq_frame_rows(frame.p, &rows);
  std::cout << rows << " hourly rows written to " << a.output << "\n";
}

struct ConfigArgs {
  std::string model, config;
};

void cmd_config(const ConfigArgs& a) {
  Config cfg;
  load_config(cfg, a.config);
  CString text;
  check(pvq_config_render(cfg.p, a.model.empty() ? nullptr : a.model.c_str(), &text.p), "config");
  std::cout << text.str();
}

void cmd_info(const std::string& path) {
  Model model;
  check(pvq_model_load(path.c_str(), &model.p), "loading " + path);
  CString info;
  check(pvq_model_info(model.p, &info.p), "info");
  std::cout << info.str() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid quantum-classical PV power forecasting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pvq_version()));

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Clean a raw hourly CSV");
  c_pre->add_option("--input", pre.input, "raw CSV")->required();
  c_pre->add_option("--output", pre.output, "cleaned CSV")->required();
  c_pre->add_option("--report", pre.report, "write the cleaning report as JSON");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Cross-validate a model, or run reduced-data cells");
  c_train->add_option("--model", tr.model, "mlp|hqnn|lstm|hqlstm|seq2seq|hqseq2seq (comma list with --fraction)");
  c_train->add_option("--config", tr.config, "key = value run configuration");
  c_train->add_option("--data", tr.data, "cleaned CSV");
  c_train->add_option("--folds", tr.folds, "number of folds");
  c_train->add_option("--out", tr.out, "output directory");
  c_train->add_option("--fraction", tr.fraction, "training-data fractions, e.g. 0.25,0.5,1");
  c_train->add_option("--workers", tr.workers, "parallel folds or cells");
  c_train->add_option("--epochs", tr.epochs, "override the epoch count");
  c_train->add_option("--seed", tr.seed, "override the seed");

  ForecastArgs fc;
  auto* c_fc = app.add_subcommand("forecast", "Forecast from a trained model");
  c_fc->add_option("--model-file", fc.model_file)->required();
  c_fc->add_option("--history", fc.history, "recent hourly CSV")->required();
  c_fc->add_option("--horizon", fc.horizon, "hours ahead")->check(CLI::PositiveNumber);
  c_fc->add_option("--out", fc.out, "forecast CSV (stdout when omitted)");
  c_fc->add_flag("--clamp", fc.clamp, "limit forecasts to the power range seen in training");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Metrics of a trained model on a CSV");
  c_ev->add_option("--model-file", ev.model_file)->required();
  c_ev->add_option("--data", ev.data)->required();
  c_ev->add_option("--horizon", ev.horizon, "0: model default");
  c_ev->add_option("--out", ev.out, "metrics JSON (stdout when omitted)");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Circuit diagnostics");
  c_an->add_option("kind", an.kind, "fim or fourier")->required()->check(CLI::IsMember({"fim", "fourier"}));
  c_an->add_option("--circuit", an.circuit, "vvrq or qdi");
  c_an->add_option("--depths", an.depths, "FIM depths, e.g. 1..7");
  c_an->add_option("--depth", an.depth, "Fourier circuit depth");
  c_an->add_option("--dims", an.dims, "Fourier feature slots to scan, e.g. 0,1");
  c_an->add_option("--theta-draws", an.theta_draws);
  c_an->add_option("--x-draws", an.x_draws);
  c_an->add_option("--seed", an.seed);
  c_an->add_option("--workers", an.workers);
  c_an->add_flag("--reupload", an.reupload, "QDI re-uploads the same features in every block");
  c_an->add_flag("--no-reupload", an.no_reupload, "QDI encodes fresh features in every block");
  c_an->add_option("--options", an.options, "extra options as a JSON object");
  c_an->add_option("--out", an.out, "output directory (default: analysis)");

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "Write a synthetic PV dataset");
  c_sy->add_option("--days", sy.days)->check(CLI::PositiveNumber);
  c_sy->add_option("--seed", sy.seed);
  c_sy->add_option("--output", sy.output)->required();

  ConfigArgs cf;
  auto* c_cf = app.add_subcommand("config", "Print the resolved configuration");
  c_cf->add_option("--model", cf.model);
  c_cf->add_option("--config", cf.config);

  std::string info_path;
  auto* c_info = app.add_subcommand("info", "Describe a model file");
  c_info->add_option("--model-file", info_path)->required();

  try {
    app.parse(argc, argv);
    if (*c_pre) cmd_preprocess(pre);
    else if (*c_train) cmd_train(tr);
    else if (*c_fc) cmd_forecast(fc);
    else if (*c_ev) cmd_evaluate(ev);
    else if (*c_an) cmd_analyze(an);
    else if (*c_sy) cmd_synth(sy);
    else if (*c_cf) cmd_config(cf);
    else if (*c_info) cmd_info(info_path);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Failure& f) {
    return pvq_exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "pvqml/pvqml.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"
#include "pvqml/analysis.hpp"
#include "pvqml/config.hpp"
#include "pvqml/error.hpp"
#include "pvqml/plot.hpp"
#include "pvqml/train.hpp"

using namespace pvqml;
using nlohmann::json;

struct pvq_frame {
  data::TimeSeriesFrame frame;
};

struct pvq_config {
  config::RunConfig cfg;
};

struct pvq_model {
  models::SavedModel saved;
};

namespace {

thread_local std::string g_last_error;

// Raised inside an API call to return a status after the outputs are set.
struct SoftFailure {
  pvq_status status;
  std::string message;
};

pvq_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return PVQ_ERR_CONFIG;
    case ErrorKind::Shape: return PVQ_ERR_SHAPE;
    case ErrorKind::Contract: return PVQ_ERR_CONTRACT;
    case ErrorKind::Parse: return PVQ_ERR_PARSE;
    case ErrorKind::Schema: return PVQ_ERR_SCHEMA;
    case ErrorKind::Cleaning: return PVQ_ERR_CLEANING;
    case ErrorKind::Scaling: return PVQ_ERR_SCALING;
    case ErrorKind::Unsupported: return PVQ_ERR_UNSUPPORTED;
    case ErrorKind::Training: return PVQ_ERR_TRAINING;
    case ErrorKind::Io: return PVQ_ERR_IO;
    case ErrorKind::Format: return PVQ_ERR_FORMAT;
  }
  return PVQ_ERR_INTERNAL;
}

template <class Fn>
pvq_status guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PVQ_OK;
  } catch (const SoftFailure& s) {
    g_last_error = s.message;
    return s.status;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid options: ") + e.what();
    return PVQ_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PVQ_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PVQ_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PVQ_ERR_INTERNAL;
  }
}

pvq_status null_argument() {
  g_last_error = "required argument is NULL";
  return PVQ_ERR_NULL_ARGUMENT;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::filesystem::path prepare_dir(const char* dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
  return p;
}

const config::RunConfig& config_or_empty(const pvq_config* cfg) {
  static const config::RunConfig empty;
  return cfg ? cfg->cfg : empty;
}

train::TrainConfig resolve(const pvq_config* cfg, const char* model) {
  std::optional<models::ModelKind> kind;
  if (model) kind = models::parse_model_kind(model);
  return config::resolve_train_config(config_or_empty(cfg), kind);
}

std::string history_svg(const std::string& title, const std::vector<train::EpochRecord>& h) {
  plot::Series tr{"train", {}, {}}, te{"test", {}, {}};
  for (const auto& e : h) {
    tr.x.push_back(static_cast<double>(e.epoch));
    te.x.push_back(static_cast<double>(e.epoch));
    tr.y.push_back(e.train_loss);
    te.y.push_back(e.test_loss);
  }
  return plot::line_chart({title, "epoch", "MSE (scaled)"}, {tr, te});
}

std::string fraction_tag(double f) {
  std::ostringstream os;
  os << f;
  return os.str();
}

template <class T>
T option(const json& o, const char* key, T fallback) {
  return o.contains(key) ? o.at(key).get<T>() : fallback;
}

void reject_unknown(const json& o, std::initializer_list<const char*> keys) {
  if (!o.is_object()) throw ConfigError("options must be a JSON object");
  for (const auto& [k, v] : o.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end()) {
      throw ConfigError("unknown option '" + k + "'");
    }
  }
}

json parse_options(const char* options_json) {
  if (!options_json || !*options_json) return json::object();
  return json::parse(options_json);
}

qsim::Pauli pauli_option(const json& o, const char* key, qsim::Pauli fallback) {
  if (!o.contains(key)) return fallback;
  const auto s = o.at(key).get<std::string>();
  if (s.size() != 1) throw ConfigError(std::string(key) + " must be x, y or z");
  return qsim::parse_pauli(static_cast<char>(std::toupper(static_cast<unsigned char>(s[0]))));
}

layers::VvrqConfig vvrq_from(const json& o, int depth) {
  layers::VvrqConfig c;
  c.qubits = option(o, "qubits", c.qubits);
  c.depth = depth;
  c.embedding = pauli_option(o, "embedding", c.embedding);
  c.measure = pauli_option(o, "measurement", c.measure);
  const auto ent = option<std::string>(o, "entanglement", "basic");
  if (ent != "basic" && ent != "strongly") throw ConfigError("entanglement must be basic or strongly");
  c.entanglement = ent == "basic" ? layers::Entanglement::Basic : layers::Entanglement::Strong;
  c.validate();
  return c;
}

layers::QdiConfig qdi_from(const json& o, int depth, bool reupload_default) {
  layers::QdiConfig c;
  c.qubits = option(o, "qubits", c.qubits);
  c.depth = depth;
  c.reupload = option(o, "reupload", reupload_default);
  const auto r = option<std::string>(o, "readout", "scalar_y");
  if (r != "scalar_y" && r != "vector_z") throw ConfigError("readout must be scalar_y or vector_z");
  c.readout = r == "scalar_y" ? layers::QdiReadout::ScalarY : layers::QdiReadout::VectorZ;
  c.validate();
  return c;
}

void check_circuit(const std::string& c) {
  if (c != "vvrq" && c != "qdi") throw ConfigError("unknown circuit '" + c + "' (expected vvrq or qdi)");
}

}  // namespace

extern "C" {

const char* pvq_version(void) { return "1.0.0"; }

const char* pvq_last_error(void) { return g_last_error.c_str(); }

const char* pvq_status_name(pvq_status status) {
  switch (status) {
    case PVQ_OK: return "ok";
    case PVQ_ERR_CONFIG: return "config";
    case PVQ_ERR_SHAPE: return "shape";
    case PVQ_ERR_CONTRACT: return "contract";
    case PVQ_ERR_PARSE: return "parse";
    case PVQ_ERR_SCHEMA: return "schema";
    case PVQ_ERR_CLEANING: return "cleaning";
    case PVQ_ERR_SCALING: return "scaling";
    case PVQ_ERR_UNSUPPORTED: return "unsupported";
    case PVQ_ERR_TRAINING: return "training";
    case PVQ_ERR_IO: return "io";
    case PVQ_ERR_FORMAT: return "format";
    case PVQ_ERR_NULL_ARGUMENT: return "null-argument";
    case PVQ_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int pvq_exit_code(pvq_status status) {
  switch (status) {
    case PVQ_OK: return 0;
    case PVQ_ERR_IO: return 2;
    case PVQ_ERR_FORMAT:
    case PVQ_ERR_PARSE:
    case PVQ_ERR_SCHEMA: return 3;
    default: return 1;
  }
}

void pvq_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------- frames

pvq_status pvq_frame_load_csv(const char* path, pvq_frame** out) {
  if (!path || !out) return null_argument();
  return guard([&] { *out = new pvq_frame{data::load_csv(path)}; });
}

pvq_status pvq_frame_synth(size_t days, uint64_t seed, pvq_frame** out) {
  if (!out) return null_argument();
  return guard([&] { *out = new pvq_frame{data::synth_generate(days, seed)}; });
}

pvq_status pvq_frame_clean(const pvq_frame* raw, pvq_frame** out, char** report_json) {
  if (!raw || !out) return null_argument();
  return guard([&] {
    data::CleanReport report;
    auto cleaned = std::make_unique<pvq_frame>(pvq_frame{data::clean(raw->frame, &report)});
    if (report_json) *report_json = dup(json(report).dump(2));
    *out = cleaned.release();
  });
}

pvq_status pvq_frame_write_csv(const pvq_frame* frame, const char* path) {
  if (!frame || !path) return null_argument();
  return guard([&] { data::write_csv(frame->frame, path); });
}

pvq_status pvq_frame_rows(const pvq_frame* frame, size_t* rows) {
  if (!frame || !rows) return null_argument();
  *rows = frame->frame.size();
  return PVQ_OK;
}

void pvq_frame_free(pvq_frame* frame) { delete frame; }

// ---------------------------------------------------------------- config

pvq_status pvq_config_new(pvq_config** out) {
  if (!out) return null_argument();
  return guard([&] { *out = new pvq_config{}; });
}

pvq_status pvq_config_load(const char* path, pvq_config** out) {
  if (!path || !out) return null_argument();
  return guard([&] { *out = new pvq_config{config::load_run_config(path)}; });
}

pvq_status pvq_config_set(pvq_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return null_argument();
  return guard([&] { cfg->cfg.set(key, value); });
}

pvq_status pvq_config_get(const pvq_config* cfg, const char* key, char** value) {
  if (!cfg || !key || !value) return null_argument();
  return guard([&] { *value = cfg->cfg.has(key) ? dup(cfg->cfg.get(key)) : nullptr; });
}

pvq_status pvq_config_render(const pvq_config* cfg, const char* model, char** text) {
  if (!text) return null_argument();
  return guard([&] { *text = dup(config::render_run_config(resolve(cfg, model))); });
}

void pvq_config_free(pvq_config* cfg) { delete cfg; }

pvq_status pvq_param_count(const pvq_config* cfg, const char* model, size_t* count) {
  if (!model || !count) return null_argument();
  return guard([&] { *count = resolve(cfg, model).resolved_descriptor().total_params; });
}

// ---------------------------------------------------------------- training

pvq_status pvq_train_cv(const pvq_frame* frame, const pvq_config* cfg, const char* model,
                        const char* out_dir, char** result_json) {
  if (!frame) return null_argument();
  return guard([&] {
    const auto tc = resolve(cfg, model);
    const auto cv = train::cross_validate(tc, frame->frame);
    const auto name = models::to_string(tc.model);

    json doc = cv;
    doc["model"] = name;
    doc["total_params"] = tc.resolved_descriptor().total_params;
    doc["config"] = tc;

    std::size_t failed = 0;
    std::string first_error;
    for (const auto& f : cv.folds) {
      if (!f.ok) {
        ++failed;
        if (first_error.empty()) first_error = "fold " + std::to_string(f.fold) + ": " + f.error;
      }
    }
    if (out_dir) {
      const auto dir = prepare_dir(out_dir);
      json files = json::array();
      for (const auto& f : cv.folds) {
        if (!f.result) continue;
        const auto stem = "fold_" + std::to_string(f.fold);
        models::save_model((dir / (stem + ".model.json")).string(), f.result->model, f.scaler);
        write_text(dir / (stem + ".history.csv"), train::history_csv(f.result->history));
        write_text(dir / (stem + ".history.svg"),
                   history_svg(name + " fold " + std::to_string(f.fold), f.result->history));
        files.push_back(stem + ".model.json");
      }
      doc["model_files"] = files;
      write_text(dir / "metrics.json", doc.dump(2) + "\n");
      write_text(dir / "run.cfg", config::render_run_config(tc));
    }
    if (result_json) *result_json = dup(doc.dump(2));
    if (failed) {
      throw SoftFailure{PVQ_ERR_TRAINING, std::to_string(failed) + " of " +
                                              std::to_string(cv.folds.size()) +
                                              " folds failed; " + first_error};
    }
  });
}

pvq_status pvq_train_reduced(const pvq_frame* frame, const pvq_config* cfg, const char* model_list,
                             const double* fractions, size_t n_fractions, const char* out_dir,
                             char** result_json) {
  if (!frame || !model_list || (!fractions && n_fractions)) return null_argument();
  return guard([&] {
    if (n_fractions == 0) throw ContractError("at least one training fraction is required");
    std::vector<train::TrainConfig> configs;
    std::stringstream ss(model_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) configs.push_back(resolve(cfg, item.c_str()));
    }
    if (configs.empty()) throw ConfigError("no model given");
    const std::vector<double> fr(fractions, fractions + n_fractions);
    const auto rows = train::reduced_data_experiment(configs, frame->frame, fr);

    json doc = json::array();
    std::ostringstream csv;
    csv << "model,fraction,ok,train_samples,test_samples,mse,rmse,mae,r2,persistence_mse\n";
    std::size_t failed = 0;
    for (const auto& r : rows) {
      const auto name = models::to_string(r.model);
      json j = r.run;
      j["model"] = name;
      j["fraction"] = r.fraction;
      doc.push_back(j);
      const auto& m = r.run.test_metrics;
      csv << name << ',' << r.fraction << ',' << (r.run.ok ? 1 : 0) << ',' << r.run.train_samples << ','
          << r.run.test_samples << ',' << m.mse << ',' << m.rmse << ',' << m.mae << ',' << m.r2 << ','
          << r.run.persistence_metrics.mse << '\n';
      if (!r.run.ok) ++failed;
    }
    if (out_dir) {
      const auto dir = prepare_dir(out_dir);
      for (const auto& r : rows) {
        if (!r.run.result) continue;
        const auto stem = models::to_string(r.model) + "_f" + fraction_tag(r.fraction);
        models::save_model((dir / (stem + ".model.json")).string(), r.run.result->model, r.run.scaler);
        write_text(dir / (stem + ".history.csv"), train::history_csv(r.run.result->history));
      }
      write_text(dir / "reduced_data.csv", csv.str());
      std::vector<std::string> cats;
      for (double f : fr) cats.push_back(fraction_tag(f));
      std::vector<plot::BarGroup> groups;
      for (std::size_t c = 0; c < configs.size(); ++c) {
        plot::BarGroup g{models::to_string(configs[c].model), {}};
        for (std::size_t k = 0; k < fr.size(); ++k) {
          g.values.push_back(rows[c * fr.size() + k].run.test_metrics.rmse);
        }
        groups.push_back(g);
      }
      write_text(dir / "reduced_data.svg",
                 plot::bar_chart({"Test RMSE by training fraction", "fraction of training data", "RMSE"},
                                 cats, groups));
      write_text(dir / "reduced_data.json", doc.dump(2) + "\n");
    }
    if (result_json) *result_json = dup(doc.dump(2));
    if (failed) {
      throw SoftFailure{PVQ_ERR_TRAINING, std::to_string(failed) + " of " + std::to_string(rows.size()) +
                                              " runs failed"};
    }
  });
}

// ---------------------------------------------------------------- models

pvq_status pvq_model_load(const char* path, pvq_model** out) {
  if (!path || !out) return null_argument();
  return guard([&] { *out = new pvq_model{models::load_model(path)}; });
}

pvq_status pvq_model_info(const pvq_model* model, char** out) {
  if (!model || !out) return null_argument();
  return guard([&] {
    json j{{"descriptor", model->saved.model.descriptor()},
           {"total_params", model->saved.model.param_count()}};
    if (model->saved.scaler) j["scaler"] = *model->saved.scaler;
    *out = dup(j.dump(2));
  });
}

pvq_status pvq_model_forecast(const pvq_model* model, const pvq_frame* history, size_t horizon,
                              int clamp, double* values, char** csv) {
  if (!model || !history || !values) return null_argument();
  return guard([&] {
    const auto& m = model->saved.model;
    if (!model->saved.scaler) throw ContractError("model file carries no scaler");
    const auto& st = *model->saved.scaler;
    if (horizon == 0) throw ContractError("horizon must be at least 1");
    const auto& frame = history->frame;
    const bool seq = models::is_sequence_model(m.kind());
    if (!seq && horizon != 1) {
      throw ConfigError(models::to_string(m.kind()) +
                        " forecasts one hour ahead; use a sequence model for longer horizons");
    }
    const std::size_t rows = seq ? frame.size() : m.descriptor().window;
    if (frame.size() < std::max<std::size_t>(rows, 1)) {
      throw ContractError("history has " + std::to_string(frame.size()) + " rows, the model needs " +
                          std::to_string(rows));
    }
    const auto scaled = data::apply_scaler(frame, st);
    std::vector<double> input;
    input.reserve(rows * data::kColumns);
    for (std::size_t r = frame.size() - rows; r < frame.size(); ++r) {
      for (double v : scaled.rows[r]) {
        if (!std::isfinite(v)) throw ContractError("history contains missing values; clean it first");
        input.push_back(v);
      }
    }
    const auto pred = seq ? models::seq2seq_forecast(m, input, rows, horizon)
                          : std::vector<double>{models::forecast_next_hour(m, input)};
    const std::size_t p = data::kPowerColumn;
    std::ostringstream os;
    os.precision(10);
    os << "timestamp,P\n";
    for (std::size_t k = 0; k < horizon; ++k) {
      double v = st.unscale(p, pred[k]);
      if (clamp) v = std::clamp(v, st.min[p], st.max[p]);
      values[k] = v;
      const auto ts = frame.timestamps.back() + static_cast<data::Timestamp>(k + 1) * data::kHour;
      os << data::format_timestamp(ts) << ',' << v << '\n';
    }
    if (csv) *csv = dup(os.str());
  });
}

pvq_status pvq_model_evaluate(const pvq_model* model, const pvq_frame* frame, size_t horizon,
                              char** out) {
  if (!model || !frame || !out) return null_argument();
  return guard([&] {
    const auto& m = model->saved.model;
    if (!model->saved.scaler) throw ContractError("model file carries no scaler");
    const std::size_t w = m.descriptor().window;
    const bool seq = models::is_sequence_model(m.kind());
    if (horizon == 0) horizon = seq ? w : 1;
    if (!seq && horizon != 1) throw ConfigError("hour-ahead models are evaluated with horizon 1");
    const auto ds = data::window(data::apply_scaler(frame->frame, *model->saved.scaler), w, horizon, 1);
    const auto pred = train::predict_dataset(m, ds);
    json j{{"model", models::to_string(m.kind())},
           {"samples", ds.count},
           {"window", w},
           {"horizon", horizon},
           {"metrics", metrics::compute_metrics(pred, ds.targets)}};
    if (w >= 24) j["persistence"] = metrics::compute_metrics(train::persistence_baseline(ds), ds.targets);
    *out = dup(j.dump(2));
  });
}

void pvq_model_free(pvq_model* model) { delete model; }

// ---------------------------------------------------------------- analysis

pvq_status pvq_analyze_fim(const char* circuit, const char* options_json, char** result_json) {
  if (!circuit || !result_json) return null_argument();
  return guard([&] {
    const std::string name = circuit;
    check_circuit(name);
    const json o = parse_options(options_json);
    reject_unknown(o, {"depths", "theta_draws", "x_draws", "seed", "tolerance", "workers", "bins",
                       "qubits", "embedding", "measurement", "entanglement", "readout", "reupload"});
    const bool vvrq = name == "vvrq";
    std::vector<int> depths = vvrq ? std::vector<int>{1, 2, 3, 4, 5, 6, 7} : std::vector<int>{1, 2, 3, 4};
    depths = option(o, "depths", depths);
    if (depths.empty()) throw ConfigError("no depths given");
    analysis::FimOptions fo;
    fo.theta_draws = option<std::size_t>(o, "theta_draws", 10);
    fo.x_draws = option<std::size_t>(o, "x_draws", 10);
    fo.seed = option<std::uint64_t>(o, "seed", 1);
    fo.tolerance = option(o, "tolerance", fo.tolerance);
    fo.workers = option<std::size_t>(o, "workers", 1);
    const auto bins = option<std::size_t>(o, "bins", 20);

    auto family = [&](int d) {
      return vvrq ? layers::build_vvrq(vvrq_from(o, d))->circuit
                  : layers::build_qdi(qdi_from(o, d, false))->circuit;
    };
    const auto curve = analysis::fim_rank_curve(family, depths, fo);
    const auto deepest = analysis::fim_estimate(family(depths.back()), fo);
    const auto hist = analysis::fim_eigenspectrum(deepest, bins, fo.tolerance);

    bool strictly = true;
    json saturated = nullptr;
    json pts = json::array();
    for (std::size_t i = 0; i < curve.size(); ++i) {
      pts.push_back({{"depth", curve[i].depth},
                     {"n_params", curve[i].n_params},
                     {"rank", curve[i].rank},
                     {"max_eigenvalue", curve[i].max_eigenvalue}});
      if (i && curve[i].rank <= curve[i - 1].rank) {
        strictly = false;
        if (saturated.is_null()) saturated = curve[i - 1].depth;
      }
    }
    json j{{"circuit", name},
           {"theta_draws", fo.theta_draws},
           {"x_draws", fo.x_draws},
           {"seed", fo.seed},
           {"tolerance", fo.tolerance},
           {"curve", pts},
           {"rank_strictly_increasing", strictly},
           {"saturation_depth", saturated},
           {"deepest", {{"depth", depths.back()},
                        {"eigenvalues", deepest.eigenvalues},
                        {"near_zero_fraction", hist.near_zero_fraction}}},
           {"csv", {{"rank_curve", analysis::rank_curve_csv(curve)},
                    {"eigenvalues", analysis::eigenvalues_csv(deepest)},
                    {"histogram", analysis::histogram_csv(hist)}}}};
    *result_json = dup(j.dump(2));
  });
}

pvq_status pvq_analyze_fourier(const char* circuit, const char* options_json, char** result_json) {
  if (!circuit || !result_json) return null_argument();
  return guard([&] {
    const std::string name = circuit;
    check_circuit(name);
    const json o = parse_options(options_json);
    reject_unknown(o, {"depth", "dims", "fixed", "observable", "theta_draws", "threshold", "seed",
                       "max_grid", "workers", "qubits", "embedding", "measurement", "entanglement",
                       "readout", "reupload"});
    const bool vvrq = name == "vvrq";
    const int depth = option(o, "depth", vvrq ? 7 : 4);
    const auto layer = vvrq ? layers::build_vvrq(vvrq_from(o, depth))
                            : layers::build_qdi(qdi_from(o, depth, true));
    analysis::FourierOptions fo;
    fo.dims = option(o, "dims", std::vector<int>{0, 1});
    fo.observable = option<std::size_t>(o, "observable", 0);
    fo.theta_draws = option<std::size_t>(o, "theta_draws", 50);
    fo.threshold = option(o, "threshold", fo.threshold);
    fo.seed = option<std::uint64_t>(o, "seed", 1);
    fo.max_grid = option<std::size_t>(o, "max_grid", fo.max_grid);
    fo.workers = option<std::size_t>(o, "workers", 1);
    if (o.contains("fixed")) {
      const auto& f = o.at("fixed");
      fo.fixed_features = f.is_array()
                              ? f.get<std::vector<double>>()
                              : std::vector<double>(static_cast<std::size_t>(layer->circuit.n_features()),
                                                    f.get<double>());
    }
    const auto s = analysis::fourier_spectrum(*layer, fo);
    json j{{"circuit", name},
           {"depth", depth},
           {"dims", s.dims},
           {"degrees", s.degrees},
           {"theta_draws", s.theta_draws},
           {"threshold", s.threshold},
           {"grid_size", s.size()},
           {"nonzero", s.nonzero},
           {"nonzero_fraction", s.nonzero_fraction()},
           {"components", s.components},
           {"nonzero_components", s.nonzero_components},
           {"component_fraction", s.component_fraction()},
           {"csv", {{"coefficients", analysis::fourier_csv(s)}, {"draws", analysis::fourier_draws_csv(s)}}}};
    *result_json = dup(j.dump(2));
  });
}

}  // extern "C"

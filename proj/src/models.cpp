#include "pvqml/models.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pvqml/error.hpp"

namespace pvqml::models {

using ad::Tape;
using ad::Tensor;
using layers::Linear;

namespace {

constexpr const char* kNames[] = {"mlp", "hqnn", "lstm", "hqlstm", "seq2seq", "hqseq2seq"};

std::string entanglement_name(layers::Entanglement e) {
  return e == layers::Entanglement::Basic ? "basic" : "strong";
}

std::string readout_name(layers::QdiReadout r) {
  return r == layers::QdiReadout::ScalarY ? "scalar_y" : "vector_z";
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64* rng) {
  if (!rng || p <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> mask(x.size());
  const double scale = 1.0 / (1.0 - p);
  for (auto& m : mask) m = keep(*rng) ? scale : 0.0;
  return ad::mul_const(x, std::move(mask));
}

std::string hexfloat(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

std::string to_string(ModelKind kind) { return kNames[static_cast<int>(kind)]; }

ModelKind parse_model_kind(const std::string& name) {
  for (int k = 0; k < 6; ++k) {
    if (name == kNames[k]) return static_cast<ModelKind>(k);
  }
  throw ConfigError("unknown model '" + name +
                    "' (expected mlp, hqnn, lstm, hqlstm, seq2seq or hqseq2seq)");
}

bool is_sequence_model(ModelKind kind) {
  return kind == ModelKind::Seq2Seq || kind == ModelKind::HqSeq2Seq;
}

bool is_hybrid(ModelKind kind) {
  return kind == ModelKind::Hqnn || kind == ModelKind::HqLstm || kind == ModelKind::HqSeq2Seq;
}

ModelDescriptor default_descriptor(ModelKind kind) {
  ModelDescriptor d;
  d.kind = kind;
  switch (kind) {
    case ModelKind::Mlp:
      d.hidden = {32, 3, 3};
      break;
    case ModelKind::Hqnn:
      d.hidden = {17, 8};
      d.vvrq = layers::VvrqConfig{};  // q=8, d=7, X embedding, basic, Z
      break;
    case ModelKind::Lstm:
      d.recurrent_hidden = 21;
      d.dropout = 0.158;
      break;
    case ModelKind::HqLstm:
      d.recurrent_hidden = 20;
      d.dropout = 0.239;
      d.qdi = {4, 3, layers::QdiReadout::VectorZ, true};
      break;
    case ModelKind::Seq2Seq:
    case ModelKind::HqSeq2Seq:
      d.window = 96;
      d.recurrent_hidden = 16;
      d.qdi = {4, 4, layers::QdiReadout::ScalarY, false};
      break;
  }
  return d;
}

void to_json(nlohmann::json& j, const ModelDescriptor& d) {
  j = nlohmann::json{{"kind", to_string(d.kind)},
                     {"window", d.window},
                     {"features", d.features},
                     {"hidden", d.hidden},
                     {"recurrent_hidden", d.recurrent_hidden},
                     {"dropout", d.dropout},
                     {"total_params", d.total_params}};
  if (d.kind == ModelKind::Hqnn) {
    j["vvrq"] = {{"qubits", d.vvrq.qubits},
                 {"depth", d.vvrq.depth},
                 {"embedding", std::string(1, qsim::pauli_char(d.vvrq.embedding))},
                 {"entanglement", entanglement_name(d.vvrq.entanglement)},
                 {"measure", std::string(1, qsim::pauli_char(d.vvrq.measure))}};
  }
  if (d.kind == ModelKind::HqLstm || d.kind == ModelKind::HqSeq2Seq) {
    j["qdi"] = {{"qubits", d.qdi.qubits},
                {"depth", d.qdi.depth},
                {"readout", readout_name(d.qdi.readout)},
                {"reupload", d.qdi.reupload}};
  }
}

void from_json(const nlohmann::json& j, ModelDescriptor& d) {
  d = default_descriptor(parse_model_kind(j.at("kind").get<std::string>()));
  d.window = j.at("window").get<std::size_t>();
  d.features = j.at("features").get<std::size_t>();
  d.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  d.recurrent_hidden = j.at("recurrent_hidden").get<std::size_t>();
  d.dropout = j.at("dropout").get<double>();
  d.total_params = j.at("total_params").get<std::size_t>();
  if (j.contains("vvrq")) {
    const auto& v = j.at("vvrq");
    d.vvrq.qubits = v.at("qubits").get<int>();
    d.vvrq.depth = v.at("depth").get<int>();
    d.vvrq.embedding = qsim::parse_pauli(v.at("embedding").get<std::string>().at(0));
    const auto ent = v.at("entanglement").get<std::string>();
    if (ent != "basic" && ent != "strong") throw FormatError("unknown entanglement '" + ent + "'");
    d.vvrq.entanglement = ent == "basic" ? layers::Entanglement::Basic : layers::Entanglement::Strong;
    d.vvrq.measure = qsim::parse_pauli(v.at("measure").get<std::string>().at(0));
  }
  if (j.contains("qdi")) {
    const auto& q = j.at("qdi");
    d.qdi.qubits = q.at("qubits").get<int>();
    d.qdi.depth = q.at("depth").get<int>();
    const auto r = q.at("readout").get<std::string>();
    if (r != "scalar_y" && r != "vector_z") throw FormatError("unknown QDI readout '" + r + "'");
    d.qdi.readout = r == "scalar_y" ? layers::QdiReadout::ScalarY : layers::QdiReadout::VectorZ;
    d.qdi.reupload = q.at("reupload").get<bool>();
  }
}

// ---------------------------------------------------------------- model

Model::Model(ModelDescriptor descriptor) : desc_(std::move(descriptor)) {
  const double two_pi = 2.0 * std::numbers::pi;
  auto add_linear = [&](const std::string& name, std::size_t in, std::size_t out,
                        ad::Activation act) {
    auto l = Linear::create(registry_, name, in, out, act);
    const double b = 1.0 / std::sqrt(static_cast<double>(in));
    init_.push_back({l.weight_seg, -b, b});
    init_.push_back({l.bias_seg, -b, b});
    return l;
  };
  auto add_lstm = [&](const std::string& name, std::size_t in, std::size_t hidden) {
    auto c = layers::LstmCell::create(registry_, name, in, hidden);
    const double b = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto seg : {c.w_ih, c.w_hh, c.b_ih, c.b_hh}) init_.push_back({seg, -b, b});
    return c;
  };
  if (desc_.features == 0) throw ConfigError("model needs at least one input feature");
  const std::size_t flat_in = desc_.window * desc_.features;

  switch (desc_.kind) {
    case ModelKind::Mlp: {
      std::size_t in = flat_in;
      for (std::size_t k = 0; k < desc_.hidden.size(); ++k) {
        dense_.push_back(add_linear("fc" + std::to_string(k + 1), in, desc_.hidden[k],
                                    ad::Activation::Tanh));
        in = desc_.hidden[k];
      }
      dense_.push_back(add_linear("out", in, 1, ad::Activation::Identity));
      break;
    }
    case ModelKind::Hqnn: {
      std::size_t in = flat_in;
      for (std::size_t k = 0; k < desc_.hidden.size(); ++k) {
        dense_.push_back(add_linear("fc" + std::to_string(k + 1), in, desc_.hidden[k],
                                    ad::Activation::Tanh));
        in = desc_.hidden[k];
      }
      if (in != static_cast<std::size_t>(desc_.vvrq.qubits)) {
        throw ConfigError("HQNN: last dense width must equal the VVRQ qubit count");
      }
      circuit_ = layers::build_vvrq(desc_.vvrq);
      vvrq_weights_ = registry_.add("vvrq.weights", {static_cast<std::size_t>(desc_.vvrq.param_count())});
      init_.push_back({vvrq_weights_, 0.0, two_pi});
      dense_.push_back(add_linear("out", in, 1, ad::Activation::Identity));
      break;
    }
    case ModelKind::Lstm: {
      lstm_ = add_lstm("lstm", desc_.features, desc_.recurrent_hidden);
      dense_.push_back(add_linear("out", desc_.window * desc_.recurrent_hidden, 1,
                                  ad::Activation::Identity));
      break;
    }
    case ModelKind::HqLstm: {
      hqlstm_ = layers::HqLstmCell::create(registry_, "hqlstm", desc_.features,
                                           desc_.recurrent_hidden, desc_.qdi);
      const auto& c = *hqlstm_;
      auto linear_init = [&](const Linear& l) {
        const double b = 1.0 / std::sqrt(static_cast<double>(l.in));
        init_.push_back({l.weight_seg, -b, b});
        init_.push_back({l.bias_seg, -b, b});
      };
      linear_init(c.input_map);
      linear_init(c.hidden_map);
      for (int k = 0; k < 4; ++k) {
        init_.push_back({c.qdi_weights[k], 0.0, two_pi});
        linear_init(c.gate_maps[k]);
      }
      dense_.push_back(add_linear("out", desc_.window * desc_.recurrent_hidden, 1,
                                  ad::Activation::Identity));
      break;
    }
    case ModelKind::Seq2Seq:
    case ModelKind::HqSeq2Seq: {
      lstm_ = add_lstm("encoder", desc_.features, desc_.recurrent_hidden);
      decoder_ = add_lstm("decoder", 1, desc_.recurrent_hidden);
      if (desc_.kind == ModelKind::Seq2Seq) {
        dense_.push_back(add_linear("out", desc_.recurrent_hidden, 1, ad::Activation::Identity));
      } else {
        if (desc_.qdi.readout != layers::QdiReadout::ScalarY ||
            static_cast<std::size_t>(desc_.qdi.feature_count()) != desc_.recurrent_hidden) {
          throw ConfigError("HQSeq2Seq head needs a scalar QDI taking the whole hidden state");
        }
        circuit_ = layers::build_qdi(desc_.qdi);
        head_qdi_weights_ = registry_.add("head.qdi", {static_cast<std::size_t>(desc_.qdi.param_count())});
        init_.push_back({head_qdi_weights_, 0.0, two_pi});
      }
      break;
    }
  }
  desc_.total_params = registry_.size();
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& r : init_) {
    std::uniform_real_distribution<double> u(r.lo, r.hi);
    for (auto& v : registry_.values(r.segment)) v = u(rng);
  }
}

Tensor Model::forward_dense(Tape& tape, const Tensor& x) const {
  Tensor h = x;
  if (desc_.kind == ModelKind::Mlp) {
    for (const auto& l : dense_) h = l.forward(tape, h);
    return h;
  }
  for (std::size_t k = 0; k + 1 < dense_.size(); ++k) h = dense_[k].forward(tape, h);
  h = layers::quantum_forward(tape, circuit_, tape.param(vvrq_weights_), h);
  return dense_.back().forward(tape, h);
}

Tensor Model::forward_recurrent(Tape& tape, std::span<const double> input,
                                std::mt19937_64* rng) const {
  const std::size_t H = desc_.recurrent_hidden, F = desc_.features;
  auto state = layers::lstm_zero_state(tape, H);
  std::vector<Tensor> outs;
  outs.reserve(desc_.window);
  for (std::size_t t = 0; t < desc_.window; ++t) {
    auto x = tape.constant(std::vector<double>(input.begin() + t * F, input.begin() + (t + 1) * F));
    state = lstm_ ? lstm_->step(tape, x, state) : hqlstm_->step(tape, x, state);
    outs.push_back(dropout(state.h, desc_.dropout, rng));
  }
  return dense_.back().forward(tape, ad::concat(outs));
}

Tensor Model::forward_seq2seq(Tape& tape, std::span<const double> input, std::size_t rows,
                              std::size_t horizon) const {
  const std::size_t F = desc_.features;
  auto state = layers::lstm_zero_state(tape, desc_.recurrent_hidden);
  for (std::size_t t = 0; t < rows; ++t) {
    auto x = tape.constant(std::vector<double>(input.begin() + t * F, input.begin() + (t + 1) * F));
    state = lstm_->step(tape, x, state);
  }
  // Decoder starts from the most recent observed power value.
  Tensor y = tape.constant({input[(rows - 1) * F + data::kPowerColumn]});
  std::vector<Tensor> outs;
  outs.reserve(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    state = decoder_->step(tape, y, state);
    if (desc_.kind == ModelKind::Seq2Seq) {
      y = dense_.back().forward(tape, state.h);
    } else {
      y = layers::quantum_forward(tape, circuit_, tape.param(head_qdi_weights_), state.h);
    }
    outs.push_back(y);
  }
  return ad::concat(outs);
}

Tensor Model::forward(Tape& tape, std::span<const double> input, std::size_t rows,
                      std::size_t horizon, std::mt19937_64* rng) const {
  if (input.size() != rows * desc_.features) {
    throw ShapeError("model input has " + std::to_string(input.size()) + " values, expected " +
                     std::to_string(rows) + " x " + std::to_string(desc_.features));
  }
  if (is_sequence_model(desc_.kind)) {
    if (rows == 0) throw ContractError("sequence model needs a non-empty history");
    if (horizon == 0) throw ContractError("horizon must be at least 1");
    return forward_seq2seq(tape, input, rows, horizon);
  }
  if (rows != desc_.window) {
    throw ShapeError("hour-ahead model expects a " + std::to_string(desc_.window) + " x " +
                     std::to_string(desc_.features) + " window, got " + std::to_string(rows) +
                     " rows");
  }
  if (horizon != 1) throw ContractError("hour-ahead models forecast exactly one step");
  if (desc_.kind == ModelKind::Mlp || desc_.kind == ModelKind::Hqnn) {
    return forward_dense(tape, tape.constant(std::vector<double>(input.begin(), input.end())));
  }
  return forward_recurrent(tape, input, rng);
}

std::vector<double> Model::predict(std::span<const double> input, std::size_t rows,
                                   std::size_t horizon) const {
  Tape tape(registry_);
  auto y = forward(tape, input, rows, horizon, nullptr);
  return {y.value().begin(), y.value().end()};
}

double forecast_next_hour(const Model& model, std::span<const double> window) {
  if (is_sequence_model(model.kind())) {
    throw ContractError("forecast_next_hour needs an hour-ahead model");
  }
  const std::size_t w = model.descriptor().window, f = model.descriptor().features;
  if (window.size() != w * f) {
    throw ShapeError("window must be " + std::to_string(w) + " x " + std::to_string(f));
  }
  return model.predict(window, w, 1)[0];
}

std::vector<double> seq2seq_forecast(const Model& model, std::span<const double> history,
                                     std::size_t rows, std::size_t horizon) {
  if (!is_sequence_model(model.kind())) {
    throw ContractError("multi-step forecasts need a seq2seq-family model");
  }
  if (rows == 0 || history.empty()) throw ContractError("empty history");
  return model.predict(history, rows, horizon);
}

// ---------------------------------------------------------------- files

nlohmann::json model_to_json(const Model& model, const std::optional<data::ScalerStats>& scaler) {
  nlohmann::json j;
  j["format"] = "pvqml-model";
  j["version"] = kModelFormatVersion;
  j["descriptor"] = model.descriptor();
  j["scaler"] = scaler ? nlohmann::json(*scaler) : nlohmann::json(nullptr);
  auto& segs = j["segments"] = nlohmann::json::array();
  for (const auto& s : model.params().segments()) {
    segs.push_back({{"name", s.name}, {"offset", s.offset}, {"shape", s.shape}});
  }
  auto& vals = j["params"] = nlohmann::json::array();
  for (double v : model.params().values()) vals.push_back(hexfloat(v));
  return j;
}

SavedModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "pvqml-model") {
      throw FormatError("not a model file (missing format tag)");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("unsupported model format version " + std::to_string(version) +
                        " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
    }
    const auto desc = j.at("descriptor").get<ModelDescriptor>();
    Model model(desc);
    if (model.param_count() != desc.total_params) {
      throw FormatError("descriptor declares " + std::to_string(desc.total_params) +
                        " parameters but the architecture has " +
                        std::to_string(model.param_count()));
    }
    const auto& vals = j.at("params");
    if (!vals.is_array() || vals.size() != model.param_count()) {
      throw FormatError("parameter array length does not match the descriptor");
    }
    auto flat = model.params().values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const auto s = vals[i].get<std::string>();
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) {
        throw FormatError("malformed parameter value '" + s + "' at index " + std::to_string(i));
      }
      flat[i] = v;
    }
    std::optional<data::ScalerStats> scaler;
    if (j.contains("scaler") && !j.at("scaler").is_null()) scaler = j.at("scaler").get<data::ScalerStats>();
    return SavedModel{std::move(model), scaler};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model descriptor: ") + e.what());
  } catch (const ParseError& e) {
    throw FormatError(std::string("invalid model descriptor: ") + e.what());
  }
}

void save_model(const std::string& path, const Model& model,
                const std::optional<data::ScalerStats>& scaler) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << model_to_json(model, scaler).dump(1) << '\n';
  if (!f) throw IoError("write failed for '" + path + "'");
}

SavedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace pvqml::models

#include "pvqml/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pvqml/error.hpp"

namespace pvqml::config {

using models::ModelKind;

namespace {

enum class Type { UInt, Double, Bool, Text, UIntList, Model, Embedding, Measurement, Variational };

struct KeySpec {
  const char* name;
  Type type;
};

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> s{
      {"model", Type::Model},
      {"data", Type::Text},
      {"out", Type::Text},
      {"seed", Type::UInt},
      {"learning_rate", Type::Double},
      {"epochs", Type::UInt},
      {"batch_size", Type::UInt},
      {"patience", Type::UInt},
      {"folds", Type::UInt},
      {"buffer", Type::UInt},
      {"window", Type::UInt},
      {"horizon", Type::UInt},
      {"stride", Type::UInt},
      {"fraction", Type::Double},
      {"clip_gradients", Type::Bool},
      {"clip_norm", Type::Double},
      {"workers", Type::UInt},
      {"holdout_train_share", Type::Double},
      {"hidden", Type::UIntList},
      {"recurrent_hidden", Type::UInt},
      {"dropout", Type::Double},
      {"qubits", Type::UInt},
      {"variational_layers", Type::UInt},
      {"quantum_layers", Type::UInt},
      {"embedding", Type::Embedding},
      {"measurement", Type::Measurement},
      {"variational_part", Type::Variational},
      {"reupload", Type::Bool},
  };
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_uint(key, trim(item)));
  return out;
}

qsim::Pauli to_embedding(const std::string& key, const std::string& v) {
  if (v == "rx") return qsim::Pauli::X;
  if (v == "ry") return qsim::Pauli::Y;
  if (v == "rz") return qsim::Pauli::Z;
  throw ConfigError(key + ": expected rx, ry or rz, got '" + v + "'");
}

qsim::Pauli to_measurement(const std::string& key, const std::string& v) {
  if (v == "x") return qsim::Pauli::X;
  if (v == "y") return qsim::Pauli::Y;
  if (v == "z") return qsim::Pauli::Z;
  throw ConfigError(key + ": expected x, y or z, got '" + v + "'");
}

layers::Entanglement to_variational(const std::string& key, const std::string& v) {
  if (v == "basic") return layers::Entanglement::Basic;
  if (v == "strongly") return layers::Entanglement::Strong;
  throw ConfigError(key + ": expected basic or strongly, got '" + v + "'");
}

void check_value(const KeySpec& k, const std::string& v) {
  switch (k.type) {
    case Type::UInt: to_uint(k.name, v); break;
    case Type::Double: to_double(k.name, v); break;
    case Type::Bool: to_bool(k.name, v); break;
    case Type::Text:
      if (v.empty()) throw ConfigError(std::string(k.name) + ": empty value");
      break;
    case Type::UIntList: to_list(k.name, v); break;
    case Type::Model: models::parse_model_kind(v); break;
    case Type::Embedding: to_embedding(k.name, v); break;
    case Type::Measurement: to_measurement(k.name, v); break;
    case Type::Variational: to_variational(k.name, v); break;
  }
}

std::string num(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

bool is_hybrid_recurrent(ModelKind k) { return k == ModelKind::HqLstm || k == ModelKind::HqSeq2Seq; }

void require(bool ok, const std::string& key, ModelKind k) {
  if (!ok) throw ConfigError("key '" + key + "' does not apply to model " + models::to_string(k));
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : specs()) k.push_back(s.name);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& s = specs();
  const auto it = std::find_if(s.begin(), s.end(), [&](const KeySpec& k) { return key == k.name; });
  if (it == s.end()) throw ConfigError("unknown configuration key '" + key + "'");
  check_value(*it, value);
  values[key] = value;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (cfg.has(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

train::TrainConfig resolve_train_config(const RunConfig& cfg, std::optional<ModelKind> model) {
  if (!model) {
    if (!cfg.has("model")) throw ConfigError("no model given");
    model = models::parse_model_kind(cfg.get("model"));
  }
  const ModelKind k = *model;
  auto t = train::default_train_config(k);
  auto d = t.resolved_descriptor();

  for (const auto& [key, v] : cfg.values) {
    if (key == "model" || key == "data" || key == "out") continue;
    if (key == "seed") t.seed = to_uint(key, v);
    else if (key == "learning_rate") t.learning_rate = to_double(key, v);
    else if (key == "epochs") t.epochs = to_uint(key, v);
    else if (key == "batch_size") t.batch_size = to_uint(key, v);
    else if (key == "patience") t.patience = to_uint(key, v);
    else if (key == "folds") t.folds = to_uint(key, v);
    else if (key == "buffer") t.buffer = to_uint(key, v);
    else if (key == "window") t.window = to_uint(key, v);
    else if (key == "horizon") t.horizon = to_uint(key, v);
    else if (key == "stride") t.stride = to_uint(key, v);
    else if (key == "fraction") t.fraction = to_double(key, v);
    else if (key == "clip_gradients") t.clip_gradients = to_bool(key, v);
    else if (key == "clip_norm") t.clip_norm = to_double(key, v);
    else if (key == "workers") t.workers = to_uint(key, v);
    else if (key == "holdout_train_share") t.holdout_train_share = to_double(key, v);
    else {
      if (key == "hidden") {
        require(k == ModelKind::Mlp || k == ModelKind::Hqnn, key, k);
        d.hidden = to_list(key, v);
      } else if (key == "recurrent_hidden") {
        require(models::is_sequence_model(k) || k == ModelKind::Lstm || k == ModelKind::HqLstm, key, k);
        d.recurrent_hidden = to_uint(key, v);
      } else if (key == "dropout") {
        require(k != ModelKind::Mlp && k != ModelKind::Hqnn, key, k);
        d.dropout = to_double(key, v);
      } else if (key == "qubits") {
        require(models::is_hybrid(k), key, k);
        const int q = static_cast<int>(to_uint(key, v));
        if (k == ModelKind::Hqnn) {
          d.vvrq.qubits = q;
          // the dense layer feeding the circuit follows unless given explicitly
          if (!cfg.has("hidden") && !d.hidden.empty()) d.hidden.back() = static_cast<std::size_t>(q);
        } else {
          d.qdi.qubits = q;
        }
      } else if (key == "variational_layers") {
        require(k == ModelKind::Hqnn || k == ModelKind::HqLstm, key, k);
        const auto n = to_uint(key, v);
        if (k == ModelKind::Hqnn) {
          d.vvrq.depth = static_cast<int>(n);
        } else if (n != 1) {
          throw ConfigError("variational_layers: the QDI block has one variational sub-layer");
        }
      } else if (key == "quantum_layers") {
        require(is_hybrid_recurrent(k), key, k);
        d.qdi.depth = static_cast<int>(to_uint(key, v));
      } else if (key == "embedding") {
        require(k == ModelKind::Hqnn, key, k);
        d.vvrq.embedding = to_embedding(key, v);
      } else if (key == "measurement") {
        require(k == ModelKind::Hqnn, key, k);
        d.vvrq.measure = to_measurement(key, v);
      } else if (key == "variational_part") {
        require(k == ModelKind::Hqnn, key, k);
        d.vvrq.entanglement = to_variational(key, v);
      } else if (key == "reupload") {
        require(is_hybrid_recurrent(k), key, k);
        d.qdi.reupload = to_bool(key, v);
      }
    }
  }
  d.window = t.window;
  try {
    d.total_params = models::Model(d).param_count();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid architecture: ") + e.what());
  }
  t.descriptor = d;
  if (auto s = env_seed()) t.seed = *s;
  t.validate();
  return t;
}

std::string render_run_config(const train::TrainConfig& t) {
  const auto d = t.resolved_descriptor();
  const ModelKind k = t.model;
  std::ostringstream os;
  os << "model = " << models::to_string(k) << '\n'
     << "seed = " << t.seed << '\n'
     << "learning_rate = " << num(t.learning_rate) << '\n'
     << "epochs = " << t.epochs << '\n'
     << "batch_size = " << t.batch_size << '\n'
     << "patience = " << t.patience << '\n'
     << "folds = " << t.folds << '\n'
     << "buffer = " << t.buffer << '\n'
     << "window = " << t.window << '\n'
     << "horizon = " << t.horizon << '\n'
     << "stride = " << t.stride << '\n'
     << "fraction = " << num(t.fraction) << '\n'
     << "clip_gradients = " << (t.clip_gradients ? "true" : "false") << '\n'
     << "clip_norm = " << num(t.clip_norm) << '\n'
     << "workers = " << t.workers << '\n'
     << "holdout_train_share = " << num(t.holdout_train_share) << '\n';
  if (k == ModelKind::Mlp || k == ModelKind::Hqnn) {
    os << "hidden = ";
    if (d.hidden.empty()) os << "none";
    for (std::size_t i = 0; i < d.hidden.size(); ++i) os << (i ? "," : "") << d.hidden[i];
    os << '\n';
  } else {
    os << "recurrent_hidden = " << d.recurrent_hidden << '\n'
       << "dropout = " << num(d.dropout) << '\n';
  }
  if (k == ModelKind::Hqnn) {
    const char* emb[] = {"rx", "ry", "rz"};
    const char* meas[] = {"x", "y", "z"};
    os << "qubits = " << d.vvrq.qubits << '\n'
       << "variational_layers = " << d.vvrq.depth << '\n'
       << "embedding = " << emb[static_cast<int>(d.vvrq.embedding)] << '\n'
       << "measurement = " << meas[static_cast<int>(d.vvrq.measure)] << '\n'
       << "variational_part = "
       << (d.vvrq.entanglement == layers::Entanglement::Basic ? "basic" : "strongly") << '\n';
  }
  if (is_hybrid_recurrent(k)) {
    os << "qubits = " << d.qdi.qubits << '\n';
    if (k == ModelKind::HqLstm) os << "variational_layers = 1\n";
    os << "quantum_layers = " << d.qdi.depth << '\n'
       << "reupload = " << (d.qdi.reupload ? "true" : "false") << '\n';
  }
  return os.str();
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("PVQML_SEED");
  if (!s || !*s) return std::nullopt;
  return to_uint("PVQML_SEED", s);
}

}  // namespace pvqml::config

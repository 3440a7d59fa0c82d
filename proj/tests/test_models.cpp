#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "model_check.hpp"
#include "pvqml/error.hpp"
#include "pvqml/models.hpp"

using namespace pvqml;
using namespace pvqml::models;

namespace {

std::vector<double> random_window(std::mt19937_64& rng, std::size_t rows) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(rows * data::kColumns);
  for (auto& v : w) v = u(rng);
  return w;
}

std::size_t segment_size(const Model& m, const std::string& name) {
  return m.params().segment(m.params().find(name)).size();
}

}  // namespace

TEST_CASE("parameter counts") {
  const Model mlp(default_descriptor(ModelKind::Mlp));
  CHECK(mlp.param_count() == 3987);
  CHECK(mlp.descriptor().total_params == 3987);
  CHECK(segment_size(mlp, "fc1.weight") + segment_size(mlp, "fc1.bias") == 3872);

  const Model hqnn(default_descriptor(ModelKind::Hqnn));
  CHECK(hqnn.param_count() == 2266);
  CHECK(segment_size(hqnn, "vvrq.weights") == 56);
  CHECK(segment_size(hqnn, "fc1.weight") + segment_size(hqnn, "fc1.bias") == 2057);

  const Model lstm(default_descriptor(ModelKind::Lstm));
  CHECK(lstm.param_count() == 2857);
  CHECK(segment_size(lstm, "out.weight") + segment_size(lstm, "out.bias") == 505);

  const Model s2s(default_descriptor(ModelKind::Seq2Seq));
  CHECK(s2s.param_count() == 2705);

  const Model hq(default_descriptor(ModelKind::HqLstm));
  CHECK(hq.descriptor().recurrent_hidden == 20);
  CHECK(hq.descriptor().qdi.qubits == 4);
  CHECK(segment_size(hq, "hqlstm.qdi_forget") == 16);
  CHECK(hq.param_count() == 1377);

  const Model hqs(default_descriptor(ModelKind::HqSeq2Seq));
  CHECK(segment_size(hqs, "head.qdi") == 20);
  CHECK(hqs.param_count() == 2708);
}

TEST_CASE("seq2seq hidden size solves the count equation") {
  for (std::size_t h = 1; h < 40; ++h) {
    auto d = default_descriptor(ModelKind::Seq2Seq);
    d.recurrent_hidden = h;
    CHECK(Model(d).param_count() == 8 * h * h + 41 * h + 1);
  }
}

TEST_CASE("zero parameters give zero output") {
  std::mt19937_64 rng(1);
  const auto w = random_window(rng, 24);
  for (auto kind : {ModelKind::Mlp, ModelKind::Lstm}) {
    const Model m(default_descriptor(kind));
    CHECK(forecast_next_hour(m, w) == 0.0);
  }
}

TEST_CASE("inference is deterministic and pure") {
  std::mt19937_64 rng(2);
  const auto w = random_window(rng, 24);
  for (auto kind : {ModelKind::Mlp, ModelKind::Hqnn, ModelKind::Lstm, ModelKind::HqLstm}) {
    Model m(default_descriptor(kind));
    m.initialize(9);
    const std::vector<double> before(m.params().values().begin(), m.params().values().end());
    const double a = forecast_next_hour(m, w);
    const double b = forecast_next_hour(m, w);
    CHECK(a == b);
    CHECK(std::isfinite(a));
    CHECK(std::vector<double>(m.params().values().begin(), m.params().values().end()) == before);
  }
}

TEST_CASE("shape and contract errors") {
  Model m(default_descriptor(ModelKind::HqLstm));
  const std::vector<double> short_window(23 * 5, 0.1);
  CHECK_THROWS_AS(forecast_next_hour(m, short_window), ShapeError);
  Model s(default_descriptor(ModelKind::Seq2Seq));
  CHECK_THROWS_AS(seq2seq_forecast(s, {}, 0, 3), ContractError);
  const std::vector<double> w(24 * 5, 0.1);
  CHECK_THROWS_AS(seq2seq_forecast(m, w, 24, 3), ContractError);
  CHECK_THROWS_AS(forecast_next_hour(s, w), ContractError);
  CHECK_THROWS_AS(parse_model_kind("transformer"), ConfigError);
  CHECK(parse_model_kind("hqseq2seq") == ModelKind::HqSeq2Seq);
}

TEST_CASE("seq2seq prefix property and variable horizon") {
  std::mt19937_64 rng(3);
  for (auto kind : {ModelKind::Seq2Seq, ModelKind::HqSeq2Seq}) {
    Model m(default_descriptor(kind));
    m.initialize(11);
    const auto hist = random_window(rng, 30);
    const auto full = seq2seq_forecast(m, hist, 30, 5);
    REQUIRE(full.size() == 5);
    for (std::size_t k = 1; k <= 5; ++k) {
      const auto part = seq2seq_forecast(m, hist, 30, k);
      for (std::size_t i = 0; i < k; ++i) CHECK(part[i] == full[i]);
    }
    const auto long_hist = random_window(rng, 124);
    const auto out = seq2seq_forecast(m, long_hist, 124, 137);
    CHECK(out.size() == 137);
    for (double v : out) CHECK(std::isfinite(v));
  }
}

TEST_CASE("initialisation ranges") {
  Model m(default_descriptor(ModelKind::Hqnn));
  m.initialize(5);
  const auto& reg = m.params();
  for (double v : reg.values(reg.find("vvrq.weights"))) {
    CHECK(v >= 0.0);
    CHECK(v <= 2 * std::numbers::pi);
  }
  const double b = 1.0 / std::sqrt(120.0);
  for (double v : reg.values(reg.find("fc1.weight"))) CHECK(std::abs(v) <= b);
  Model m2(default_descriptor(ModelKind::Hqnn));
  m2.initialize(5);
  CHECK(std::vector<double>(m.params().values().begin(), m.params().values().end()) ==
        std::vector<double>(m2.params().values().begin(), m2.params().values().end()));
}

TEST_CASE("model files round-trip bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "pvqml_test_models";
  std::filesystem::create_directories(dir);
  for (int k = 0; k < 6; ++k) {
    Model m(default_descriptor(static_cast<ModelKind>(k)));
    m.initialize(100 + k);
    data::ScalerStats st;
    st.min = {1, 2, 3, 4, 0.1};
    st.max = {5, 6, 7, 8, 1.0 / 3.0};
    const auto path = (dir / ("m" + std::to_string(k) + ".json")).string();
    save_model(path, m, st);
    const auto loaded = load_model(path);
    CHECK(loaded.model.kind() == m.kind());
    CHECK(loaded.model.param_count() == m.param_count());
    const auto a = m.params().values();
    const auto b = loaded.model.params().values();
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i) same = same && std::memcmp(&a[i], &b[i], sizeof(double)) == 0;
    CHECK(same);
    REQUIRE(loaded.scaler.has_value());
    CHECK(loaded.scaler->max == st.max);
  }
}

TEST_CASE("corrupt model documents raise format errors") {
  Model m(default_descriptor(ModelKind::Mlp));
  auto j = model_to_json(m, std::nullopt);
  CHECK_NOTHROW(model_from_json(j));
  auto wrong_version = j;
  wrong_version["version"] = 99;
  try {
    model_from_json(wrong_version);
    FAIL("expected format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version 99") != std::string::npos);
  }
  auto truncated = j;
  truncated["params"].erase(0);
  CHECK_THROWS_AS(model_from_json(truncated), FormatError);
  auto garbage = j;
  garbage["params"][3] = "0x1.zz";
  CHECK_THROWS_AS(model_from_json(garbage), FormatError);
  auto bad_kind = j;
  bad_kind["descriptor"]["kind"] = "gru";
  CHECK_THROWS_AS(model_from_json(bad_kind), FormatError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::array()), FormatError);

  const auto path = (std::filesystem::temp_directory_path() / "pvqml_corrupt.json").string();
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_model(path), FormatError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), IoError);
}

TEST_CASE("whole-model gradients match finite differences") {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 6; ++k) {
    const auto kind = static_cast<ModelKind>(k);
    Model m(default_descriptor(kind));
    m.initialize(7 + k);
    const bool seq = is_sequence_model(kind);
    const std::size_t rows = seq ? 8 : 24, horizon = seq ? 3 : 1;
    const auto input = random_window(rng, rows);
    std::vector<double> target(horizon, 0.4);
    const auto r = oracle::model_gradient_check(m, input, rows, horizon, target, 6, 1 + k,
                                                m.descriptor().dropout > 0 ? 77 : 0);
    INFO("model " << to_string(kind));
    CHECK(r.rel_err <= 1e-4);
  }
}

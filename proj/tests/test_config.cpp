#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pvqml/config.hpp"
#include "pvqml/error.hpp"

using namespace pvqml;
using namespace pvqml::config;
using models::ModelKind;

TEST_CASE("defaults come from the per-model best values") {
  const auto t = resolve_train_config({}, ModelKind::HqLstm);
  CHECK(t.learning_rate == 0.52e-2);
  CHECK(t.resolved_descriptor().recurrent_hidden == 20);
  CHECK(t.resolved_descriptor().dropout == 0.239);
  const auto h = resolve_train_config({}, ModelKind::Hqnn);
  CHECK(h.learning_rate == 3e-2);
  CHECK(h.resolved_descriptor().total_params == 2266);
  CHECK_THROWS_AS(resolve_train_config({}), ConfigError);
}

TEST_CASE("parsing") {
  const auto c = parse_run_config(
      "# comment\n"
      "model = lstm\n"
      "\n"
      "epochs=3   # trailing comment\n"
      "  learning_rate = 0.001\n"
      "recurrent_hidden = 8\n"
      "data = /tmp/x.csv\n");
  CHECK(c.get("model") == "lstm");
  CHECK(c.get("data") == "/tmp/x.csv");
  const auto t = resolve_train_config(c);
  CHECK(t.model == ModelKind::Lstm);
  CHECK(t.epochs == 3);
  CHECK(t.learning_rate == 0.001);
  CHECK(t.resolved_descriptor().recurrent_hidden == 8);
  CHECK(t.resolved_descriptor().total_params == models::Model(t.resolved_descriptor()).param_count());
  // the explicit model argument wins
  CHECK(resolve_train_config(c, ModelKind::HqLstm).model == ModelKind::HqLstm);
}

TEST_CASE("rejections") {
  CHECK_THROWS_AS(parse_run_config("learning_rat = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("epochs = 3\nepochs = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("epochs\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("epochs = three\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("model = gru\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("embedding = rq\n"), ConfigError);
  try {
    parse_run_config("seed = 1\nbogus = 2\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  // architecture keys must match the model
  CHECK_THROWS_AS(resolve_train_config(parse_run_config("hidden = 4\n"), ModelKind::Lstm), ConfigError);
  CHECK_THROWS_AS(resolve_train_config(parse_run_config("embedding = ry\n"), ModelKind::Mlp), ConfigError);
  CHECK_THROWS_AS(resolve_train_config(parse_run_config("variational_layers = 2\n"), ModelKind::HqLstm),
                  ConfigError);
  CHECK_THROWS_AS(resolve_train_config(parse_run_config("learning_rate = -1\n"), ModelKind::Mlp),
                  ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.cfg"), IoError);
}

TEST_CASE("hybrid architecture keys") {
  const auto c = parse_run_config(
      "qubits = 4\nvariational_layers = 2\nembedding = ry\nmeasurement = x\nvariational_part = strongly\n");
  const auto d = resolve_train_config(c, ModelKind::Hqnn).resolved_descriptor();
  CHECK(d.vvrq.qubits == 4);
  CHECK(d.vvrq.depth == 2);
  CHECK(d.vvrq.embedding == qsim::Pauli::Y);
  CHECK(d.vvrq.measure == qsim::Pauli::X);
  CHECK(d.vvrq.entanglement == layers::Entanglement::Strong);
  const auto q = resolve_train_config(parse_run_config("quantum_layers = 2\nrecurrent_hidden = 8\n"),
                                      ModelKind::HqSeq2Seq)
                     .resolved_descriptor();
  CHECK(q.qdi.depth == 2);
  // the scalar head must cover the whole hidden state
  CHECK_THROWS_AS(resolve_train_config(parse_run_config("quantum_layers = 2\n"), ModelKind::HqSeq2Seq),
                  ConfigError);
}

TEST_CASE("rendered configs parse back to the same settings") {
  for (int k = 0; k < 6; ++k) {
    const auto kind = static_cast<ModelKind>(k);
    const auto t = resolve_train_config({}, kind);
    const auto text = render_run_config(t);
    const auto back = resolve_train_config(parse_run_config(text));
    CHECK(render_run_config(back) == text);
    CHECK(back.resolved_descriptor().total_params == t.resolved_descriptor().total_params);
  }
}

TEST_CASE("PVQML_SEED overrides the configured seed") {
  const auto c = parse_run_config("seed = 5\n");
  CHECK(resolve_train_config(c, ModelKind::Mlp).seed == 5);
  setenv("PVQML_SEED", "99", 1);
  CHECK(resolve_train_config(c, ModelKind::Mlp).seed == 99);
  setenv("PVQML_SEED", "x", 1);
  CHECK_THROWS_AS(env_seed(), ConfigError);
  unsetenv("PVQML_SEED");
  CHECK_FALSE(env_seed().has_value());
}

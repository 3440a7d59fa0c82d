// Exercises the shared library through its C interface only.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pvqml/pvqml.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pvqml_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  pvq_string_free(s);
  return out;
}

// Header plus the last n lines of a CSV.
void tail_csv(const fs::path& from, const fs::path& to, std::size_t n) {
  std::ifstream in(from);
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  std::ofstream out(to);
  out << header << '\n';
  for (std::size_t i = lines.size() - n; i < lines.size(); ++i) out << lines[i] << '\n';
}

pvq_frame* synth(std::size_t days, std::uint64_t seed) {
  pvq_frame* f = nullptr;
  REQUIRE(pvq_frame_synth(days, seed, &f) == PVQ_OK);
  return f;
}

}  // namespace

TEST_CASE("status helpers") {
  CHECK(std::string(pvq_version()).size() > 0);
  CHECK(std::string(pvq_status_name(PVQ_OK)) == "ok");
  CHECK(pvq_exit_code(PVQ_OK) == 0);
  CHECK(pvq_exit_code(PVQ_ERR_IO) == 2);
  CHECK(pvq_exit_code(PVQ_ERR_PARSE) == 3);
  CHECK(pvq_exit_code(PVQ_ERR_SCHEMA) == 3);
  CHECK(pvq_exit_code(PVQ_ERR_FORMAT) == 3);
  CHECK(pvq_exit_code(PVQ_ERR_CONFIG) == 1);
  CHECK(pvq_exit_code(PVQ_ERR_TRAINING) == 1);
}

TEST_CASE("NULL arguments are rejected with a message") {
  CHECK(pvq_frame_synth(2, 1, nullptr) == PVQ_ERR_NULL_ARGUMENT);
  CHECK(std::string(pvq_last_error()).find("NULL") != std::string::npos);
  CHECK(pvq_frame_load_csv(nullptr, nullptr) == PVQ_ERR_NULL_ARGUMENT);
  size_t n = 0;
  CHECK(pvq_param_count(nullptr, nullptr, &n) == PVQ_ERR_NULL_ARGUMENT);
  pvq_frame_free(nullptr);
  pvq_config_free(nullptr);
  pvq_model_free(nullptr);
  pvq_string_free(nullptr);
}

TEST_CASE("frames: synth, clean, CSV round trip, load errors") {
  const auto dir = scratch("frames");
  pvq_frame* f = synth(3, 5);
  size_t rows = 0;
  REQUIRE(pvq_frame_rows(f, &rows) == PVQ_OK);
  CHECK(rows == 72);

  pvq_frame* clean = nullptr;
  char* report = nullptr;
  REQUIRE(pvq_frame_clean(f, &clean, &report) == PVQ_OK);
  const auto r = json::parse(take(report));
  CHECK(r["rows_in"] == 72);
  CHECK(r["rows_out"] == 72);

  const auto path = (dir / "x.csv").string();
  REQUIRE(pvq_frame_write_csv(clean, path.c_str()) == PVQ_OK);
  pvq_frame* back = nullptr;
  REQUIRE(pvq_frame_load_csv(path.c_str(), &back) == PVQ_OK);
  pvq_frame_rows(back, &rows);
  CHECK(rows == 72);

  pvq_frame* bad = nullptr;
  CHECK(pvq_frame_load_csv((dir / "missing.csv").string().c_str(), &bad) == PVQ_ERR_IO);
  CHECK(bad == nullptr);
  std::ofstream(dir / "schema.csv") << "timestamp,Ta,Tm\n2012-01-01T00:00:00,1,2\n";
  CHECK(pvq_frame_load_csv((dir / "schema.csv").string().c_str(), &bad) == PVQ_ERR_SCHEMA);
  std::ofstream(dir / "parse.csv") << "timestamp,Ta,Tm,I3,I15,P\nyesterday,1,2,3,4,5\n";
  CHECK(pvq_frame_load_csv((dir / "parse.csv").string().c_str(), &bad) == PVQ_ERR_PARSE);
  CHECK(std::string(pvq_last_error()).size() > 0);

  pvq_frame_free(back);
  pvq_frame_free(clean);
  pvq_frame_free(f);
}

TEST_CASE("config handles and parameter counts") {
  pvq_config* c = nullptr;
  REQUIRE(pvq_config_new(&c) == PVQ_OK);
  CHECK(pvq_config_set(c, "epochs", "3") == PVQ_OK);
  CHECK(pvq_config_set(c, "epochz", "3") == PVQ_ERR_CONFIG);
  CHECK(pvq_config_set(c, "epochs", "three") == PVQ_ERR_CONFIG);
  char* v = nullptr;
  REQUIRE(pvq_config_get(c, "epochs", &v) == PVQ_OK);
  CHECK(take(v) == "3");
  REQUIRE(pvq_config_get(c, "seed", &v) == PVQ_OK);
  CHECK(v == nullptr);

  char* text = nullptr;
  REQUIRE(pvq_config_render(c, "lstm", &text) == PVQ_OK);
  const auto rendered = take(text);
  CHECK(rendered.find("model = lstm") != std::string::npos);
  CHECK(rendered.find("epochs = 3") != std::string::npos);
  CHECK(pvq_config_render(c, "gru", &text) == PVQ_ERR_CONFIG);

  const std::pair<const char*, size_t> counts[] = {{"mlp", 3987}, {"hqnn", 2266}, {"lstm", 2857},
                                                   {"seq2seq", 2705}, {"hqlstm", 1377}, {"hqseq2seq", 2708}};
  for (auto [name, want] : counts) {
    size_t n = 0;
    REQUIRE(pvq_param_count(nullptr, name, &n) == PVQ_OK);
    CHECK(n == want);
  }
  REQUIRE(pvq_config_set(c, "recurrent_hidden", "8") == PVQ_OK);
  size_t small = 0;
  REQUIRE(pvq_param_count(c, "lstm", &small) == PVQ_OK);
  CHECK(small < 2857);

  const auto dir = scratch("config");
  std::ofstream(dir / "bad.cfg") << "model = lstm\nfoo = 1\n";
  pvq_config* bad = nullptr;
  CHECK(pvq_config_load((dir / "bad.cfg").string().c_str(), &bad) == PVQ_ERR_CONFIG);
  CHECK(std::string(pvq_last_error()).find("line 2") != std::string::npos);
  CHECK(pvq_config_load((dir / "none.cfg").string().c_str(), &bad) == PVQ_ERR_IO);
  pvq_config_free(c);
}

TEST_CASE("cross-validation artifacts, model files, forecast and evaluate") {
  const auto dir = scratch("cv");
  pvq_frame* f = synth(12, 3);
  pvq_config* c = nullptr;
  pvq_config_new(&c);
  pvq_config_set(c, "epochs", "2");
  pvq_config_set(c, "folds", "2");
  char* result = nullptr;
  REQUIRE(pvq_train_cv(f, c, "mlp", dir.string().c_str(), &result) == PVQ_OK);
  const auto doc = json::parse(take(result));
  CHECK(doc["total_params"] == 3987);
  CHECK(doc["folds"].size() == 2);
  for (const char* name : {"fold_0.model.json", "fold_1.history.csv", "fold_1.history.svg", "metrics.json",
                           "run.cfg"}) {
    CHECK(fs::exists(dir / name));
  }

  pvq_model* m = nullptr;
  REQUIRE(pvq_model_load((dir / "fold_0.model.json").string().c_str(), &m) == PVQ_OK);
  char* info = nullptr;
  REQUIRE(pvq_model_info(m, &info) == PVQ_OK);
  CHECK(json::parse(take(info))["descriptor"]["kind"] == "mlp");

  double y[2] = {NAN, NAN};
  char* csv = nullptr;
  REQUIRE(pvq_model_forecast(m, f, 1, 1, y, &csv) == PVQ_OK);
  CHECK(std::isfinite(y[0]));
  CHECK(y[0] >= 0.0);  // clamped into the training range
  CHECK(take(csv).rfind("timestamp,P\n", 0) == 0);
  CHECK(pvq_model_forecast(m, f, 2, 0, y, nullptr) == PVQ_ERR_CONFIG);

  char* ev = nullptr;
  REQUIRE(pvq_model_evaluate(m, f, 0, &ev) == PVQ_OK);
  const auto e = json::parse(take(ev));
  CHECK(e["horizon"] == 1);
  CHECK(e["metrics"]["n"] == 12 * 24 - 24);
  CHECK(e.contains("persistence"));

  std::ofstream(dir / "corrupt.model.json") << "{\"format\": \"pvqml-model\", \"version\": 1";
  pvq_model* bad = nullptr;
  const auto s = pvq_model_load((dir / "corrupt.model.json").string().c_str(), &bad);
  CHECK(s == PVQ_ERR_FORMAT);
  CHECK(pvq_exit_code(s) == 3);

  pvq_model_free(m);
  pvq_config_free(c);
  pvq_frame_free(f);
}

TEST_CASE("reduced-data cells and variable-horizon forecast") {
  const auto dir = scratch("reduced");
  pvq_frame* f = synth(40, 9);
  pvq_config* c = nullptr;
  pvq_config_new(&c);
  pvq_config_set(c, "epochs", "1");
  pvq_config_set(c, "stride", "6");
  const double fractions[] = {0.5, 1.0};
  char* result = nullptr;
  REQUIRE(pvq_train_reduced(f, c, "seq2seq,hqseq2seq", fractions, 2, dir.string().c_str(), &result) == PVQ_OK);
  const auto doc = json::parse(take(result));
  CHECK(doc.size() == 4);
  CHECK(fs::exists(dir / "reduced_data.csv"));
  CHECK(fs::exists(dir / "reduced_data.svg"));
  CHECK(fs::exists(dir / "hqseq2seq_f0.5.model.json"));

  const auto full = dir / "all.csv";
  REQUIRE(pvq_frame_write_csv(f, full.string().c_str()) == PVQ_OK);
  tail_csv(full, dir / "history.csv", 124);
  pvq_frame* hist = nullptr;
  REQUIRE(pvq_frame_load_csv((dir / "history.csv").string().c_str(), &hist) == PVQ_OK);

  pvq_model* m = nullptr;
  REQUIRE(pvq_model_load((dir / "hqseq2seq_f1.model.json").string().c_str(), &m) == PVQ_OK);
  std::vector<double> y(137, NAN);
  char* csv = nullptr;
  REQUIRE(pvq_model_forecast(m, hist, y.size(), 0, y.data(), &csv) == PVQ_OK);
  for (double v : y) CHECK(std::isfinite(v));
  std::istringstream lines(take(csv));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 138);

  CHECK(pvq_train_reduced(f, c, "mlp", fractions, 0, nullptr, &result) == PVQ_ERR_CONTRACT);
  CHECK(pvq_train_reduced(f, c, "mlp,gru", fractions, 1, nullptr, &result) == PVQ_ERR_CONFIG);

  pvq_model_free(m);
  pvq_frame_free(hist);
  pvq_config_free(c);
  pvq_frame_free(f);
}

TEST_CASE("circuit diagnostics") {
  char* out = nullptr;
  REQUIRE(pvq_analyze_fim("vvrq", R"({"depths": [1, 2], "qubits": 3, "theta_draws": 3, "x_draws": 3})", &out) ==
          PVQ_OK);
  const auto fim = json::parse(take(out));
  CHECK(fim["curve"][0]["rank"] == 3);
  CHECK(fim["curve"][1]["rank"] == 6);
  CHECK(fim["rank_strictly_increasing"] == true);
  CHECK(fim["csv"]["rank_curve"].get<std::string>().rfind("depth,n_params,rank,max_eigenvalue\n", 0) == 0);

  REQUIRE(pvq_analyze_fourier("qdi", R"({"depth": 1, "dims": [0], "theta_draws": 5})", &out) == PVQ_OK);
  const auto four = json::parse(take(out));
  CHECK(four["grid_size"] == 3);

  CHECK(pvq_analyze_fim("ring", nullptr, &out) == PVQ_ERR_CONFIG);
  CHECK(pvq_analyze_fim("vvrq", R"({"depht": 3})", &out) == PVQ_ERR_CONFIG);
  CHECK(pvq_analyze_fim("vvrq", "{not json", &out) == PVQ_ERR_CONFIG);
  CHECK(pvq_analyze_fim("vvrq", R"({"depths": [3, 2]})", &out) == PVQ_ERR_CONTRACT);
}

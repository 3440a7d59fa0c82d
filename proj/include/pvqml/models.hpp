#pragma once

// The six forecasting architectures over a shared parameter registry.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvqml/data.hpp"
#include "pvqml/layers.hpp"

namespace pvqml::models {

enum class ModelKind { Mlp, Hqnn, Lstm, HqLstm, Seq2Seq, HqSeq2Seq };

std::string to_string(ModelKind kind);
/// Lower-case names: mlp, hqnn, lstm, hqlstm, seq2seq, hqseq2seq.
ModelKind parse_model_kind(const std::string& name);
bool is_sequence_model(ModelKind kind);
bool is_hybrid(ModelKind kind);

struct ModelDescriptor {
  ModelKind kind = ModelKind::Mlp;
  std::size_t window = 24;    // input rows for hour-ahead models
  std::size_t features = data::kColumns;
  std::vector<std::size_t> hidden;  // dense stack widths (MLP, HQNN)
  std::size_t recurrent_hidden = 0;  // LSTM family and Seq2Seq
  layers::VvrqConfig vvrq;
  layers::QdiConfig qdi;
  double dropout = 0.0;
  std::size_t total_params = 0;  // filled in by Model
};

/// Table-1 configuration of each architecture.
ModelDescriptor default_descriptor(ModelKind kind);

void to_json(nlohmann::json& j, const ModelDescriptor& d);
void from_json(const nlohmann::json& j, ModelDescriptor& d);

class Model {
 public:
  explicit Model(ModelDescriptor descriptor);

  const ModelDescriptor& descriptor() const { return desc_; }
  ModelKind kind() const { return desc_.kind; }
  std::size_t param_count() const { return registry_.size(); }
  ad::ParamRegistry& params() { return registry_; }
  const ad::ParamRegistry& params() const { return registry_; }

  /// Classical weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) (LSTM cells use
  /// the hidden size), quantum weights ~ U(0, 2 pi).
  void initialize(std::uint64_t seed);

  /// Records the forward pass of one sample. `input` is `rows` x features,
  /// row-major and scaled. Hour-ahead models need rows == window and
  /// horizon == 1; sequence models accept any rows >= 1 and horizon >= 1.
  /// Dropout is active only when `dropout_rng` is given.
  ad::Tensor forward(ad::Tape& tape, std::span<const double> input, std::size_t rows,
                     std::size_t horizon, std::mt19937_64* dropout_rng = nullptr) const;

  /// Inference without gradients.
  std::vector<double> predict(std::span<const double> input, std::size_t rows,
                              std::size_t horizon) const;

 private:
  ad::Tensor forward_dense(ad::Tape& tape, const ad::Tensor& x) const;
  ad::Tensor forward_recurrent(ad::Tape& tape, std::span<const double> input,
                               std::mt19937_64* dropout_rng) const;
  ad::Tensor forward_seq2seq(ad::Tape& tape, std::span<const double> input, std::size_t rows,
                             std::size_t horizon) const;

  ModelDescriptor desc_;
  ad::ParamRegistry registry_;
  std::vector<layers::Linear> dense_;
  std::size_t vvrq_weights_ = 0;
  std::shared_ptr<const layers::QuantumCircuitLayer> circuit_;
  std::optional<layers::LstmCell> lstm_;
  std::optional<layers::HqLstmCell> hqlstm_;
  std::optional<layers::LstmCell> decoder_;
  std::size_t head_qdi_weights_ = 0;
  struct InitRange {
    std::size_t segment;
    double lo, hi;
  };
  std::vector<InitRange> init_;
};

/// Hour-ahead prediction from a window x features scaled matrix.
double forecast_next_hour(const Model& model, std::span<const double> window);

/// Greedy decode of `horizon` scaled power values after a `rows` x features
/// history. Throws ContractError for an empty history or a non-sequence model.
std::vector<double> seq2seq_forecast(const Model& model, std::span<const double> history,
                                     std::size_t rows, std::size_t horizon);

inline constexpr int kModelFormatVersion = 1;

/// Self-describing model document. Parameters are stored as hexadecimal
/// floating-point strings so a round trip is bit-exact.
struct SavedModel {
  Model model;
  std::optional<data::ScalerStats> scaler;
};

nlohmann::json model_to_json(const Model& model, const std::optional<data::ScalerStats>& scaler);
/// Throws FormatError for a wrong format tag, version, parameter count or
/// malformed value.
SavedModel model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const Model& model,
                const std::optional<data::ScalerStats>& scaler);
SavedModel load_model(const std::string& path);

}  // namespace pvqml::models

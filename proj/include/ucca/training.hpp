// Corpus regimes, the optimizer, the training loop and checkpoints.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ucca/evaluation.hpp"
#include "ucca/io.hpp"
#include "ucca/model.hpp"

namespace ucca {

enum class RegimeType { Single, Cross, ZeroShot, FewShot };

std::string_view to_string(RegimeType r);
RegimeType parse_regime(std::string_view name);

struct Regime {
  RegimeType type = RegimeType::Single;
  std::string target;  // language; required by the zero- and few-shot regimes
};

struct CorpusSpec {
  std::string language;
  std::string path;
  std::string role;  // "train" or "validation"
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
};

struct TrainConfig {
  std::vector<CorpusSpec> corpora;
  Regime regime;
  AdamConfig optimizer;
  int batch_size = 16;
  int max_epochs = 100;
  int patience = 10;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  ModelConfig model;
  double remote_threshold = 0.5;
  /// Per-token vector file shared by training and validation passages.
  std::string external_vectors;
  /// Stop once labeled primary and remote F1 on the training set both reach
  /// this value.
  std::optional<double> stop_at_train_f1;
  bool lenient = false;
};

Json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

/// Relative corpus paths are resolved against `base_dir`. Throws ucca::Error
/// on unknown fields, bad values or a config without a validation corpus.
TrainConfig config_from_json(const Json& j, const fs::path& base_dir = {});
Json config_to_json(const TrainConfig& c);
TrainConfig load_config(const fs::path& path);

/// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainConfig& c);

struct CorpusPassage {
  Passage passage;
  std::string language;
};

/// Training and validation passages selected by the regime.
struct RegimeData {
  std::vector<CorpusPassage> train;
  std::vector<CorpusPassage> validation;
};

/// Loads every corpus and applies the regime filter. Throws ucca::Error on
/// an empty training set or missing validation data.
RegimeData select_regime_data(const TrainConfig& config);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, const AdamConfig& config);
  void step();
  long steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

/// Scales every gradient so the global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_gradients(const std::vector<Parameter*>& params, double max_norm);

/// Parses every passage and scores it against its gold graph.
EvalReport evaluate_model(const ParserModel& model, const std::vector<const Passage*>& passages,
                          const ExternalVectors* external, double threshold, bool remotes = true);

struct TrainResult {
  ParserModel model;
  Json log;
};

TrainResult train(const TrainConfig& config);
/// Same, on already selected data.
TrainResult train(const TrainConfig& config, const RegimeData& data, const ExternalVectors* external);

// Checkpoint: "UCCACKPT", a little-endian u32 version, a u64 header length,
// the JSON header, then every parameter's values as raw doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParserModel model;
  double remote_threshold = 0.5;
  std::string config_hash;
};

void save_checkpoint(const ParserModel& model, double remote_threshold, const std::string& config_hash,
                     const fs::path& path);
/// Throws ucca::Error on a corrupt file, or when `expected_labels` is given
/// and differs from the stored inventory.
Checkpoint load_checkpoint(const fs::path& path, const LabelInventory* expected_labels = nullptr);

}  // namespace ucca

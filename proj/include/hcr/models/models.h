#ifndef HCR_MODELS_MODELS_H_
#define HCR_MODELS_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hcr/common/kvconfig.h"
#include "hcr/nd/layers.h"
#include "hcr/notes/notes.h"

namespace hcr::models {

enum class ModelKind { kNotesHcr, kCtsRnn, kMmHcr };

std::string_view ModelKindName(ModelKind kind);  // "notes-hcr", "cts-rnn", "mm-hcr"
ModelKind ParseModelKind(std::string_view name);
inline bool UsesNotes(ModelKind k) { return k != ModelKind::kCtsRnn; }
inline bool UsesSeries(ModelKind k) { return k != ModelKind::kNotesHcr; }

struct ModelConfig {
  ModelKind kind = ModelKind::kNotesHcr;
  std::size_t note_length = 500;
  std::size_t embedding_dim = 200;
  std::size_t conv_blocks = 3;
  std::size_t filters = 200;
  std::size_t kernel_size = 3;
  double spatial_dropout = 0.5;
  double conv_l2 = 1e-5;
  std::size_t temporal_hidden = 64;
  std::vector<std::size_t> cts_hidden = {32, 16};
  double cts_l2 = 1e-3;
  double head_dropout = 0.3;  // CTS-RNN and MM-HCR heads
  std::size_t cts_features = 34;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;
  bool finetune_embeddings = false;

  // Reads "model.*" keys.
  static ModelConfig FromKeyValue(KeyValueConfig& kv);
  // Gradient-check scale: note length 8, embedding 4, 2 filters, hidden 3,
  // series features 3.
  static ModelConfig Toy(ModelKind kind);

  void Validate() const;
  std::string Canonical() const;
  std::uint64_t Hash() const;
};

// One hospital stay as a model input.
struct Example {
  std::int64_t hadm_id = 0;
  std::int64_t subject_id = 0;
  bool label = false;
  std::vector<notes::CleanNote> notes;  // sorted by chart time
  nd::Tensor series;                    // [T, features]; rank 0 when absent
};

// B examples with equal note counts.
struct Batch {
  std::size_t size = 0;
  std::size_t notes_per_file = 0;
  std::vector<std::int32_t> note_ids;   // B*T*L
  std::vector<std::uint8_t> note_mask;  // B*T*L
  nd::Tensor series;                    // [B, Tc, F] or rank 0
  std::vector<double> labels;
};

Batch MakeBatch(std::span<const Example* const> examples, const ModelConfig& config);

class Model {
 public:
  // embeddings: [V, embedding_dim] table, required for note-based kinds.
  Model(const ModelConfig& config, std::uint64_t seed, std::shared_ptr<const nd::Tensor> embeddings = nullptr);
  Model(const Model& other);
  Model& operator=(const Model&) = delete;

  // Probabilities [B].
  nd::Var Forward(nd::Tape& tape, const Batch& batch, nd::Mode mode, nd::Rng& rng);
  // Weight-decay term for the configured parameter groups.
  nd::Var Penalty(nd::Tape& tape);

  // Eval-mode probabilities without a gradient record.
  std::vector<double> Predict(const Batch& batch);

  nd::ParamStore& params() { return store_; }
  const nd::ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return config_; }

 private:
  struct Block {
    nd::Conv1DParams conv;
    nd::BatchNormParams bn;
    nd::Conv1DParams projection;  // kernel null for identity shortcuts
  };

  void Build(nd::Rng& rng);
  void Bind();
  nd::Var NotesBranch(nd::Tape& tape, const Batch& batch, nd::Mode mode, nd::Rng& rng);
  nd::Var SeriesBranch(nd::Tape& tape, const Batch& batch);

  ModelConfig config_;
  std::shared_ptr<const nd::Tensor> embeddings_;
  nd::ParamStore store_;
  std::vector<Block> blocks_;
  nd::BiGruParams temporal_;
  std::vector<nd::BiGruParams> cts_;
  nd::DenseParams head_;
  nd::Param* embedding_param_ = nullptr;
};

}  // namespace hcr::models

#endif  // HCR_MODELS_MODELS_H_

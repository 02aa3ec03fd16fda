#include "hcr/models/models.h"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "hcr/common/error.h"
#include "hcr/common/hash.h"

namespace hcr::models {

using nd::Mode;
using nd::Param;
using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nd::Var;

std::string_view ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kNotesHcr: return "notes-hcr";
    case ModelKind::kCtsRnn: return "cts-rnn";
    case ModelKind::kMmHcr: return "mm-hcr";
  }
  return "unknown";
}

ModelKind ParseModelKind(std::string_view name) {
  for (ModelKind k : {ModelKind::kNotesHcr, ModelKind::kCtsRnn, ModelKind::kMmHcr}) {
    if (ModelKindName(k) == name) return k;
  }
  Fail(ErrorKind::kConfig, fmt::format("unknown model '{}' (expected notes-hcr, cts-rnn or mm-hcr)", name));
}

ModelConfig ModelConfig::FromKeyValue(KeyValueConfig& kv) {
  ModelConfig c;
  auto size = [&](const std::string& key, std::size_t fallback) {
    const std::int64_t v = kv.GetInt(key, static_cast<std::int64_t>(fallback));
    Check(v > 0, ErrorKind::kConfig, fmt::format("{} must be positive", key));
    return static_cast<std::size_t>(v);
  };
  c.kind = ParseModelKind(kv.GetString("model.kind", std::string(ModelKindName(c.kind))));
  c.note_length = size("model.note_length", c.note_length);
  c.embedding_dim = size("model.embedding_dim", c.embedding_dim);
  c.conv_blocks = size("model.conv_blocks", c.conv_blocks);
  c.filters = size("model.filters", c.filters);
  c.kernel_size = size("model.kernel_size", c.kernel_size);
  c.spatial_dropout = kv.GetDouble("model.spatial_dropout", c.spatial_dropout);
  c.conv_l2 = kv.GetDouble("model.conv_l2", c.conv_l2);
  c.temporal_hidden = size("model.temporal_hidden", c.temporal_hidden);
  std::vector<std::int64_t> fallback(c.cts_hidden.begin(), c.cts_hidden.end());
  c.cts_hidden.clear();
  for (std::int64_t h : kv.GetIntList("model.cts_hidden", fallback)) {
    Check(h > 0, ErrorKind::kConfig, "model.cts_hidden entries must be positive");
    c.cts_hidden.push_back(static_cast<std::size_t>(h));
  }
  c.cts_l2 = kv.GetDouble("model.cts_l2", c.cts_l2);
  c.head_dropout = kv.GetDouble("model.head_dropout", c.head_dropout);
  c.cts_features = size("model.cts_features", c.cts_features);
  c.bn_momentum = kv.GetDouble("model.bn_momentum", c.bn_momentum);
  c.bn_epsilon = kv.GetDouble("model.bn_epsilon", c.bn_epsilon);
  c.finetune_embeddings = kv.GetBool("model.finetune_embeddings", c.finetune_embeddings);
  c.Validate();
  return c;
}

ModelConfig ModelConfig::Toy(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.note_length = 8;
  c.embedding_dim = 4;
  c.filters = 2;
  c.temporal_hidden = 3;
  c.cts_hidden = {3, 3};
  c.cts_features = 3;
  return c;
}

void ModelConfig::Validate() const {
  auto positive = [](std::size_t v, const char* name) {
    Check(v > 0, ErrorKind::kConfig, fmt::format("model.{} must be positive", name));
  };
  positive(note_length, "note_length");
  positive(embedding_dim, "embedding_dim");
  positive(conv_blocks, "conv_blocks");
  positive(filters, "filters");
  positive(temporal_hidden, "temporal_hidden");
  positive(cts_features, "cts_features");
  Check(kernel_size % 2 == 1, ErrorKind::kConfig, "model.kernel_size must be odd");
  Check(!cts_hidden.empty(), ErrorKind::kConfig, "model.cts_hidden needs at least one layer");
  for (double p : {spatial_dropout, head_dropout}) {
    Check(p >= 0 && p < 1, ErrorKind::kConfig, "dropout probabilities must lie in [0, 1)");
  }
  Check(conv_l2 >= 0 && cts_l2 >= 0, ErrorKind::kConfig, "weight decay must be non-negative");
  Check(bn_momentum >= 0 && bn_momentum < 1 && bn_epsilon > 0, ErrorKind::kConfig, "bad batch-norm settings");
}

std::string ModelConfig::Canonical() const {
  return fmt::format(
      "kind={};note_length={};embedding_dim={};conv_blocks={};filters={};kernel_size={};spatial_dropout={};"
      "conv_l2={};temporal_hidden={};cts_hidden={};cts_l2={};head_dropout={};cts_features={};bn_momentum={};"
      "bn_epsilon={};finetune_embeddings={}",
      ModelKindName(kind), note_length, embedding_dim, conv_blocks, filters, kernel_size, spatial_dropout, conv_l2,
      temporal_hidden, fmt::join(cts_hidden, ","), cts_l2, head_dropout, cts_features, bn_momentum, bn_epsilon,
      finetune_embeddings);
}

std::uint64_t ModelConfig::Hash() const { return Hash64(Canonical()); }

Batch MakeBatch(std::span<const Example* const> examples, const ModelConfig& config) {
  Check(!examples.empty(), ErrorKind::kContract, "empty batch");
  Batch b;
  b.size = examples.size();
  const bool notes = UsesNotes(config.kind), series = UsesSeries(config.kind);
  if (notes) {
    b.notes_per_file = examples.front()->notes.size();
    Check(b.notes_per_file > 0, ErrorKind::kEmptyNote,
          fmt::format("hadm {} has no notes", examples.front()->hadm_id));
    b.note_ids.reserve(b.size * b.notes_per_file * config.note_length);
  }
  std::size_t steps = 0;
  if (series) {
    Check(examples.front()->series.rank() == 2, ErrorKind::kContract,
          fmt::format("hadm {} has no time series", examples.front()->hadm_id));
    steps = examples.front()->series.dim(0);
    b.series = Tensor(Shape{b.size, steps, config.cts_features});
  }
  for (std::size_t i = 0; i < b.size; ++i) {
    const Example& e = *examples[i];
    b.labels.push_back(e.label ? 1.0 : 0.0);
    if (notes) {
      Check(e.notes.size() == b.notes_per_file, ErrorKind::kContract,
            "batch examples must share one note count");
      for (const auto& n : e.notes) {
        Check(n.tokens.size() == config.note_length && n.mask.size() == config.note_length, ErrorKind::kContract,
              fmt::format("note {} has length {}, model expects {}", n.row_id, n.tokens.size(), config.note_length));
        b.note_ids.insert(b.note_ids.end(), n.tokens.begin(), n.tokens.end());
        b.note_mask.insert(b.note_mask.end(), n.mask.begin(), n.mask.end());
      }
    }
    if (series) {
      Check(e.series.rank() == 2 && e.series.dim(0) == steps && e.series.dim(1) == config.cts_features,
            ErrorKind::kContract,
            fmt::format("hadm {}: series shape {} does not fit the batch", e.hadm_id, nd::ShapeString(e.series.shape())));
      std::copy(e.series.data().begin(), e.series.data().end(), b.series.raw() + i * steps * config.cts_features);
    }
  }
  return b;
}

Model::Model(const ModelConfig& config, std::uint64_t seed, std::shared_ptr<const Tensor> embeddings)
    : config_(config), embeddings_(std::move(embeddings)) {
  config_.Validate();
  if (UsesNotes(config_.kind)) {
    Check(embeddings_ && embeddings_->rank() == 2 && embeddings_->dim(1) == config_.embedding_dim,
          ErrorKind::kConfig, "note models need an embedding table whose width equals model.embedding_dim");
  }
  nd::Rng rng(seed);
  Build(rng);
  Bind();
}

Model::Model(const Model& other) : config_(other.config_), embeddings_(other.embeddings_), store_(other.store_) {
  Bind();
}

void Model::Build(nd::Rng& rng) {
  if (UsesNotes(config_.kind)) {
    if (config_.finetune_embeddings) store_.Add("embedding.table", *embeddings_);
    std::size_t channels = config_.embedding_dim;
    for (std::size_t i = 0; i < config_.conv_blocks; ++i) {
      const std::string prefix = fmt::format("semantic.block{}", i);
      nd::MakeConv1D(store_, prefix + ".conv", config_.kernel_size, channels, config_.filters, rng);
      nd::MakeBatchNorm(store_, prefix + ".bn", config_.filters, config_.bn_momentum, config_.bn_epsilon);
      if (channels != config_.filters) {
        nd::MakeConv1D(store_, prefix + ".projection", 1, channels, config_.filters, rng, false);
      }
      channels = config_.filters;
    }
    nd::MakeBiGru(store_, "temporal", config_.filters, config_.temporal_hidden, rng);
  }
  if (UsesSeries(config_.kind)) {
    std::size_t in = config_.cts_features;
    for (std::size_t i = 0; i < config_.cts_hidden.size(); ++i) {
      nd::MakeBiGru(store_, fmt::format("series.layer{}", i), in, config_.cts_hidden[i], rng);
      in = 2 * config_.cts_hidden[i];
    }
  }
  std::size_t head_in = 0;
  if (UsesNotes(config_.kind)) head_in += 2 * config_.temporal_hidden;
  if (UsesSeries(config_.kind)) head_in += 2 * config_.cts_hidden.back();
  nd::MakeDense(store_, "head", head_in, rng);
}

void Model::Bind() {
  auto conv = [&](const std::string& prefix, bool bias) {
    nd::Conv1DParams p;
    p.kernel = &store_.Get(prefix + ".kernel");
    if (bias) p.bias = &store_.Get(prefix + ".bias");
    return p;
  };
  auto gru = [&](const std::string& prefix) {
    nd::GruParams g;
    g.input_weights = &store_.Get(prefix + ".W");
    g.recurrent_weights = &store_.Get(prefix + ".U");
    g.bias = &store_.Get(prefix + ".b");
    return g;
  };
  blocks_.clear();
  cts_.clear();
  embedding_param_ = store_.Find("embedding.table");
  if (UsesNotes(config_.kind)) {
    for (std::size_t i = 0; i < config_.conv_blocks; ++i) {
      const std::string prefix = fmt::format("semantic.block{}", i);
      Block b;
      b.conv = conv(prefix + ".conv", true);
      b.bn.gamma = &store_.Get(prefix + ".bn.gamma");
      b.bn.beta = &store_.Get(prefix + ".bn.beta");
      b.bn.running_mean = &store_.Get(prefix + ".bn.running_mean");
      b.bn.running_var = &store_.Get(prefix + ".bn.running_var");
      b.bn.momentum = config_.bn_momentum;
      b.bn.epsilon = config_.bn_epsilon;
      if (store_.Find(prefix + ".projection.kernel")) b.projection = conv(prefix + ".projection", false);
      blocks_.push_back(b);
    }
    temporal_ = {gru("temporal.fwd"), gru("temporal.bwd")};
  }
  if (UsesSeries(config_.kind)) {
    for (std::size_t i = 0; i < config_.cts_hidden.size(); ++i) {
      const std::string prefix = fmt::format("series.layer{}", i);
      cts_.push_back({gru(prefix + ".fwd"), gru(prefix + ".bwd")});
    }
  }
  head_ = {&store_.Get("head.W"), &store_.Get("head.b")};
}

Var Model::NotesBranch(Tape& tape, const Batch& batch, Mode mode, nd::Rng& rng) {
  const std::size_t n = batch.size * batch.notes_per_file, len = config_.note_length, e = config_.embedding_dim;
  Check(batch.note_ids.size() == n * len, ErrorKind::kContract, "batch token count does not match its shape");
  Var x;
  if (embedding_param_) {
    x = nd::Reshape(nd::GatherRows(tape.Leaf(*embedding_param_), batch.note_ids), Shape{n, len, e});
  } else {
    const Tensor& table = *embeddings_;
    const std::size_t v = table.dim(0);
    Tensor gathered(Shape{n, len, e});
    for (std::size_t i = 0; i < batch.note_ids.size(); ++i) {
      const std::int32_t id = batch.note_ids[i];
      if (id <= 0) continue;
      Check(static_cast<std::size_t>(id) < v, ErrorKind::kData,
            fmt::format("token id {} outside embedding table of {} rows", id, v));
      std::copy_n(table.raw() + static_cast<std::size_t>(id) * e, e, gathered.raw() + i * e);
    }
    x = tape.Constant(std::move(gathered));
  }
  for (const Block& b : blocks_) {
    Var h = nd::Conv1DForward(tape, x, b.conv);
    h = nd::SpatialDropout(h, config_.spatial_dropout, mode, rng);
    h = nd::BatchNormForward(tape, h, b.bn, mode);
    const Var shortcut = b.projection.kernel ? nd::Conv1DForward(tape, x, b.projection) : x;
    x = nd::Relu(nd::Add(h, shortcut));
  }
  const Var docs = nd::GlobalAvgPool(x, batch.note_mask);
  const Var seq = nd::Reshape(docs, Shape{batch.size, batch.notes_per_file, config_.filters});
  return nd::BiGruForward(tape, seq, {}, temporal_).final;
}

Var Model::SeriesBranch(Tape& tape, const Batch& batch) {
  Check(batch.series.rank() == 3 && batch.series.dim(0) == batch.size, ErrorKind::kContract,
        "batch is missing its time series");
  Var x = tape.Constant(batch.series);
  nd::BiGruOutput out;
  for (const auto& layer : cts_) {
    out = nd::BiGruForward(tape, x, {}, layer);
    x = out.outputs;
  }
  return out.final;
}

Var Model::Forward(Tape& tape, const Batch& batch, Mode mode, nd::Rng& rng) {
  switch (config_.kind) {
    case ModelKind::kNotesHcr:
      return nd::DenseSigmoid(tape, NotesBranch(tape, batch, mode, rng), head_);
    case ModelKind::kCtsRnn: {
      const Var features = nd::Dropout(SeriesBranch(tape, batch), config_.head_dropout, mode, rng);
      return nd::DenseSigmoid(tape, features, head_);
    }
    case ModelKind::kMmHcr: {
      const Var patient = NotesBranch(tape, batch, mode, rng);
      const Var fused = nd::ConcatLast(patient, SeriesBranch(tape, batch));
      return nd::DenseSigmoid(tape, nd::Dropout(fused, config_.head_dropout, mode, rng), head_);
    }
  }
  Fail(ErrorKind::kContract, "unknown model kind");
}

Var Model::Penalty(Tape& tape) {
  std::vector<Param*> conv, series;
  for (const Block& b : blocks_) {
    conv.push_back(b.conv.kernel);
    if (b.projection.kernel) conv.push_back(b.projection.kernel);
  }
  for (const auto& layer : cts_) {
    for (const auto* g : {&layer.forward, &layer.backward}) {
      series.push_back(g->input_weights);
      series.push_back(g->recurrent_weights);
    }
  }
  return nd::Add(nd::L2Penalty(tape, conv, config_.conv_l2), nd::L2Penalty(tape, series, config_.cts_l2));
}

std::vector<double> Model::Predict(const Batch& batch) {
  Tape tape(false);
  nd::Rng unused(0);
  const Var p = Forward(tape, batch, Mode::kEval, unused);
  return std::vector<double>(p.value().data().begin(), p.value().data().end());
}

}  // namespace hcr::models

#ifndef HCR_PIPELINE_PIPELINE_H_
#define HCR_PIPELINE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hcr/cohort/cohort.h"
#include "hcr/cohort/synth.h"
#include "hcr/common/kvconfig.h"
#include "hcr/embed/embed.h"
#include "hcr/models/models.h"
#include "hcr/notes/notes.h"
#include "hcr/train/trainer.h"

namespace hcr::pipeline {

inline constexpr int kWindows[] = {12, 24, 48};

// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> window;
  std::optional<std::string> model;
  std::optional<std::filesystem::path> work_dir;
};

struct RunConfig {
  std::filesystem::path work_dir = "work";
  std::filesystem::path data_dir;  // defaults to work_dir/data
  int window = 48;
  models::ModelKind model = models::ModelKind::kNotesHcr;
  std::uint64_t seed = 1;
  int jobs = 1;

  cohort::SynthConfig synth;
  std::int64_t min_count = 5;
  embed::SkipGramOptions embed;
  int folds = 5;
  models::ModelConfig model_config;
  train::TrainConfig train;

  // Canonical text of every setting, for manifests.
  std::string Canonical() const;
};

// Reads the flat key-value file (if any), applies overrides and rejects
// unknown keys. A relative data_dir is resolved against work_dir.
RunConfig LoadRunConfig(const std::optional<std::filesystem::path>& path, const Overrides& overrides);

// ---------------------------------------------------------------- stages

struct TokenizedNote {
  std::int64_t row_id = 0;
  std::int64_t subject_id = 0;
  std::int64_t hadm_id = 0;
  std::string category;
  Timestamp charted_at;
  std::vector<std::string> tokens;
};

struct PreprocessResult {
  std::vector<std::vector<std::string>> embedding_corpus;
  std::vector<TokenizedNote> model_notes;
  std::size_t raw_notes = 0;
  std::size_t empty_notes = 0;  // nothing left after filtering
};

PreprocessResult Preprocess(std::span<const notes::RawNote> raw);

// Vocabulary ids, truncated and padded to note_length.
std::vector<notes::CleanNote> EncodeNotes(std::span<const TokenizedNote> notes, const embed::Vocabulary& vocab,
                                          std::size_t note_length);

struct EmbeddingModel {
  embed::Vocabulary vocab;
  std::shared_ptr<const nd::Tensor> vectors;
  std::vector<double> epoch_loss;
};

EmbeddingModel TrainEmbeddings(std::span<const std::vector<std::string>> corpus, std::int64_t min_count,
                               const embed::SkipGramOptions& options);

cohort::NoteTimes CollectNoteTimes(std::span<const TokenizedNote> notes);

// One example per cohort entry. Notes come from the window; the series is
// imputed hourly over it. Throws kData when an entry lacks a needed modality.
std::vector<models::Example> BuildExamples(std::span<const cohort::CohortEntry> cohort,
                                           std::span<const notes::CleanNote> notes,
                                           const std::map<std::int64_t, cohort::RawSeries>& series, int window,
                                           const models::ModelConfig& config);

// ---------------------------------------------------------------- manifests

// Records what a stage read and wrote, by SHA-256 of file contents.
struct Manifest {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path relative to the manifest's directory -> sha256
  std::map<std::string, std::string> info;

  void Save(const std::filesystem::path& path) const;
  static Manifest Load(const std::filesystem::path& path);
};

// Throws kMissingArtifact naming `remedy` when the manifest is absent or any
// listed output no longer matches its recorded hash.
Manifest RequireManifest(const std::filesystem::path& path, const std::string& remedy);

// ---------------------------------------------------------------- commands

// Each writes its artifacts and manifest and reports progress to `log`.
void CmdSynth(const RunConfig& config, std::ostream& log);
void CmdPreprocess(const RunConfig& config, std::ostream& log);
void CmdEmbed(const RunConfig& config, std::ostream& log);
void CmdCohort(const RunConfig& config, std::ostream& log);
void CmdTrain(const RunConfig& config, std::ostream& log);
// Prints the table to `out`.
void CmdEvaluate(const RunConfig& config, std::ostream& out, std::ostream& log);

std::filesystem::path RunDir(const RunConfig& config);

}  // namespace hcr::pipeline

#endif  // HCR_PIPELINE_PIPELINE_H_

#include "hcr/pipeline/pipeline.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hcr/common/error.h"
#include "hcr/common/hash.h"
#include "hcr/nd/checkpoint.h"
#include "hcr/train/metrics.h"
#include "hcr/train/report.h"
#include "json.hpp"

namespace hcr::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "hcr-pipeline 1";

std::string SynthCanonical(const cohort::SynthConfig& c) {
  return fmt::format(
      "subjects={};extra={};max_stays={};prevalence={};note_signal={};ts_signal={};token_rate={};ramp={};"
      "note_rate={};words={}-{};neutral={};series_hours={};minor={};multi={};transfer={};early={};post={};"
      "error={};dup={};missing_time={};seed={}",
      c.num_subjects, c.extra_stay_probability, c.max_stays_per_subject, c.prevalence, c.note_signal, c.ts_signal,
      c.token_signal_rate, c.signal_ramp_hours, c.note_rate_per_hour, c.min_note_words, c.max_note_words,
      c.neutral_vocabulary, c.series_hours, c.minor_fraction, c.multi_icu_fraction, c.transfer_fraction,
      c.early_death_fraction, c.post_discharge_death_fraction, c.error_note_rate, c.duplicate_note_rate,
      c.missing_charttime_rate, c.seed);
}

std::string EmbedCanonical(const RunConfig& c) {
  const auto& o = c.embed;
  return fmt::format("min_count={};dim={};window={};epochs={};negatives={};lr={};seed={};subsample={};subword={};"
                     "ngram={}-{};buckets={};threads={}",
                     c.min_count, o.dim, o.window, o.epochs, o.negatives, o.learning_rate, o.seed, o.subsample,
                     o.subword, o.min_ngram, o.max_ngram, o.buckets, o.threads);
}

std::string ShaText(const std::string& s) { return Sha256Hex(s); }

std::ofstream OpenOut(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  Check(static_cast<bool>(out), ErrorKind::kData, fmt::format("cannot write {}", path.string()));
  return out;
}

std::ifstream OpenIn(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  Check(static_cast<bool>(in), ErrorKind::kMissingArtifact, fmt::format("cannot read {}", path.string()));
  return in;
}

void RequireFile(const fs::path& path, const std::string& remedy) {
  Check(fs::exists(path), ErrorKind::kMissingArtifact, fmt::format("missing {}; {}", path.string(), remedy));
}

fs::path PreprocessDir(const RunConfig& c) { return c.work_dir / "preprocess"; }
fs::path EmbedDir(const RunConfig& c) { return c.work_dir / "embed"; }
fs::path CohortDir(const RunConfig& c) { return c.work_dir / "cohort"; }
fs::path CohortManifestPath(const RunConfig& c) {
  return CohortDir(c) / fmt::format("manifest_w{}.json", c.window);
}

void WriteTokenizedNotes(std::ostream& out, std::span<const TokenizedNote> notes) {
  for (const auto& n : notes) {
    out << json{{"row_id", n.row_id},     {"subject_id", n.subject_id},
                {"hadm_id", n.hadm_id},   {"category", n.category},
                {"charted_at", n.charted_at.ToString()}, {"tokens", n.tokens}}
               .dump()
        << '\n';
  }
}

std::vector<TokenizedNote> ReadTokenizedNotes(std::istream& in, const std::string& source) {
  std::vector<TokenizedNote> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      TokenizedNote t;
      t.row_id = j.at("row_id").get<std::int64_t>();
      t.subject_id = j.at("subject_id").get<std::int64_t>();
      t.hadm_id = j.at("hadm_id").get<std::int64_t>();
      t.category = j.at("category").get<std::string>();
      const auto ts = Timestamp::Parse(j.at("charted_at").get<std::string>());
      Check(ts.has_value(), ErrorKind::kData, fmt::format("{}:{}: bad charted_at", source, n));
      t.charted_at = *ts;
      t.tokens = j.at("tokens").get<std::vector<std::string>>();
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      Fail(ErrorKind::kData, fmt::format("{}:{}: {}", source, n, e.what()));
    }
  }
  return out;
}

struct CohortFile {
  std::vector<cohort::CohortEntry> entries;
  std::vector<cohort::FoldSplit> splits;
};

void WriteCohortFile(std::ostream& out, std::span<const cohort::CohortEntry> entries,
                     std::span<const cohort::FoldSplit> splits) {
  for (const auto& e : entries) {
    std::vector<std::string> roles;
    for (const auto& s : splits) roles.emplace_back(cohort::RoleName(s.roles.at(e.hadm_id)));
    out << json{{"hadm_id", e.hadm_id},
                {"subject_id", e.subject_id},
                {"intime", e.intime.ToString()},
                {"label", e.label ? 1 : 0},
                {"roles", roles}}
               .dump()
        << '\n';
  }
}

std::optional<cohort::Role> ParseRole(std::string_view name) {
  for (cohort::Role r : {cohort::Role::kTrain, cohort::Role::kVal, cohort::Role::kTest}) {
    if (cohort::RoleName(r) == name) return r;
  }
  return std::nullopt;
}

CohortFile ReadCohortFile(std::istream& in, int folds, const std::string& source) {
  CohortFile f;
  for (int k = 0; k < folds; ++k) f.splits.push_back({k, {}});
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      cohort::CohortEntry e;
      e.hadm_id = j.at("hadm_id").get<std::int64_t>();
      e.subject_id = j.at("subject_id").get<std::int64_t>();
      const auto ts = Timestamp::Parse(j.at("intime").get<std::string>());
      Check(ts.has_value(), ErrorKind::kData, fmt::format("{}:{}: bad intime", source, n));
      e.intime = *ts;
      e.label = j.at("label").get<int>() != 0;
      const auto roles = j.at("roles").get<std::vector<std::string>>();
      Check(static_cast<int>(roles.size()) == folds, ErrorKind::kData,
            fmt::format("{}:{}: {} fold roles, expected {}", source, n, roles.size(), folds));
      for (int k = 0; k < folds; ++k) {
        const auto r = ParseRole(roles[k]);
        Check(r.has_value(), ErrorKind::kData, fmt::format("{}:{}: bad role '{}'", source, n, roles[k]));
        f.splits[k].roles[e.hadm_id] = *r;
      }
      f.entries.push_back(e);
    } catch (const json::exception& e) {
      Fail(ErrorKind::kData, fmt::format("{}:{}: {}", source, n, e.what()));
    }
  }
  return f;
}

}  // namespace

// ---------------------------------------------------------------- config

std::string RunConfig::Canonical() const {
  return fmt::format("work_dir={}\ndata_dir={}\nwindow={}\nmodel={}\nseed={}\nsynth: {}\nembed: {}\nfolds={}\n"
                     "model: {}\ntrain: {}\n",
                     work_dir.string(), data_dir.string(), window, models::ModelKindName(model), seed,
                     SynthCanonical(synth), EmbedCanonical(*this), folds, model_config.Canonical(),
                     train.Canonical());
}

RunConfig LoadRunConfig(const std::optional<fs::path>& path, const Overrides& overrides) {
  KeyValueConfig kv = path ? KeyValueConfig::ReadFile(*path) : KeyValueConfig();
  RunConfig c;
  c.seed = static_cast<std::uint64_t>(kv.GetInt("seed", static_cast<std::int64_t>(c.seed)));
  if (overrides.seed) c.seed = *overrides.seed;
  c.work_dir = kv.GetString("paths.work_dir", c.work_dir.string());
  if (overrides.work_dir) c.work_dir = *overrides.work_dir;
  c.data_dir = kv.GetString("paths.data_dir", "data");
  if (c.data_dir.is_relative()) c.data_dir = c.work_dir / c.data_dir;

  c.window = static_cast<int>(kv.GetInt("experiment.window", c.window));
  if (overrides.window) c.window = *overrides.window;
  Check(std::find(std::begin(kWindows), std::end(kWindows), c.window) != std::end(kWindows), ErrorKind::kConfig,
        fmt::format("window must be 12, 24 or 48, got {}", c.window));
  std::string model = kv.GetString("experiment.model", std::string(models::ModelKindName(c.model)));
  if (overrides.model) model = *overrides.model;
  c.model = models::ParseModelKind(model);
  c.jobs = static_cast<int>(kv.GetInt("experiment.jobs", c.jobs));
  if (overrides.jobs) c.jobs = *overrides.jobs;
  Check(c.jobs >= 1, ErrorKind::kConfig, "jobs must be at least 1");

  // Stage seeds follow the global seed unless a file pins them; --seed wins.
  const std::string seed_text = std::to_string(c.seed);
  if (!kv.Has("synth.seed") || overrides.seed) kv.Set("synth.seed", seed_text);
  if (!kv.Has("train.seed") || overrides.seed) kv.Set("train.seed", seed_text);
  c.synth = cohort::SynthConfig::FromKeyValue(kv);

  c.min_count = kv.GetInt("embed.min_count", c.min_count);
  Check(c.min_count >= 0, ErrorKind::kConfig, "embed.min_count must be non-negative");
  auto& e = c.embed;
  const std::int64_t dim = kv.GetInt("embed.dim", static_cast<std::int64_t>(e.dim));
  Check(dim >= 1, ErrorKind::kConfig, "embed.dim must be positive");
  e.dim = static_cast<std::size_t>(dim);
  e.window = static_cast<int>(kv.GetInt("embed.window", e.window));
  e.epochs = static_cast<int>(kv.GetInt("embed.epochs", e.epochs));
  e.negatives = static_cast<int>(kv.GetInt("embed.negatives", e.negatives));
  e.learning_rate = kv.GetDouble("embed.learning_rate", e.learning_rate);
  e.subsample = kv.GetDouble("embed.subsample", e.subsample);
  e.subword = kv.GetBool("embed.subword", e.subword);
  e.min_ngram = static_cast<int>(kv.GetInt("embed.min_ngram", e.min_ngram));
  e.max_ngram = static_cast<int>(kv.GetInt("embed.max_ngram", e.max_ngram));
  e.buckets = static_cast<std::size_t>(kv.GetInt("embed.buckets", static_cast<std::int64_t>(e.buckets)));
  e.threads = static_cast<int>(kv.GetInt("embed.threads", e.threads));
  e.seed = c.seed;

  c.folds = static_cast<int>(kv.GetInt("cohort.folds", c.folds));
  Check(c.folds >= 3, ErrorKind::kConfig, "cohort.folds must be at least 3");
  if (!kv.Has("train.folds")) kv.Set("train.folds", std::to_string(c.folds));

  c.model_config = models::ModelConfig::FromKeyValue(kv);
  c.model_config.kind = c.model;
  Check(c.model_config.embedding_dim == e.dim, ErrorKind::kConfig,
        fmt::format("model.embedding_dim ({}) must equal embed.dim ({})", c.model_config.embedding_dim, e.dim));
  c.train = train::TrainConfig::FromKeyValue(kv, c.model);
  Check(c.train.folds == c.folds, ErrorKind::kConfig, "train.folds must equal cohort.folds");
  kv.RejectUnknown();
  return c;
}

// ---------------------------------------------------------------- stages

PreprocessResult Preprocess(std::span<const notes::RawNote> raw) {
  PreprocessResult r;
  r.raw_notes = raw.size();
  const notes::FilteredCorpus filtered = notes::DedupeAndFilter(raw);
  for (const auto& n : filtered.embedding) {
    auto tokens = notes::TokenizeFilter(notes::CleanText(n.text));
    if (!tokens.empty()) r.embedding_corpus.push_back(std::move(tokens));
  }
  for (const auto& n : filtered.model) {
    TokenizedNote t{n.row_id, n.subject_id, n.hadm_id, n.category, notes::ImputeChartTime(n),
                    notes::TokenizeFilter(notes::CleanText(n.text))};
    if (t.tokens.empty()) {
      ++r.empty_notes;
      continue;
    }
    r.model_notes.push_back(std::move(t));
  }
  return r;
}

std::vector<notes::CleanNote> EncodeNotes(std::span<const TokenizedNote> tokenized, const embed::Vocabulary& vocab,
                                          std::size_t note_length) {
  std::vector<notes::CleanNote> out;
  out.reserve(tokenized.size());
  for (const auto& t : tokenized) {
    const auto ids = vocab.Encode(t.tokens);
    auto padded = notes::TruncatePad<std::int32_t>(ids, note_length, notes::kPadId);
    out.push_back({t.row_id, t.subject_id, t.hadm_id, t.category, t.charted_at, std::move(padded.items),
                   std::move(padded.mask)});
  }
  return out;
}

EmbeddingModel TrainEmbeddings(std::span<const std::vector<std::string>> corpus, std::int64_t min_count,
                               const embed::SkipGramOptions& options) {
  EmbeddingModel m;
  m.vocab = embed::Vocabulary::Build(corpus, min_count);
  std::vector<std::vector<std::int32_t>> ids;
  ids.reserve(corpus.size());
  for (const auto& doc : corpus) ids.push_back(m.vocab.Encode(doc));
  auto result = embed::TrainSkipGram(ids, m.vocab, options);
  m.vectors = std::make_shared<const nd::Tensor>(std::move(result.vectors));
  m.epoch_loss = std::move(result.epoch_loss);
  return m;
}

cohort::NoteTimes CollectNoteTimes(std::span<const TokenizedNote> notes) {
  cohort::NoteTimes times;
  for (const auto& n : notes) times[n.hadm_id].push_back(n.charted_at);
  return times;
}

std::vector<models::Example> BuildExamples(std::span<const cohort::CohortEntry> entries,
                                           std::span<const notes::CleanNote> notes,
                                           const std::map<std::int64_t, cohort::RawSeries>& series, int window,
                                           const models::ModelConfig& config) {
  std::unordered_map<std::int64_t, std::vector<const notes::CleanNote*>> by_hadm;
  if (models::UsesNotes(config.kind)) {
    for (const auto& n : notes) by_hadm[n.hadm_id].push_back(&n);
  }
  std::vector<models::Example> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    models::Example x;
    x.hadm_id = e.hadm_id;
    x.subject_id = e.subject_id;
    x.label = e.label;
    if (models::UsesNotes(config.kind)) {
      std::vector<notes::CleanNote> mine;
      for (const auto* n : by_hadm[e.hadm_id]) mine.push_back(*n);
      auto file = notes::AssemblePatientFile(mine, e.intime, window, e.label);
      Check(file.has_value(), ErrorKind::kData,
            fmt::format("hadm {} has no notes within {} h of ICU admission", e.hadm_id, window));
      x.notes = std::move(file->notes);
    }
    if (models::UsesSeries(config.kind)) {
      const auto it = series.find(e.hadm_id);
      Check(it != series.end(), ErrorKind::kData, fmt::format("hadm {} has no time series", e.hadm_id));
      x.series = cohort::CtsFeatures(cohort::ImputeTimeseries(it->second, window));
      Check(x.series.dim(1) == config.cts_features, ErrorKind::kConfig,
            fmt::format("model.cts_features is {} but the series has {} channels", config.cts_features,
                        x.series.dim(1)));
    }
    out.push_back(std::move(x));
  }
  return out;
}

// ---------------------------------------------------------------- manifests

void Manifest::Save(const fs::path& path) const {
  json j = {{"stage", stage}, {"config_hash", config_hash}, {"seed", seed}, {"version", kVersion},
            {"inputs", inputs}, {"outputs", outputs}, {"info", info}};
  auto out = OpenOut(path);
  out << j.dump(2) << '\n';
}

Manifest Manifest::Load(const fs::path& path) {
  auto in = OpenIn(path);
  try {
    const json j = json::parse(in);
    Manifest m;
    m.stage = j.at("stage").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.info = j.value("info", std::map<std::string, std::string>{});
    return m;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kMissingArtifact, fmt::format("unreadable manifest {}: {}", path.string(), e.what()));
  }
}

Manifest RequireManifest(const fs::path& path, const std::string& remedy) {
  Check(fs::exists(path), ErrorKind::kMissingArtifact,
        fmt::format("missing manifest {}; {}", path.string(), remedy));
  Manifest m = Manifest::Load(path);
  for (const auto& [file, sha] : m.outputs) {
    const fs::path p = path.parent_path() / file;
    Check(fs::exists(p) && Sha256File(p) == sha, ErrorKind::kMissingArtifact,
          fmt::format("{} is missing or was modified after {} wrote it; {}", p.string(), m.stage, remedy));
  }
  for (const auto& [file, sha] : m.inputs) {
    Check(fs::exists(file) && Sha256File(file) == sha, ErrorKind::kMissingArtifact,
          fmt::format("{} changed since {} read it; the stage output is stale; {}", file, m.stage, remedy));
  }
  return m;
}

namespace {

void RecordOutputs(Manifest& m, const fs::path& dir, std::initializer_list<std::string> files) {
  for (const auto& f : files) m.outputs[f] = Sha256File(dir / f);
}

void RecordInputs(Manifest& m, std::initializer_list<fs::path> files) {
  for (const auto& f : files) m.inputs[f.string()] = Sha256File(f);
}

std::string Remedy(const char* command, const RunConfig& c) {
  return fmt::format("run `hcr {} --work-dir {}` first", command, c.work_dir.string());
}

}  // namespace

// ---------------------------------------------------------------- commands

void CmdSynth(const RunConfig& c, std::ostream& log) {
  const cohort::SynthData data = cohort::GenerateSynthetic(c.synth);
  cohort::WriteSynthetic(data, c.data_dir);
  Manifest m{"synth", ShaText(SynthCanonical(c.synth)), c.synth.seed, {}, {}, {}};
  RecordOutputs(m, c.data_dir, {"admissions.csv", "icustays.csv", "notes.csv", "timeseries.csv"});
  m.info["admissions"] = std::to_string(data.admissions.size());
  m.info["notes"] = std::to_string(data.notes.size());
  m.Save(c.data_dir / "manifest.json");
  fmt::print(log, "synth: {} admissions, {} icu stays, {} notes written to {}\n", data.admissions.size(),
             data.icustays.size(), data.notes.size(), c.data_dir.string());
}

void CmdPreprocess(const RunConfig& c, std::ostream& log) {
  const fs::path notes_csv = c.data_dir / "notes.csv";
  RequireFile(notes_csv, Remedy("synth", c) + " or place notes.csv in the data directory");
  const auto raw = notes::ReadNotesCsv(notes_csv);
  const PreprocessResult r = Preprocess(raw);
  const fs::path dir = PreprocessDir(c);
  {
    auto out = OpenOut(dir / "model_notes.jsonl");
    WriteTokenizedNotes(out, r.model_notes);
    auto corpus = OpenOut(dir / "embedding_corpus.txt");
    for (const auto& doc : r.embedding_corpus) {
      for (std::size_t i = 0; i < doc.size(); ++i) corpus << (i ? " " : "") << doc[i];
      corpus << '\n';
    }
  }
  Manifest m{"preprocess", ShaText(kVersion), c.seed, {}, {}, {}};
  RecordInputs(m, {notes_csv});
  RecordOutputs(m, dir, {"model_notes.jsonl", "embedding_corpus.txt"});
  m.info["raw_notes"] = std::to_string(r.raw_notes);
  m.info["model_notes"] = std::to_string(r.model_notes.size());
  m.info["empty_notes"] = std::to_string(r.empty_notes);
  m.Save(dir / "manifest.json");
  fmt::print(log, "preprocess: {} raw notes -> {} model notes, {} embedding documents ({} empty after filtering)\n",
             r.raw_notes, r.model_notes.size(), r.embedding_corpus.size(), r.empty_notes);
}

void CmdEmbed(const RunConfig& c, std::ostream& log) {
  const fs::path pre = PreprocessDir(c);
  RequireManifest(pre / "manifest.json", Remedy("preprocess", c));
  std::vector<std::vector<std::string>> corpus;
  {
    auto in = OpenIn(pre / "embedding_corpus.txt");
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream words(line);
      std::vector<std::string> doc;
      for (std::string w; words >> w;) doc.push_back(w);
      corpus.push_back(std::move(doc));
    }
  }
  auto in = OpenIn(pre / "model_notes.jsonl");
  const auto tokenized = ReadTokenizedNotes(in, (pre / "model_notes.jsonl").string());
  const EmbeddingModel model = TrainEmbeddings(corpus, c.min_count, c.embed);

  // Stored untruncated; the model's note length applies when training loads them.
  std::vector<notes::CleanNote> encoded;
  for (const auto& t : tokenized) {
    auto one = EncodeNotes(std::span<const TokenizedNote>(&t, 1), model.vocab, t.tokens.size());
    encoded.push_back(std::move(one.front()));
  }
  const fs::path dir = EmbedDir(c);
  fs::create_directories(dir);
  model.vocab.Save(dir / "vocab.tsv");
  embed::SaveEmbeddings(dir / "embeddings.txt", model.vocab, *model.vectors);
  {
    auto out = OpenOut(dir / "notes.jsonl");
    notes::WriteCleanNotes(out, encoded);
  }
  Manifest m{"embed", ShaText(EmbedCanonical(c)), c.seed, {}, {}, {}};
  RecordInputs(m, {pre / "embedding_corpus.txt", pre / "model_notes.jsonl"});
  RecordOutputs(m, dir, {"vocab.tsv", "embeddings.txt", "notes.jsonl"});
  m.info["vocabulary"] = std::to_string(model.vocab.size());
  if (!model.epoch_loss.empty()) m.info["final_loss"] = fmt::format("{}", model.epoch_loss.back());
  m.Save(dir / "manifest.json");
  fmt::print(log, "embed: vocabulary {} (min count > {}), dim {}, {} epochs, final loss {:.4f}\n",
             model.vocab.size(), c.min_count, c.embed.dim, c.embed.epochs,
             model.epoch_loss.empty() ? 0.0 : model.epoch_loss.back());
}

void CmdCohort(const RunConfig& c, std::ostream& log) {
  const fs::path pre = PreprocessDir(c);
  RequireManifest(pre / "manifest.json", Remedy("preprocess", c));
  const fs::path adm_csv = c.data_dir / "admissions.csv", icu_csv = c.data_dir / "icustays.csv";
  RequireFile(adm_csv, Remedy("synth", c));
  RequireFile(icu_csv, Remedy("synth", c));
  const auto admissions = cohort::ReadAdmissionsFile(adm_csv);
  const auto icustays = cohort::ReadIcuStaysFile(icu_csv);
  auto in = OpenIn(pre / "model_notes.jsonl");
  const auto tokenized = ReadTokenizedNotes(in, (pre / "model_notes.jsonl").string());
  const cohort::CohortResult selected =
      cohort::SelectCohort(admissions, icustays, CollectNoteTimes(tokenized), c.window);
  const auto splits = cohort::GroupedKFold(selected.included, c.folds, c.seed);
  std::size_t leaks = 0;
  for (const auto& s : splits) leaks += cohort::CountRoleLeaks(s, selected.included);
  Check(leaks == 0, ErrorKind::kData, fmt::format("{} subjects span fold roles", leaks));

  const fs::path dir = CohortDir(c);
  const std::string file = fmt::format("cohort_w{}.jsonl", c.window);
  {
    auto out = OpenOut(dir / file);
    WriteCohortFile(out, selected.included, splits);
  }
  Manifest m{"cohort", ShaText(fmt::format("window={};folds={};seed={}", c.window, c.folds, c.seed)), c.seed,
             {}, {}, {}};
  RecordInputs(m, {adm_csv, icu_csv, pre / "model_notes.jsonl"});
  RecordOutputs(m, dir, {file});
  std::size_t positives = 0;
  for (const auto& e : selected.included) positives += e.label;
  m.info["window"] = std::to_string(c.window);
  m.info["folds"] = std::to_string(c.folds);
  m.info["included"] = std::to_string(selected.included.size());
  m.info["positives"] = std::to_string(positives);
  for (const auto& [why, n] : selected.excluded) m.info[fmt::format("excluded.{}", cohort::ExclusionName(why))] = std::to_string(n);
  m.Save(CohortManifestPath(c));
  fmt::print(log, "cohort: W={} h, {} stays included ({} deaths, {:.1f}%), {} folds\n", c.window,
             selected.included.size(), positives,
             selected.included.empty() ? 0.0 : 100.0 * positives / selected.included.size(), c.folds);
  for (const auto& [why, n] : selected.excluded) fmt::print(log, "  excluded {}: {}\n", cohort::ExclusionName(why), n);
}

fs::path RunDir(const RunConfig& c) {
  return c.work_dir / "runs" / fmt::format("{}_w{}", models::ModelKindName(c.model), c.window);
}

void CmdTrain(const RunConfig& c, std::ostream& log) {
  const Manifest cohort_manifest = RequireManifest(CohortManifestPath(c), Remedy("cohort", c) + fmt::format(" with --window {}", c.window));
  Check(cohort_manifest.info.count("folds") && cohort_manifest.info.at("folds") == std::to_string(c.folds),
        ErrorKind::kMissingArtifact,
        fmt::format("cohort for W={} was built with a different fold count; rerun `hcr cohort`", c.window));
  const bool notes = models::UsesNotes(c.model), series = models::UsesSeries(c.model);
  Manifest m{"train", ShaText(c.model_config.Canonical() + "|" + c.train.Canonical() + "|" + std::to_string(c.window)),
             c.seed, {}, {}, {}};

  const fs::path cohort_file = CohortDir(c) / fmt::format("cohort_w{}.jsonl", c.window);
  auto cin = OpenIn(cohort_file);
  const CohortFile cf = ReadCohortFile(cin, c.folds, cohort_file.string());
  RecordInputs(m, {cohort_file});

  std::vector<notes::CleanNote> clean;
  std::shared_ptr<const nd::Tensor> table;
  if (notes) {
    RequireManifest(EmbedDir(c) / "manifest.json", Remedy("embed", c));
    const auto vocab = embed::Vocabulary::Load(EmbedDir(c) / "vocab.tsv");
    table = std::make_shared<const nd::Tensor>(embed::LoadEmbeddings(EmbedDir(c) / "embeddings.txt", vocab));
    auto nin = OpenIn(EmbedDir(c) / "notes.jsonl");
    clean = notes::ReadCleanNotes(nin, c.model_config.note_length, (EmbedDir(c) / "notes.jsonl").string());
    RecordInputs(m, {EmbedDir(c) / "embeddings.txt", EmbedDir(c) / "notes.jsonl"});
  }
  std::map<std::int64_t, cohort::RawSeries> raw_series;
  if (series) {
    const fs::path ts = c.data_dir / "timeseries.csv";
    RequireFile(ts, Remedy("synth", c));
    raw_series = cohort::ReadTimeseriesFile(ts);
    RecordInputs(m, {ts});
  }
  const auto examples = BuildExamples(cf.entries, clean, raw_series, c.window, c.model_config);
  fmt::print(log, "train: {} at W={} h on {} stays, {} folds, {} job(s)\n", models::ModelKindName(c.model), c.window,
             examples.size(), c.folds, c.jobs);

  const fs::path dir = RunDir(c);
  fs::create_directories(dir);
  auto results = train::CrossValidate(c.model_config, c.train, examples, cf.splits, table, c.jobs,
                                      [&](int fold, const train::EpochRecord& r) {
                                        fmt::print(log, "  fold {} epoch {:3d} lr {:.0e} train {:.4f} val {:.4f} val-auroc {:.4f}\n",
                                                   fold, r.epoch, r.learning_rate, r.train_loss, r.val_loss,
                                                   r.val_auroc);
                                        log.flush();
                                      });
  std::vector<train::FoldMetrics> metrics;
  {
    auto hist = OpenOut(dir / "history.jsonl");
    auto preds = OpenOut(dir / "predictions.jsonl");
    for (const auto& f : results) {
      train::WriteHistoryJsonl(hist, f.fold, f.history);
      const auto test_ids = cf.splits[f.fold].Members(cohort::Role::kTest);
      // Evaluate keeps the order of the examples it was given, which is cohort order.
      std::size_t k = 0;
      for (const auto& e : examples) {
        if (cf.splits[f.fold].roles.at(e.hadm_id) != cohort::Role::kTest) continue;
        preds << json{{"fold", f.fold}, {"hadm_id", e.hadm_id}, {"label", e.label ? 1 : 0},
                      {"score", f.test.scores[k++]}}
                     .dump()
              << '\n';
      }
      metrics.push_back({std::string(models::ModelKindName(c.model)), c.window, f.fold, f.test.auroc, f.test.auprc});
      nd::SaveCheckpoint(dir / fmt::format("fold{}.ckpt", f.fold), f.model->params(), c.model_config.Hash());
      fmt::print(log, "  fold {}: best epoch {}, test AUROC {:.4f}, AUPRC {:.4f} ({} test stays)\n", f.fold,
                 f.best_epoch, f.test.auroc, f.test.auprc, test_ids.size());
    }
    auto mout = OpenOut(dir / "fold_metrics.jsonl");
    train::WriteFoldMetricsJsonl(mout, metrics);
  }
  std::vector<std::string> outputs = {"history.jsonl", "predictions.jsonl", "fold_metrics.jsonl"};
  for (const auto& f : results) outputs.push_back(fmt::format("fold{}.ckpt", f.fold));
  for (const auto& o : outputs) m.outputs[o] = Sha256File(dir / o);
  m.info["model"] = std::string(models::ModelKindName(c.model));
  m.info["window"] = std::to_string(c.window);
  m.Save(dir / "manifest.json");
  std::vector<double> auroc;
  for (const auto& x : metrics) auroc.push_back(x.auroc);
  fmt::print(log, "train: mean test AUROC {:.4f} ± {:.4f}\n", train::Mean(auroc), train::SampleSd(auroc));
}

void CmdEvaluate(const RunConfig& c, std::ostream& out, std::ostream& log) {
  const fs::path runs = c.work_dir / "runs";
  std::vector<train::FoldMetrics> metrics;
  std::size_t found = 0;
  if (fs::exists(runs)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(runs)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      if (!fs::exists(d / "manifest.json")) continue;
      RequireManifest(d / "manifest.json", fmt::format("rerun `hcr train` for {}", d.filename().string()));
      auto in = OpenIn(d / "fold_metrics.jsonl");
      auto part = train::ReadFoldMetricsJsonl(in, (d / "fold_metrics.jsonl").string());
      metrics.insert(metrics.end(), part.begin(), part.end());
      ++found;
    }
  }
  Check(found > 0, ErrorKind::kMissingArtifact,
        fmt::format("no trained runs under {}; {}", runs.string(), Remedy("train", c)));
  const train::MetricsReport report = train::BuildReport(metrics, c.folds);
  const fs::path dir = c.work_dir / "report";
  const std::string table = train::RenderTable(report);
  {
    auto jl = OpenOut(dir / "report.jsonl");
    train::WriteReportJsonl(jl, report);
    auto txt = OpenOut(dir / "report.txt");
    txt << table;
  }
  out << table;
  fmt::print(log, "evaluate: {} runs, report written to {}\n", found, dir.string());
}

}  // namespace hcr::pipeline

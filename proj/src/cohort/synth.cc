#include "hcr/cohort/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include <fmt/format.h>

#include "hcr/common/error.h"

namespace hcr::cohort {
namespace {

using Rng = std::mt19937_64;

const std::vector<std::string> kRiskTerms = {
    "hypotension", "intubated", "pressors",   "lactate",    "unresponsive", "anuric",      "dnr",
    "comfort",     "mottled",   "agonal",     "bradycardic", "septic",      "acidosis",    "worsening",
    "declining",   "coagulopathy", "hemorrhage", "levophed", "obtunded",    "cmo"};
const std::vector<std::string> kProtectiveTerms = {
    "stable",     "ambulating", "extubated", "improving", "tolerating", "alert",      "oriented",
    "comfortable", "weaned",    "afebrile",  "eating",    "walking",    "independent", "recovering",
    "normotensive", "baseline", "cooperative", "conversant", "euvolemic", "pleasant"};
const std::vector<std::string> kFiller = {
    "patient", "pt",    "the",   "and",     "with",   "on",     "at",     "to",      "of",    "in",
    "was",     "is",    "for",   "no",      "noted",  "plan",   "continue", "given", "per",   "team",
    "family",  "skin",  "intact", "lungs",  "clear",  "bilat",  "abd",    "soft",    "bs",    "present",
    "iv",      "fluids", "ns",   "bolus",   "labs",   "sent",   "cxr",    "ordered", "resp",  "neuro",
    "cv",      "gi",    "gu",    "foley",   "draining", "urine", "output", "sedation", "pain", "control",
    "wound",   "dressing", "changed", "repositioned", "q2h", "monitor", "vs", "overnight", "am", "pm"};
const std::vector<std::string> kCategories = {"Nursing/other", "Nursing", "Radiology", "ECG", "Physician ", "Respiratory "};
const std::vector<double> kCategoryWeights = {0.4, 0.2, 0.15, 0.1, 0.1, 0.05};
const std::vector<std::string> kUnits = {"MICU", "SICU", "CCU", "CSRU", "TSICU"};

// Direction of the severity trend per variable (index into Variables()).
constexpr std::array<double, kNumVariables> kTrend = {0.3, -0.8, 0.5, -0.6, -0.6, -0.8, -0.6, 0.5, 1.0,
                                                      0.0, -0.9, -0.8, 1.0, -0.9, 0.4, 0.0, -0.8};
// Per-hour observation probability.
constexpr std::array<double, kNumVariables> kObserve = {0.05, 0.8, 0.1, 0.25, 0.25, 0.25, 0.25, 0.15, 0.85,
                                                        0.0, 0.8, 0.8, 0.8, 0.8, 0.25, 0.03, 0.08};

double U01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double Uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * U01(rng); }
bool Bernoulli(Rng& rng, double p) { return U01(rng) < p; }
double Normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  // Box-Muller on our own uniforms keeps output identical across standard libraries.
  const double u1 = 1.0 - U01(rng), u2 = U01(rng);
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}
std::size_t Pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(U01(rng) * static_cast<double>(n)); }
std::size_t PickWeighted(Rng& rng, const std::vector<double>& cumulative) {
  const double x = U01(rng) * cumulative.back();
  return std::min<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin(),
                               cumulative.size() - 1);
}
double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double Round(double v, double step) { return std::round(v / step) * step; }

std::vector<std::string> NeutralVocabulary(std::size_t n) {
  std::vector<std::string> words = kFiller;
  static const std::vector<std::string> syllables = {"ka", "lo", "ren", "mi", "sta", "vo", "tel", "pra", "din",
                                                     "qu", "zo", "fen", "ab", "ur", "sil", "nox", "te", "mar"};
  Rng fixed(20240101);
  while (words.size() < n) {
    std::string w;
    const std::size_t parts = 2 + Pick(fixed, 2);
    for (std::size_t i = 0; i < parts; ++i) w += syllables[Pick(fixed, syllables.size())];
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  }
  words.resize(n);
  return words;
}

std::string DeidSpan(Rng& rng) {
  switch (Pick(rng, 6)) {
    case 0: return fmt::format("[**Hospital1 {}**]", 1 + Pick(rng, 30));
    case 1: return fmt::format("[**Known lastname {}**]", 100 + Pick(rng, 9000));
    case 2: return fmt::format("[**2{:03}-{}-{}**]", 100 + Pick(rng, 99), 1 + Pick(rng, 12), 1 + Pick(rng, 28));
    case 3: return fmt::format("[**Pager number {}**]", 10 + Pick(rng, 90));
    case 4: return fmt::format("[**First Name3 (LF) {}**]", 1 + Pick(rng, 500));
    default: return fmt::format("[**Telephone/Fax (1) {}**]", 1000 + Pick(rng, 9000));
  }
}

std::string NumberPhrase(Rng& rng) {
  switch (Pick(rng, 5)) {
    case 0: return fmt::format("HR {}", 60 + Pick(rng, 60));
    case 1: return fmt::format("BP {}/{}", 90 + Pick(rng, 60), 50 + Pick(rng, 40));
    case 2: return fmt::format("given {} ml", 250 * (1 + Pick(rng, 8)));
    case 3: return fmt::format("{}mg", 1 + Pick(rng, 100));
    default: return fmt::format("wbc {}.{}", 3 + Pick(rng, 20), Pick(rng, 10));
  }
}

struct Latent {
  bool label = false;
  double note = 0.0;
  double ts = 0.0;
};

class Generator {
 public:
  explicit Generator(const SynthConfig& c) : c_(c), rng_(c.seed), neutral_(NeutralVocabulary(c.neutral_vocabulary)) {
    c.Validate();
    double acc = 0.0;
    for (std::size_t i = 0; i < neutral_.size(); ++i) {
      acc += 1.0 / std::pow(static_cast<double>(i) + 1.0, 0.9);
      neutral_cum_.push_back(acc);
    }
    acc = 0.0;
    for (double w : kCategoryWeights) category_cum_.push_back(acc += w);
  }

  SynthData Run() {
    for (std::size_t s = 0; s < c_.num_subjects; ++s) {
      int stays = 1;
      while (stays < c_.max_stays_per_subject && Bernoulli(rng_, c_.extra_stay_probability)) ++stays;
      for (int i = 0; i < stays; ++i) Stay(static_cast<std::int64_t>(10000 + s));
    }
    return std::move(data_);
  }

 private:
  double Ramp(double hours) const { return 0.2 + 0.8 * std::clamp(hours / c_.signal_ramp_hours, 0.0, 1.0); }

  void Stay(std::int64_t subject) {
    const std::int64_t index = static_cast<std::int64_t>(data_.admissions.size());
    Admission a;
    a.hadm_id = 100000 + index;
    a.subject_id = subject;
    const bool minor = Bernoulli(rng_, c_.minor_fraction);
    a.age = minor ? (Bernoulli(rng_, 0.2) ? 18.0 : Round(Uniform(rng_, 1.0, 18.0), 0.01))
                  : Round(std::clamp(Normal(rng_, 65.0, 15.0), 18.01, 95.0), 0.01);
    const double start_days = std::floor(Uniform(rng_, 0.0, 36500.0));
    a.admit_time = Timestamp(Timestamp::FromCivil({2100, 1, 1}).seconds() +
                             static_cast<std::int64_t>(start_days * 86400 + Uniform(rng_, 0, 86400)));

    IcuStay icu;
    icu.hadm_id = a.hadm_id;
    icu.icustay_id = 200000 + index * 2;
    icu.intime = Timestamp(a.admit_time.seconds() + static_cast<std::int64_t>(Uniform(rng_, 0.0, 24.0) * 3600));
    const double icu_hours = Uniform(rng_, 60.0, 288.0);
    icu.outtime = icu.intime.PlusHours(icu_hours);
    a.discharge_time = icu.outtime.PlusHours(Uniform(rng_, 12.0, 120.0));
    const bool transfer = Bernoulli(rng_, c_.transfer_fraction);
    const std::size_t unit = Pick(rng_, kUnits.size());
    icu.careunits = {kUnits[unit]};
    if (transfer) icu.careunits.push_back(kUnits[(unit + 1 + Pick(rng_, kUnits.size() - 1)) % kUnits.size()]);

    Latent z;
    z.label = Bernoulli(rng_, c_.prevalence);
    z.note = Normal(rng_, z.label ? c_.note_signal : 0.0);
    z.ts = Normal(rng_, z.label ? c_.ts_signal : 0.0);
    const bool early_death = Bernoulli(rng_, c_.early_death_fraction);
    if (early_death) {
      a.death_time = icu.intime.PlusHours(Uniform(rng_, 1.0, 71.9));
    } else if (z.label) {
      a.death_time = icu.intime.PlusHours(Uniform(rng_, 73.0, std::max(74.0, icu_hours + 100.0)));
    }
    if (a.death_time) {
      a.discharge_time = *a.death_time;
      if (icu.outtime > *a.death_time) icu.outtime = *a.death_time;
    } else if (Bernoulli(rng_, c_.post_discharge_death_fraction)) {
      a.death_time = a.discharge_time.PlusHours(Uniform(rng_, 24.0, 24.0 * 400));
    }
    data_.icustays.push_back(icu);
    if (Bernoulli(rng_, c_.multi_icu_fraction)) {
      IcuStay second = icu;
      second.icustay_id = icu.icustay_id + 1;
      second.intime = icu.outtime.PlusHours(6.0);
      second.outtime = second.intime.PlusHours(30.0);
      second.careunits = {icu.careunits.front()};
      if (second.outtime >= a.discharge_time) {
        a.discharge_time = second.outtime.PlusHours(12.0);
        if (a.death_time && z.label) a.death_time = a.discharge_time;
      }
      data_.icustays.push_back(second);
    }
    data_.admissions.push_back(a);
    Notes(a, icu, z);
    Series(a, icu, z);
  }

  std::string NoteText(double hours, const Latent& z, bool flip) {
    const double rate = c_.token_signal_rate * Ramp(hours);
    const double shift = c_.note_signal / 2.0;
    const double p_risk = Sigmoid(1.5 * ((flip ? -1.0 : 1.0) * (z.note - shift)));
    const int words = c_.min_note_words + static_cast<int>(Pick(rng_, c_.max_note_words - c_.min_note_words + 1));
    std::string text;
    bool sentence_start = true;
    for (int i = 0; i < words; ++i) {
      std::string w;
      const double r = U01(rng_);
      if (r < rate) {
        w = Bernoulli(rng_, p_risk) ? kRiskTerms[Pick(rng_, kRiskTerms.size())]
                                    : kProtectiveTerms[Pick(rng_, kProtectiveTerms.size())];
      } else if (r < rate + 0.03) {
        w = DeidSpan(rng_);
      } else if (r < rate + 0.06) {
        w = NumberPhrase(rng_);
      } else {
        w = neutral_[PickWeighted(rng_, neutral_cum_)];
      }
      if (sentence_start && !w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 32);
      sentence_start = false;
      if (!text.empty()) text += Bernoulli(rng_, 0.05) ? "\n" : " ";
      text += w;
      if (Bernoulli(rng_, 0.1)) {
        text += Bernoulli(rng_, 0.7) ? "." : ",";
        sentence_start = text.back() == '.';
      }
    }
    return text;
  }

  void AddNote(const Admission& a, Timestamp at, std::string category, std::string text, bool keep_time,
               bool is_error) {
    notes::RawNote n;
    n.row_id = next_row_++;
    n.subject_id = a.subject_id;
    n.hadm_id = a.hadm_id;
    n.category = std::move(category);
    n.chart_date = at.date();
    if (keep_time) n.chart_time = at.seconds_of_day();
    n.is_error = is_error;
    n.text = std::move(text);
    data_.notes.push_back(n);
    if (!is_error && Bernoulli(rng_, c_.duplicate_note_rate)) {
      n.row_id = next_row_++;
      data_.notes.push_back(std::move(n));
    }
  }

  void Notes(const Admission& a, const IcuStay& icu, const Latent& z) {
    std::vector<double> times;
    for (std::size_t i = Pick(rng_, 3); i > 0; --i) times.push_back(-Uniform(rng_, 0.5, 24.0));
    double t = Bernoulli(rng_, 0.9) ? Uniform(rng_, 0.0, 10.0) : Uniform(rng_, 10.0, 30.0);
    const double stop = std::min(96.0, a.discharge_time.HoursSince(icu.intime));
    while (t < stop) {
      times.push_back(t);
      t += -std::log(1.0 - U01(rng_)) / c_.note_rate_per_hour;
    }
    for (double h : times) {
      const Timestamp at = icu.intime.PlusHours(h);
      const bool error = Bernoulli(rng_, c_.error_note_rate);
      AddNote(a, at, kCategories[PickWeighted(rng_, category_cum_)], NoteText(h, z, error),
              !Bernoulli(rng_, c_.missing_charttime_rate), error);
    }
    const bool died = LabelMortality(a);
    AddNote(a, a.discharge_time, "Discharge summary",
            std::string(died ? "Patient expired. " : "Discharged home in good condition. ") +
                NoteText(c_.signal_ramp_hours, z, false),
            false, false);
  }

  void Series(const Admission& a, const IcuStay& icu, const Latent& z) {
    RawSeries s;
    s.hadm_id = a.hadm_id;
    std::array<double, kNumVariables> offset{};
    for (double& o : offset) o = Normal(rng_, 0.0, 0.5);
    const double end = std::min(c_.series_hours, a.discharge_time.HoursSince(icu.intime));
    for (int h = 0; h < static_cast<int>(end); ++h) {
      std::array<std::optional<double>, kNumVariables> row;
      bool any = false;
      for (std::size_t f = 0; f < kNumVariables; ++f) {
        double p = kObserve[f];
        if (h == 0 && (f == 8 || f == 9 || f == 15)) p = f == 8 ? 1.0 : 0.4;
        if (!Bernoulli(rng_, p)) continue;
        const auto& spec = Variables()[f];
        const double drift = kTrend[f] * z.ts * 0.8 * Ramp(h);
        double v = spec.normal + spec.scale * (offset[f] + Normal(rng_, 0.0, 0.5) + drift);
        switch (f) {
          case 0: v = v > 0.5 ? 1.0 : 0.0; break;
          case 2: v = Round(std::clamp(v, 0.21, 1.0), 0.01); break;
          case 3: v = std::clamp(std::round(v), 1.0, 4.0); break;
          case 4: v = std::clamp(std::round(v), 1.0, 6.0); break;
          case 5: v = std::clamp(std::round(v), 3.0, 15.0); break;
          case 6: v = std::clamp(std::round(v), 1.0, 5.0); break;
          case 11: v = Round(std::min(v, 100.0), 0.1); break;
          case 16: v = Round(v, 0.01); break;
          default: v = Round(v, 0.1); break;
        }
        row[f] = v;
        any = true;
      }
      if (!any) continue;
      s.hours.push_back(h + Round(Uniform(rng_, 0.0, 0.99), 0.01));
      s.values.push_back(row);
    }
    data_.series.push_back(std::move(s));
  }

  SynthConfig c_;
  Rng rng_;
  std::vector<std::string> neutral_;
  std::vector<double> neutral_cum_;
  std::vector<double> category_cum_;
  std::int64_t next_row_ = 1;
  SynthData data_;
};

}  // namespace

void SynthConfig::Validate() const {
  Check(prevalence > 0 && prevalence < 1, ErrorKind::kConfig,
        fmt::format("synth.prevalence must lie in (0, 1), got {}", prevalence));
  Check(min_note_words >= 1 && max_note_words >= min_note_words, ErrorKind::kConfig,
        "synth.min_note_words and synth.max_note_words must satisfy 1 <= min <= max");
  Check(num_subjects >= 1, ErrorKind::kConfig, "synth.num_subjects must be at least 1");
  Check(max_stays_per_subject >= 1, ErrorKind::kConfig, "synth.max_stays_per_subject must be at least 1");
  Check(series_hours >= 1, ErrorKind::kConfig, "synth.series_hours must be at least 1");
  Check(signal_ramp_hours > 0, ErrorKind::kConfig, "synth.signal_ramp_hours must be positive");
  Check(note_rate_per_hour > 0, ErrorKind::kConfig, "synth.note_rate_per_hour must be positive");
  Check(neutral_vocabulary >= 1, ErrorKind::kConfig, "synth.neutral_vocabulary must be at least 1");
  for (double p : {extra_stay_probability, minor_fraction, multi_icu_fraction, transfer_fraction,
                   early_death_fraction, post_discharge_death_fraction, error_note_rate, duplicate_note_rate,
                   missing_charttime_rate, token_signal_rate}) {
    Check(p >= 0 && p <= 1, ErrorKind::kConfig, "synth rates and fractions must lie in [0, 1]");
  }
}

SynthConfig SynthConfig::FromKeyValue(KeyValueConfig& kv) {
  SynthConfig c;
  c.num_subjects = static_cast<std::size_t>(kv.GetInt("synth.num_subjects", static_cast<std::int64_t>(c.num_subjects)));
  c.extra_stay_probability = kv.GetDouble("synth.extra_stay_probability", c.extra_stay_probability);
  c.max_stays_per_subject = static_cast<int>(kv.GetInt("synth.max_stays_per_subject", c.max_stays_per_subject));
  c.prevalence = kv.GetDouble("synth.prevalence", c.prevalence);
  c.note_signal = kv.GetDouble("synth.note_signal", c.note_signal);
  c.ts_signal = kv.GetDouble("synth.ts_signal", c.ts_signal);
  c.token_signal_rate = kv.GetDouble("synth.token_signal_rate", c.token_signal_rate);
  c.signal_ramp_hours = kv.GetDouble("synth.signal_ramp_hours", c.signal_ramp_hours);
  c.note_rate_per_hour = kv.GetDouble("synth.note_rate_per_hour", c.note_rate_per_hour);
  c.min_note_words = static_cast<int>(kv.GetInt("synth.min_note_words", c.min_note_words));
  c.max_note_words = static_cast<int>(kv.GetInt("synth.max_note_words", c.max_note_words));
  c.neutral_vocabulary = static_cast<std::size_t>(kv.GetInt("synth.neutral_vocabulary", static_cast<std::int64_t>(c.neutral_vocabulary)));
  c.series_hours = kv.GetDouble("synth.series_hours", c.series_hours);
  c.minor_fraction = kv.GetDouble("synth.minor_fraction", c.minor_fraction);
  c.multi_icu_fraction = kv.GetDouble("synth.multi_icu_fraction", c.multi_icu_fraction);
  c.transfer_fraction = kv.GetDouble("synth.transfer_fraction", c.transfer_fraction);
  c.early_death_fraction = kv.GetDouble("synth.early_death_fraction", c.early_death_fraction);
  c.post_discharge_death_fraction = kv.GetDouble("synth.post_discharge_death_fraction", c.post_discharge_death_fraction);
  c.error_note_rate = kv.GetDouble("synth.error_note_rate", c.error_note_rate);
  c.duplicate_note_rate = kv.GetDouble("synth.duplicate_note_rate", c.duplicate_note_rate);
  c.missing_charttime_rate = kv.GetDouble("synth.missing_charttime_rate", c.missing_charttime_rate);
  c.seed = static_cast<std::uint64_t>(kv.GetInt("synth.seed", static_cast<std::int64_t>(c.seed)));
  c.Validate();
  return c;
}

SynthData GenerateSynthetic(const SynthConfig& config) { return Generator(config).Run(); }

void WriteSynthetic(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    Check(out.good(), ErrorKind::kData, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("admissions.csv");
    WriteAdmissions(out, data.admissions);
  }
  {
    auto out = open("icustays.csv");
    WriteIcuStays(out, data.icustays);
  }
  {
    auto out = open("notes.csv");
    notes::WriteNotesCsv(out, data.notes);
  }
  {
    auto out = open("timeseries.csv");
    WriteTimeseries(out, data.series);
  }
}

}  // namespace hcr::cohort

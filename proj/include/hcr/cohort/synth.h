#ifndef HCR_COHORT_SYNTH_H_
#define HCR_COHORT_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hcr/cohort/cohort.h"
#include "hcr/common/kvconfig.h"
#include "hcr/notes/notes.h"

namespace hcr::cohort {

// Synthetic hospital data in the ingestion formats. Each stay carries two
// latent severities, one expressed in note wording and one in vital-sign
// trends; given the label they are independent, so the two modalities hold
// complementary evidence. Both signals strengthen with hours since ICU
// admission, so longer windows see more of them.
struct SynthConfig {
  std::size_t num_subjects = 1000;
  double extra_stay_probability = 0.15;  // geometric number of further stays
  int max_stays_per_subject = 3;
  double prevalence = 0.1;

  double note_signal = 1.5;  // class separation of the note latent (0 = none)
  double ts_signal = 1.0;    // class separation of the vital-sign latent
  double token_signal_rate = 0.12;  // share of outcome-related words late in a stay
  double signal_ramp_hours = 48.0;
  double note_rate_per_hour = 0.2;
  int min_note_words = 18;
  int max_note_words = 40;
  std::size_t neutral_vocabulary = 400;
  double series_hours = 72.0;

  double minor_fraction = 0.02;
  double multi_icu_fraction = 0.02;
  double transfer_fraction = 0.03;
  double early_death_fraction = 0.02;
  double post_discharge_death_fraction = 0.03;
  double error_note_rate = 0.02;
  double duplicate_note_rate = 0.03;
  double missing_charttime_rate = 0.1;

  std::uint64_t seed = 1;

  // Reads "synth.*" keys, leaving others untouched.
  static SynthConfig FromKeyValue(KeyValueConfig& kv);
  // Config errors name the offending key.
  void Validate() const;
};

struct SynthData {
  std::vector<Admission> admissions;
  std::vector<IcuStay> icustays;
  std::vector<notes::RawNote> notes;
  std::vector<RawSeries> series;
};

SynthData GenerateSynthetic(const SynthConfig& config);

// admissions.csv, icustays.csv, notes.csv, timeseries.csv
void WriteSynthetic(const SynthData& data, const std::filesystem::path& dir);

}  // namespace hcr::cohort

#endif  // HCR_COHORT_SYNTH_H_

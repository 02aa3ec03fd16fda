#ifndef HCR_EMBED_EMBED_H_
#define HCR_EMBED_EMBED_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hcr/nd/tensor.h"
#include "hcr/notes/notes.h"

namespace hcr::embed {

inline constexpr std::int32_t kOovId = -1;
inline constexpr std::string_view kPadToken = "<pad>";

// Token ids are contiguous from 0; id 0 is PAD. Remaining ids follow
// descending corpus frequency, ties broken lexicographically.
class Vocabulary {
 public:
  // Keeps tokens occurring more than min_count times.
  static Vocabulary Build(std::span<const std::vector<std::string>> corpus, std::int64_t min_count);

  std::size_t size() const { return tokens_.size(); }
  std::int32_t Id(std::string_view token) const;  // kOovId when absent
  const std::string& Token(std::int32_t id) const { return tokens_.at(id); }
  std::int64_t Frequency(std::int32_t id) const { return counts_.at(id); }

  std::vector<std::int32_t> Encode(std::span<const std::string> tokens) const;

  // vocab.tsv: "token<TAB>count" per id, PAD first.
  void Write(std::ostream& out) const;
  static Vocabulary Read(std::istream& in, const std::string& source = "<stream>");
  void Save(const std::filesystem::path& path) const;
  static Vocabulary Load(const std::filesystem::path& path);

 private:
  void Append(std::string token, std::int64_t count);

  std::vector<std::string> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct SkipGramOptions {
  std::size_t dim = 200;
  int window = 6;
  int epochs = 100;
  int negatives = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  // Frequent-word subsampling threshold; 0 disables.
  double subsample = 0.0;
  // Character n-gram vectors hashed into buckets, combined with the word vector.
  bool subword = false;
  int min_ngram = 3;
  int max_ngram = 6;
  std::size_t buckets = 200000;
  // More than one worker trades reproducibility for speed.
  int threads = 1;
};

struct SkipGramResult {
  nd::Tensor vectors;               // [V, dim], PAD row zero
  std::vector<double> epoch_loss;   // mean loss per training pair
};

// Corpus entries are token ids from the vocabulary; PAD and OOV ids are
// skipped before windowing.
SkipGramResult TrainSkipGram(std::span<const std::vector<std::int32_t>> corpus, const Vocabulary& vocab,
                             const SkipGramOptions& options);

// -log sig(u_ctx . v) - sum_k log sig(-u_k . v) and its gradients.
struct PairLoss {
  double loss = 0.0;
  std::vector<double> d_center;
  std::vector<double> d_context;
  std::vector<std::vector<double>> d_negatives;
};
PairLoss SgnsPairLoss(std::span<const double> center, std::span<const double> context,
                      std::span<const std::vector<double>> negatives);

// Bucket ids of the "<token>" character n-grams, lengths min_n..max_n.
std::vector<std::size_t> NgramBuckets(std::string_view token, int min_n, int max_n, std::size_t buckets);

// Text format: "|V| d" then "token v_1 ... v_d" per row.
void WriteEmbeddings(std::ostream& out, const Vocabulary& vocab, const nd::Tensor& vectors);
nd::Tensor ReadEmbeddings(std::istream& in, const Vocabulary& vocab, const std::string& source = "<stream>");
void SaveEmbeddings(const std::filesystem::path& path, const Vocabulary& vocab, const nd::Tensor& vectors);
nd::Tensor LoadEmbeddings(const std::filesystem::path& path, const Vocabulary& vocab);

// [L, d] rows looked up per token; PAD and OOV rows are zero.
nd::Tensor EmbedNote(std::span<const std::int32_t> tokens, const nd::Tensor& vectors);
inline nd::Tensor EmbedNote(const notes::CleanNote& note, const nd::Tensor& vectors) {
  return EmbedNote(note.tokens, vectors);
}

}  // namespace hcr::embed

#endif  // HCR_EMBED_EMBED_H_

#include "hcr/embed/embed.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "hcr/common/error.h"

namespace hcr::embed {
namespace {

double Uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double LogSigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Element access that is either plain or relaxed-atomic for lock-free workers.
template <bool kShared>
struct Access {
  static double Load(double& x) {
    if constexpr (kShared) return std::atomic_ref<double>(x).load(std::memory_order_relaxed);
    return x;
  }
  static void Add(double& x, double delta) {
    if constexpr (kShared) {
      std::atomic_ref<double> r(x);
      r.store(r.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
    } else {
      x += delta;
    }
  }
};

std::uint32_t Fnv1a(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<std::uint32_t>(static_cast<std::int8_t>(c));
    h *= 16777619u;
  }
  return h;
}

class Trainer {
 public:
  Trainer(std::span<const std::vector<std::int32_t>> corpus, const Vocabulary& vocab, const SkipGramOptions& o)
      : vocab_(vocab), o_(o), d_(o.dim) {
    Check(o.negatives >= 1, ErrorKind::kConfig, "skip-gram needs at least one negative sample");
    Check(o.window >= 1, ErrorKind::kConfig, "skip-gram window must be at least 1");
    Check(o.dim >= 1 && o.epochs >= 0 && o.threads >= 1, ErrorKind::kConfig, "bad skip-gram options");
    Check(o.learning_rate > 0, ErrorKind::kConfig, "skip-gram learning rate must be positive");
    const std::int32_t v = static_cast<std::int32_t>(vocab.size());
    for (const auto& note : corpus) {
      std::vector<std::int32_t> s;
      for (std::int32_t id : note) {
        Check(id < v, ErrorKind::kData, fmt::format("token id {} outside vocabulary of {}", id, v));
        if (id > 0) s.push_back(id);
      }
      if (!s.empty()) {
        total_tokens_ += s.size();
        sentences_.push_back(std::move(s));
      }
    }
    BuildNegativeTable();
    BuildComponents();
    std::mt19937_64 init(o.seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> u(-0.5 / d_, 0.5 / d_);
    input_.assign(num_components_ * d_, 0.0);
    for (std::size_t r = 0; r < num_components_; ++r) {
      if (r == 0) continue;  // PAD word row
      for (std::size_t j = 0; j < d_; ++j) input_[r * d_ + j] = u(init);
    }
    output_.assign(vocab.size() * d_, 0.0);
  }

  SkipGramResult Run() {
    SkipGramResult result;
    const double total = static_cast<double>(total_tokens_) * o_.epochs;
    for (int epoch = 0; epoch < o_.epochs; ++epoch) {
      double loss = 0.0;
      std::uint64_t pairs = 0;
      if (o_.threads == 1) {
        if (rngs_.empty()) rngs_.emplace_back(o_.seed);
        RunRange<false>(0, sentences_.size(), rngs_[0], total, loss, pairs);
      } else {
        if (rngs_.empty()) {
          for (int t = 0; t < o_.threads; ++t) rngs_.emplace_back(o_.seed + 0x100000001b3ull * t);
        }
        std::vector<double> losses(o_.threads, 0.0);
        std::vector<std::uint64_t> counts(o_.threads, 0);
        std::vector<std::jthread> workers;
        const std::size_t n = sentences_.size();
        for (int t = 0; t < o_.threads; ++t) {
          workers.emplace_back([&, t] {
            RunRange<true>(n * t / o_.threads, n * (t + 1) / o_.threads, rngs_[t], total, losses[t], counts[t]);
          });
        }
        workers.clear();
        for (int t = 0; t < o_.threads; ++t) {
          loss += losses[t];
          pairs += counts[t];
        }
      }
      result.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
      for (std::size_t j = 0; j < d_; ++j) {
        Check(input_[j] == 0.0 && output_[j] == 0.0, ErrorKind::kContract, "PAD embedding row was updated");
      }
    }
    result.vectors = nd::Tensor(nd::Shape{vocab_.size(), d_});
    std::vector<double> v(d_);
    for (std::size_t w = 1; w < vocab_.size(); ++w) {
      Compose(static_cast<std::int32_t>(w), v);
      std::copy(v.begin(), v.end(), result.vectors.raw() + w * d_);
    }
    return result;
  }

 private:
  void BuildNegativeTable() {
    cumulative_.assign(vocab_.size(), 0.0);
    double acc = 0.0;
    for (std::size_t w = 0; w < vocab_.size(); ++w) {
      acc += std::pow(static_cast<double>(vocab_.Frequency(static_cast<std::int32_t>(w))), 0.75);
      cumulative_[w] = acc;
    }
  }

  std::int32_t DrawNegative(std::mt19937_64& rng) const {
    const double target = Uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) --it;
    return static_cast<std::int32_t>(it - cumulative_.begin());
  }

  // Rows of input_: one per word, then one per n-gram bucket in use.
  void BuildComponents() {
    components_.assign(vocab_.size(), {});
    num_components_ = vocab_.size();
    std::map<std::size_t, std::size_t> compact;
    for (std::size_t w = 0; w < vocab_.size(); ++w) {
      components_[w].push_back(w);
      if (!o_.subword || w == 0) continue;
      for (std::size_t b : NgramBuckets(vocab_.Token(static_cast<std::int32_t>(w)), o_.min_ngram, o_.max_ngram,
                                        o_.buckets)) {
        auto [it, inserted] = compact.emplace(b, num_components_);
        if (inserted) ++num_components_;
        components_[w].push_back(it->second);
      }
    }
  }

  void Compose(std::int32_t w, std::vector<double>& v) const {
    std::fill(v.begin(), v.end(), 0.0);
    const auto& parts = components_[w];
    for (std::size_t r : parts) {
      for (std::size_t j = 0; j < d_; ++j) v[j] += input_[r * d_ + j];
    }
    if (parts.size() > 1) {
      for (double& x : v) x /= static_cast<double>(parts.size());
    }
  }

  template <bool kShared>
  void RunRange(std::size_t begin, std::size_t end, std::mt19937_64& rng, double total, double& loss,
                std::uint64_t& pairs) {
    using A = Access<kShared>;
    std::vector<double> v(d_), grad(d_);
    std::vector<std::int32_t> kept;
    std::uniform_int_distribution<int> radius(1, o_.window);
    for (std::size_t s = begin; s < end; ++s) {
      const auto& sentence = sentences_[s];
      kept.clear();
      for (std::int32_t w : sentence) {
        if (o_.subsample > 0) {
          const double f = static_cast<double>(vocab_.Frequency(w)) / static_cast<double>(total_tokens_);
          const double keep = (std::sqrt(f / o_.subsample) + 1.0) * o_.subsample / f;
          if (keep < Uniform01(rng)) continue;
        }
        kept.push_back(w);
      }
      const double processed = static_cast<double>(processed_.fetch_add(sentence.size()));
      const double lr = o_.learning_rate * std::max(1.0 - processed / std::max(total, 1.0), 1e-4);
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::int32_t center = kept[i];
        const auto& parts = components_[center];
        const double share = 1.0 / static_cast<double>(parts.size());
        const int b = radius(rng);
        const std::size_t lo = i >= static_cast<std::size_t>(b) ? i - b : 0;
        const std::size_t hi = std::min(kept.size() - 1, i + b);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == i) continue;
          std::fill(v.begin(), v.end(), 0.0);
          for (std::size_t r : parts) {
            for (std::size_t j = 0; j < d_; ++j) v[j] += A::Load(input_[r * d_ + j]);
          }
          for (double& x : v) x *= share;
          std::fill(grad.begin(), grad.end(), 0.0);
          for (int k = 0; k <= o_.negatives; ++k) {
            std::int32_t target;
            double label;
            if (k == 0) {
              target = kept[c];
              label = 1.0;
            } else {
              target = DrawNegative(rng);
              if (target == kept[c]) continue;
              label = 0.0;
            }
            double* u = output_.data() + static_cast<std::size_t>(target) * d_;
            double dot = 0.0;
            for (std::size_t j = 0; j < d_; ++j) dot += A::Load(u[j]) * v[j];
            loss -= label > 0 ? LogSigmoid(dot) : LogSigmoid(-dot);
            const double g = lr * (label - Sigmoid(dot));
            for (std::size_t j = 0; j < d_; ++j) {
              grad[j] += g * A::Load(u[j]);
              A::Add(u[j], g * v[j]);
            }
          }
          ++pairs;
          for (std::size_t r : parts) {
            for (std::size_t j = 0; j < d_; ++j) A::Add(input_[r * d_ + j], grad[j] * share);
          }
        }
      }
    }
  }

  const Vocabulary& vocab_;
  SkipGramOptions o_;
  std::size_t d_;
  std::vector<std::vector<std::int32_t>> sentences_;
  std::size_t total_tokens_ = 0;
  std::vector<double> cumulative_;
  std::vector<std::vector<std::size_t>> components_;
  std::size_t num_components_ = 0;
  std::vector<double> input_;
  std::vector<double> output_;
  std::vector<std::mt19937_64> rngs_;
  std::atomic<std::uint64_t> processed_{0};
};

}  // namespace

void Vocabulary::Append(std::string token, std::int64_t count) {
  Check(!ids_.contains(token), ErrorKind::kData, "duplicate vocabulary token '" + token + "'");
  ids_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::Build(std::span<const std::vector<std::string>> corpus, std::int64_t min_count) {
  std::unordered_map<std::string, std::int64_t> counts;
  std::size_t total = 0;
  for (const auto& note : corpus) {
    for (const auto& t : note) ++counts[t];
    total += note.size();
  }
  Check(total > 0, ErrorKind::kData, "cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [token, n] : counts) {
    if (n > min_count) kept.emplace_back(token, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  v.Append(std::string(kPadToken), 0);
  for (auto& [token, n] : kept) v.Append(std::move(token), n);
  return v;
}

std::int32_t Vocabulary::Id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() || it->second == 0 ? kOovId : it->second;
}

std::vector<std::int32_t> Vocabulary::Encode(std::span<const std::string> tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(Id(t));
  return ids;
}

void Vocabulary::Write(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::Read(std::istream& in, const std::string& source) {
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t tab = line.find('\t');
    Check(tab != std::string::npos, ErrorKind::kData, fmt::format("{}:{}: expected token<TAB>count", source, line_no));
    std::int64_t count = 0;
    try {
      count = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      Fail(ErrorKind::kData, fmt::format("{}:{}: bad count", source, line_no));
    }
    v.Append(line.substr(0, tab), count);
  }
  Check(!v.tokens_.empty() && v.tokens_[0] == kPadToken, ErrorKind::kData, source + ": first entry must be PAD");
  return v;
}

void Vocabulary::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  Check(out.good(), ErrorKind::kData, "cannot write " + path.string());
  Write(out);
}

Vocabulary Vocabulary::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorKind::kMissingArtifact, "cannot open " + path.string());
  return Read(in, path.string());
}

SkipGramResult TrainSkipGram(std::span<const std::vector<std::int32_t>> corpus, const Vocabulary& vocab,
                             const SkipGramOptions& options) {
  Trainer trainer(corpus, vocab, options);
  return trainer.Run();
}

PairLoss SgnsPairLoss(std::span<const double> center, std::span<const double> context,
                      std::span<const std::vector<double>> negatives) {
  const std::size_t d = center.size();
  Check(context.size() == d, ErrorKind::kContract, "SgnsPairLoss: dimension mismatch");
  PairLoss out;
  out.d_center.assign(d, 0.0);
  out.d_context.assign(d, 0.0);
  auto dot = [&](std::span<const double> u) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += u[j] * center[j];
    return s;
  };
  const double pos = dot(context);
  out.loss = -LogSigmoid(pos);
  const double gp = Sigmoid(pos) - 1.0;
  for (std::size_t j = 0; j < d; ++j) {
    out.d_center[j] += gp * context[j];
    out.d_context[j] = gp * center[j];
  }
  for (const auto& u : negatives) {
    Check(u.size() == d, ErrorKind::kContract, "SgnsPairLoss: dimension mismatch");
    const double s = dot(u);
    out.loss -= LogSigmoid(-s);
    const double gn = Sigmoid(s);
    std::vector<double> du(d);
    for (std::size_t j = 0; j < d; ++j) {
      out.d_center[j] += gn * u[j];
      du[j] = gn * center[j];
    }
    out.d_negatives.push_back(std::move(du));
  }
  return out;
}

std::vector<std::size_t> NgramBuckets(std::string_view token, int min_n, int max_n, std::size_t buckets) {
  const std::string wrapped = "<" + std::string(token) + ">";
  std::vector<std::size_t> out;
  for (int n = min_n; n <= max_n; ++n) {
    if (static_cast<std::size_t>(n) > wrapped.size()) break;
    for (std::size_t i = 0; i + n <= wrapped.size(); ++i) {
      const std::string_view g(wrapped.data() + i, n);
      if (g == wrapped) continue;  // the whole word has its own vector
      out.push_back(Fnv1a(g) % buckets);
    }
  }
  return out;
}

void WriteEmbeddings(std::ostream& out, const Vocabulary& vocab, const nd::Tensor& vectors) {
  Check(vectors.rank() == 2 && vectors.dim(0) == vocab.size(), ErrorKind::kContract,
        "embedding rows must match the vocabulary");
  const std::size_t d = vectors.dim(1);
  out << vocab.size() << ' ' << d << '\n';
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    out << vocab.Token(static_cast<std::int32_t>(w));
    for (std::size_t j = 0; j < d; ++j) out << ' ' << fmt::format("{}", vectors.at(w, j));
    out << '\n';
  }
}

nd::Tensor ReadEmbeddings(std::istream& in, const Vocabulary& vocab, const std::string& source) {
  std::size_t rows = 0, d = 0;
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  Check(static_cast<bool>(hs >> rows >> d) && d > 0, ErrorKind::kData, source + ": bad header");
  Check(rows == vocab.size(), ErrorKind::kData,
        fmt::format("{}: {} rows but vocabulary has {}", source, rows, vocab.size()));
  nd::Tensor t(nd::Shape{rows, d});
  std::string line;
  for (std::size_t w = 0; w < rows; ++w) {
    Check(static_cast<bool>(std::getline(in, line)), ErrorKind::kData, source + ": truncated file");
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    Check(token == vocab.Token(static_cast<std::int32_t>(w)), ErrorKind::kData,
          fmt::format("{}: row {} is '{}', expected '{}'", source, w, token, vocab.Token(static_cast<std::int32_t>(w))));
    for (std::size_t j = 0; j < d; ++j) {
      std::string cell;
      Check(static_cast<bool>(ls >> cell), ErrorKind::kData, fmt::format("{}: row {} has too few values", source, w));
      try {
        t.at(w, j) = std::stod(cell);
      } catch (const std::exception&) {
        Fail(ErrorKind::kData, fmt::format("{}: row {} has a bad value", source, w));
      }
    }
    std::string extra;
    Check(!(ls >> extra), ErrorKind::kData, fmt::format("{}: row {} has too many values", source, w));
  }
  for (std::size_t j = 0; j < d; ++j) Check(t.at(0, j) == 0.0, ErrorKind::kData, source + ": PAD row is not zero");
  return t;
}

void SaveEmbeddings(const std::filesystem::path& path, const Vocabulary& vocab, const nd::Tensor& vectors) {
  std::ofstream out(path, std::ios::binary);
  Check(out.good(), ErrorKind::kData, "cannot write " + path.string());
  WriteEmbeddings(out, vocab, vectors);
}

nd::Tensor LoadEmbeddings(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorKind::kMissingArtifact, "cannot open " + path.string());
  return ReadEmbeddings(in, vocab, path.string());
}

nd::Tensor EmbedNote(std::span<const std::int32_t> tokens, const nd::Tensor& vectors) {
  const std::size_t v = vectors.dim(0), d = vectors.dim(1);
  nd::Tensor out(nd::Shape{tokens.size(), d});
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::int32_t id = tokens[t];
    if (id <= 0) continue;
    Check(static_cast<std::size_t>(id) < v, ErrorKind::kData,
          fmt::format("token id {} outside embedding table of {} rows", id, v));
    std::copy_n(vectors.raw() + static_cast<std::size_t>(id) * d, d, out.raw() + t * d);
  }
  return out;
}

}  // namespace hcr::embed

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nmdps {

// Lowercases ASCII, splits on whitespace and punctuation, maps URLs to
// "<url>" and @-mentions to "<mention>", and emits each CJK character as its
// own token. Total and deterministic; never yields an empty token.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  Vocabulary();
  // Tokens seen at least min_count times get their own id; ids are assigned
  // by descending frequency, then lexicographically.
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs,
                          std::size_t min_count);
  // Rebuilds from an id-ordered token list (ids 0 and 1 must be the specials).
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                std::vector<std::uint64_t> counts);

  std::int32_t id(const std::string& token) const;  // kUnk when unknown
  const std::string& token(std::int32_t id) const { return tokens_.at(id); }
  std::uint64_t count(std::int32_t id) const { return counts_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  std::vector<std::int32_t> encode(const std::vector<std::string>& tokens) const;

 private:
  std::unordered_map<std::string, std::int32_t> ids_;
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
};

// Post id -> d_w dimensional vector.
class PostEmbeddingStore {
 public:
  PostEmbeddingStore() = default;
  explicit PostEmbeddingStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& id) const { return vectors_.count(id) > 0; }
  const std::vector<double>* find(const std::string& id) const;
  void set(const std::string& id, std::vector<double> v);
  const std::map<std::string, std::vector<double>>& entries() const { return vectors_; }

  bool operator==(const PostEmbeddingStore&) const = default;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<double>> vectors_;
};

// Text format: "dim=<d>" header, then "<post_id> v1 ... vd" per line.
void write_embeddings(std::ostream& out, const PostEmbeddingStore& store);
void write_embeddings(const std::filesystem::path& path, const PostEmbeddingStore& store);
PostEmbeddingStore read_embeddings(std::istream& in);
PostEmbeddingStore load_embeddings(const std::filesystem::path& path);

struct PvDbowConfig {
  std::size_t dim = 50;
  std::size_t epochs = 20;
  std::size_t negatives = 5;
  double lr = 0.025;          // decays linearly to lr * 1e-4
  std::size_t min_count = 2;
  std::size_t infer_epochs = 20;
  std::uint64_t seed = 1;
};

using Document = std::pair<std::string, std::vector<std::string>>;

// Distributed bag-of-words paragraph vectors trained with negative sampling.
class PvDbowModel {
 public:
  PvDbowModel() = default;
  PvDbowModel(PvDbowConfig config, Vocabulary vocab, std::vector<double> word_out);

  const PvDbowConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t dim() const { return config_.dim; }
  // Output (context) word vectors, vocab.size() x dim row-major.
  const std::vector<double>& word_vectors() const { return word_out_; }
  // Per-document vectors learned during training.
  const PostEmbeddingStore& documents() const { return docs_; }
  // Mean negative-sampling loss per (doc, token) pair for each epoch.
  const std::vector<double>& epoch_loss() const { return epoch_loss_; }

  // Vector for an unseen document with word vectors frozen. Empty token lists
  // give the zero vector. Deterministic in (seed, key).
  std::vector<double> infer(const std::vector<std::string>& tokens, const std::string& key) const;

 private:
  friend PvDbowModel train_pv_dbow(const std::vector<Document>&, const PvDbowConfig&);

  PvDbowConfig config_;
  Vocabulary vocab_;
  std::vector<double> word_out_;
  std::vector<double> neg_cdf_;
  PostEmbeddingStore docs_;
  std::vector<double> epoch_loss_;

  void build_sampler();
  std::int32_t sample_negative(double u) const;
};

// Throws when the corpus is empty or config values are out of range. Docs with
// no tokens get the zero vector.
PvDbowModel train_pv_dbow(const std::vector<Document>& corpus, const PvDbowConfig& config);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace nmdps

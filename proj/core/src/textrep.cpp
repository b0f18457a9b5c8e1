#include "nmdps/textrep.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "nmdps/error.hpp"
#include "nmdps/rng.hpp"

namespace nmdps {

// ---- tokenizer ------------------------------------------------------------

namespace {

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes consumed
};

CodePoint decode_utf8(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto bits = [&](std::size_t k) { return static_cast<char32_t>(s[i + k] & 0x3F); };
  if (c < 0x80) return {c, 1};
  if ((c & 0xE0) == 0xC0 && cont(1)) return {((c & 0x1Fu) << 6) | bits(1), 2};
  if ((c & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    return {((c & 0x0Fu) << 12) | (bits(1) << 6) | bits(2), 3};
  }
  if ((c & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    return {((c & 0x07u) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3), 4};
  }
  return {0xFFFD, 1};  // stray byte: kept as part of a word
}

bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0xF900 && c <= 0xFAFF) ||
         (c >= 0x3040 && c <= 0x30FF) || (c >= 0xAC00 && c <= 0xD7AF) ||
         (c >= 0x3001 && c <= 0x303F) || (c >= 0xFF00 && c <= 0xFFEF);
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' ||
         c == 0x3000 || c == 0xA0;
}

bool is_word(char32_t c) {
  if (c < 0x80) return std::isalnum(static_cast<int>(c)) || c == '_';
  return !is_cjk(c) && !is_space(c);
}

bool starts_with_url(std::string_view s, std::size_t i) {
  auto at = [&](std::string_view p) {
    if (s.size() - i < p.size()) return false;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != p[k]) return false;
    }
    return true;
  };
  return at("http://") || at("https://") || at("www.");
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    CodePoint cp = decode_utf8(text, i);
    if (is_space(cp.value)) {
      flush();
      i += cp.length;
      continue;
    }
    if (word.empty() && starts_with_url(text, i)) {
      out.emplace_back("<url>");
      while (i < text.size()) {
        CodePoint c = decode_utf8(text, i);
        if (is_space(c.value)) break;
        i += c.length;
      }
      continue;
    }
    if (cp.value == '@' && i + 1 < text.size() && is_word(decode_utf8(text, i + 1).value)) {
      flush();
      out.emplace_back("<mention>");
      i += 1;
      while (i < text.size()) {
        CodePoint c = decode_utf8(text, i);
        if (!is_word(c.value)) break;
        i += c.length;
      }
      continue;
    }
    if (is_word(cp.value)) {
      if (cp.length == 1) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      } else {
        word.append(text.substr(i, cp.length));
      }
    } else {
      flush();
      out.emplace_back(text.substr(i, cp.length));
    }
    i += cp.length;
  }
  flush();
  return out;
}

// ---- vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"}, counts_{0, 0} {
  ids_["<pad>"] = kPad;
  ids_["<unk>"] = kUnk;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs,
                             std::size_t min_count) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& d : docs) {
    for (const auto& t : d) ++freq[t];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  std::uint64_t unk = 0;
  for (auto& [tok, n] : freq) {
    if (n >= min_count && tok != "<pad>" && tok != "<unk>") {
      kept.emplace_back(tok, n);
    } else {
      unk += n;
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.counts_[kUnk] = unk;
  for (auto& [tok, n] : kept) {
    v.ids_[tok] = static_cast<std::int32_t>(v.tokens_.size());
    v.tokens_.push_back(tok);
    v.counts_.push_back(n);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens,
                                   std::vector<std::uint64_t> counts) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>" ||
      counts.size() != tokens.size()) {
    throw Error("Vocabulary::from_tokens: malformed token list");
  }
  Vocabulary v;
  v.ids_.clear();
  v.tokens_ = std::move(tokens);
  v.counts_ = std::move(counts);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw Error("Vocabulary::from_tokens: duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

std::int32_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::int32_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

// ---- embedding store ------------------------------------------------------

const std::vector<double>* PostEmbeddingStore::find(const std::string& id) const {
  auto it = vectors_.find(id);
  return it == vectors_.end() ? nullptr : &it->second;
}

void PostEmbeddingStore::set(const std::string& id, std::vector<double> v) {
  if (v.size() != dim_) {
    throw Error("embedding for '" + id + "' has dimension " + std::to_string(v.size()) +
                ", store expects " + std::to_string(dim_));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw Error("embedding for '" + id + "' is not finite");
  }
  vectors_[id] = std::move(v);
}

void write_embeddings(std::ostream& out, const PostEmbeddingStore& store) {
  out << "dim=" << store.dim() << '\n';
  char buf[32];
  for (const auto& [id, v] : store.entries()) {
    if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) {
      throw Error("embedding id '" + id + "' is empty or contains whitespace");
    }
    out << id;
    for (double x : v) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

void write_embeddings(const std::filesystem::path& path, const PostEmbeddingStore& store) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embedding file '" + path.string() + "'");
  write_embeddings(out, store);
}

PostEmbeddingStore read_embeddings(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.rfind("dim=", 0) != 0) throw ParseError("expected header \"dim=<d>\"", lineno);
    try {
      std::size_t used = 0;
      long long d = std::stoll(line.substr(4), &used);
      if (d <= 0 || line.substr(4 + used).find_first_not_of(" \t\r") != std::string::npos) {
        throw std::invalid_argument("dim");
      }
      dim = static_cast<std::size_t>(d);
    } catch (const std::exception&) {
      throw ParseError("invalid dimension in header '" + line + "'", lineno);
    }
    break;
  }
  if (dim == 0) throw ParseError("missing \"dim=<d>\" header", lineno);
  PostEmbeddingStore store(dim);
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream row(line);
    std::string id;
    if (!(row >> id)) continue;
    std::vector<double> v;
    std::string tok;
    while (row >> tok) {
      try {
        std::size_t used = 0;
        double x = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        v.push_back(x);
      } catch (const std::exception&) {
        throw ParseError("invalid number '" + tok + "'", lineno);
      }
    }
    if (v.size() != dim) {
      throw ParseError("dimension mismatch for '" + id + "': expected " + std::to_string(dim) +
                           " values, got " + std::to_string(v.size()),
                       lineno);
    }
    if (store.contains(id)) throw ParseError("duplicate embedding id '" + id + "'", lineno);
    try {
      store.set(id, std::move(v));
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return store;
}

PostEmbeddingStore load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file '" + path.string() + "'");
  return read_embeddings(in);
}

// ---- PV-DBOW --------------------------------------------------------------

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void validate(const PvDbowConfig& c) {
  if (c.dim == 0) throw ConfigError("pv-dbow: dim must be positive");
  if (c.negatives == 0) throw ConfigError("pv-dbow: negatives must be positive");
  if (c.epochs == 0) throw ConfigError("pv-dbow: epochs must be positive");
  if (!(c.lr > 0.0)) throw ConfigError("pv-dbow: lr must be positive");
}

}  // namespace

PvDbowModel::PvDbowModel(PvDbowConfig config, Vocabulary vocab, std::vector<double> word_out)
    : config_(config), vocab_(std::move(vocab)), word_out_(std::move(word_out)) {
  if (word_out_.size() != vocab_.size() * config_.dim) {
    throw Error("PvDbowModel: word vector table does not match vocabulary size");
  }
  build_sampler();
}

void PvDbowModel::build_sampler() {
  neg_cdf_.assign(vocab_.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    total += std::pow(static_cast<double>(vocab_.count(static_cast<std::int32_t>(i))), 0.75);
    neg_cdf_[i] = total;
  }
  if (total > 0.0) {
    for (double& c : neg_cdf_) c /= total;
  }
}

std::int32_t PvDbowModel::sample_negative(double u) const {
  auto it = std::upper_bound(neg_cdf_.begin(), neg_cdf_.end(), u);
  if (it == neg_cdf_.end()) --it;
  return static_cast<std::int32_t>(it - neg_cdf_.begin());
}

namespace {

// One (doc, target) negative-sampling update. Returns the pair's loss.
// word_out is written only when update_words is set.
double train_pair(std::vector<double>& doc, std::int32_t target, double* word_out,
                  std::size_t dim, std::size_t negatives, double alpha, bool update_words,
                  Rng& rng, const std::function<std::int32_t(double)>& sampler,
                  std::vector<double>& doc_grad) {
  std::fill(doc_grad.begin(), doc_grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t s = 0; s <= negatives; ++s) {
    std::int32_t w;
    double label;
    if (s == 0) {
      w = target;
      label = 1.0;
    } else {
      w = sampler(rng.uniform());
      if (w == target) continue;
      label = 0.0;
    }
    double* u = word_out + static_cast<std::size_t>(w) * dim;
    double f = 0.0;
    for (std::size_t k = 0; k < dim; ++k) f += doc[k] * u[k];
    const double p = sigmoid(f);
    loss -= std::log(std::max(1e-300, label > 0.5 ? p : 1.0 - p));
    const double g = (label - p) * alpha;
    for (std::size_t k = 0; k < dim; ++k) doc_grad[k] += g * u[k];
    if (update_words) {
      for (std::size_t k = 0; k < dim; ++k) u[k] += g * doc[k];
    }
  }
  for (std::size_t k = 0; k < dim; ++k) doc[k] += doc_grad[k];
  return loss;
}

std::vector<double> init_doc(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = (rng.uniform() - 0.5) / static_cast<double>(dim);
  return v;
}

}  // namespace

PvDbowModel train_pv_dbow(const std::vector<Document>& corpus, const PvDbowConfig& config) {
  validate(config);
  if (corpus.empty()) throw Error("train_pv_dbow: empty corpus");

  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(corpus.size());
  for (const auto& d : corpus) token_lists.push_back(d.second);

  PvDbowModel model;
  model.config_ = config;
  model.vocab_ = Vocabulary::build(token_lists, config.min_count);
  model.build_sampler();
  const std::size_t dim = config.dim;
  model.word_out_.assign(model.vocab_.size() * dim, 0.0);

  Rng rng(config.seed);
  std::vector<std::vector<std::int32_t>> ids(corpus.size());
  std::vector<std::vector<double>> docs(corpus.size());
  std::size_t total_tokens = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ids[i] = model.vocab_.encode(corpus[i].second);
    docs[i] = init_doc(dim, rng);
    total_tokens += ids[i].size();
  }

  auto sampler = [&model](double u) { return model.sample_negative(u); };
  std::vector<double> grad(dim);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, total_tokens * config.epochs));
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i : order) {
      for (std::int32_t w : ids[i]) {
        const double alpha = config.lr * std::max(1e-4, 1.0 - static_cast<double>(step) / total_steps);
        loss += train_pair(docs[i], w, model.word_out_.data(), dim, config.negatives, alpha, true, rng,
                           sampler, grad);
        ++pairs;
        ++step;
      }
    }
    model.epoch_loss_.push_back(pairs > 0 ? loss / static_cast<double>(pairs) : 0.0);
  }

  model.docs_ = PostEmbeddingStore(dim);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (ids[i].empty()) std::fill(docs[i].begin(), docs[i].end(), 0.0);
    model.docs_.set(corpus[i].first, std::move(docs[i]));
  }
  return model;
}

std::vector<double> PvDbowModel::infer(const std::vector<std::string>& tokens,
                                       const std::string& key) const {
  const std::size_t dim = config_.dim;
  if (tokens.empty()) return std::vector<double>(dim, 0.0);
  Rng rng(Rng::derive(config_.seed, stable_hash(key)));
  std::vector<double> doc = init_doc(dim, rng);
  const auto ids = vocab_.encode(tokens);
  double* words = const_cast<double*>(word_out_.data());  // read-only with update_words=false
  auto sampler = [this](double u) { return sample_negative(u); };
  std::vector<double> grad(dim);
  const std::size_t epochs = std::max<std::size_t>(1, config_.infer_epochs);
  const double total = static_cast<double>(epochs * ids.size());
  std::size_t step = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::int32_t w : ids) {
      const double alpha = config_.lr * std::max(1e-4, 1.0 - static_cast<double>(step) / total);
      train_pair(doc, w, words, dim, config_.negatives, alpha, false, rng, sampler, grad);
      ++step;
    }
  }
  return doc;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: dimension mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace nmdps

#include "rdd/bigram.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "rdd/errors.hpp"

namespace rdd {

std::shared_ptr<const BigramModel> BigramModel::fit(const std::vector<std::vector<TokenId>>& corpus,
                                                    double smoothing, std::size_t vocab_size) {
  std::size_t tokens = 0;
  TokenId max_token = 0;
  for (const auto& seq : corpus) {
    tokens += seq.size();
    for (TokenId t : seq) {
      if (t == kMaskToken) throw UsageError("corpus contains the MASK sentinel");
      max_token = std::max(max_token, t);
    }
  }
  if (tokens == 0) throw UsageError("bigram corpus is empty");
  if (!(smoothing > 0.0)) throw UsageError("bigram smoothing must be positive");
  if (vocab_size == 0) vocab_size = static_cast<std::size_t>(max_token) + 1;
  if (max_token >= vocab_size) throw UsageError("corpus token exceeds vocab_size");

  std::shared_ptr<BigramModel> m(new BigramModel());
  const std::size_t v = vocab_size;
  m->vocab_ = v;
  m->smoothing_ = smoothing;

  std::vector<double> pair_counts(v * v, 0.0);
  std::vector<double> counts(v, 0.0);
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      counts[seq[i]] += 1.0;
      if (i + 1 < seq.size()) pair_counts[seq[i] * v + seq[i + 1]] += 1.0;
    }
  }

  m->transition_.resize(v * v);
  for (std::size_t a = 0; a < v; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < v; ++b) row += pair_counts[a * v + b];
    const double denom = row + smoothing * static_cast<double>(v);
    for (std::size_t b = 0; b < v; ++b) {
      m->transition_[a * v + b] = (pair_counts[a * v + b] + smoothing) / denom;
    }
  }
  m->unigram_.resize(v);
  const double denom = static_cast<double>(tokens) + smoothing * static_cast<double>(v);
  for (std::size_t b = 0; b < v; ++b) m->unigram_[b] = (counts[b] + smoothing) / denom;
  return m;
}

void BigramModel::step(std::span<const double> dist, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t a = 0; a < vocab_; ++a) {
    const double w = dist[a];
    if (w == 0.0) continue;
    const double* row = &transition_[a * vocab_];
    for (std::size_t b = 0; b < vocab_; ++b) out[b] += w * row[b];
  }
}

std::vector<double> BigramModel::propagate(TokenId from, std::size_t distance) const {
  if (from >= vocab_) throw UsageError("token outside the bigram vocabulary");
  std::vector<double> cur(vocab_, 0.0), next(vocab_);
  cur[from] = 1.0;
  for (std::size_t d = 0; d < distance; ++d) {
    step(cur, next);
    cur.swap(next);
  }
  return cur;
}

BigramDenoiser::BigramDenoiser(std::shared_ptr<const BigramModel> model, std::size_t top_k)
    : model_(std::move(model)), top_k_(top_k) {
  if (!model_) throw UsageError("BigramDenoiser needs a model");
}

BlockState BigramDenoiser::summarize_block(std::span<const TokenId> tokens, Position begin) const {
  // last committed token of the block and its absolute position
  for (std::size_t k = tokens.size(); k > 0; --k) {
    if (tokens[k - 1] != kMaskToken) return {tokens[k - 1], begin + k - 1};
  }
  return {};
}

namespace {

Prediction from_distribution(Position pos, std::span<const double> dist, std::size_t top_k) {
  Prediction p;
  p.position = pos;
  // strict > keeps the lowest token id on ties
  std::size_t best = 0;
  for (std::size_t b = 1; b < dist.size(); ++b) {
    if (dist[b] > dist[best]) best = b;
  }
  p.token = static_cast<TokenId>(best);
  p.confidence = dist[best];
  if (top_k > 0) {
    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t x, std::size_t y) { return dist[x] > dist[y] || (dist[x] == dist[y] && x < y); });
    p.top_k.reserve(k);
    for (std::size_t r = 0; r < k; ++r) p.top_k.emplace_back(static_cast<TokenId>(order[r]), dist[order[r]]);
  }
  return p;
}

}  // namespace

std::vector<Prediction> BigramDenoiser::predict(const DenoiserInput& input) const {
  const BigramModel& m = *model_;
  const std::size_t v = m.vocab_size();

  std::optional<TokenId> anchor;
  Position anchor_pos = 0;
  for (auto it = input.prefix.rbegin(); it != input.prefix.rend() && !anchor; ++it) {
    const BlockState& s = (*it)->state;
    if (s.size() == 2) {
      anchor = static_cast<TokenId>(s[0]);
      anchor_pos = static_cast<Position>(s[1]);
    }
  }
  if (!anchor && !input.prompt.empty()) {
    anchor = input.prompt.back();
    anchor_pos = input.prompt.size() - 1;
  }

  // cur holds the distribution at position i - 1 given the anchor
  std::vector<double> cur, next(v);
  if (anchor) cur = m.propagate(*anchor, input.window.start - 1 - anchor_pos);

  std::vector<Prediction> out;
  for (std::size_t k = 0; k < input.window_tokens.size(); ++k) {
    const Position i = input.window.start + k;
    const TokenId t = input.window_tokens[k];
    if (t != kMaskToken) {
      if (t >= v) throw UsageError("committed token outside the bigram vocabulary");
      anchor = t;
      cur.assign(v, 0.0);
      cur[t] = 1.0;
      continue;
    }
    if (anchor) {
      m.step(cur, next);
      cur.swap(next);
      out.push_back(from_distribution(i, cur, top_k_));
    } else {
      out.push_back(from_distribution(i, m.unigram_distribution(), top_k_));
    }
  }
  return out;
}

std::vector<std::vector<TokenId>> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open corpus");
  std::vector<std::vector<TokenId>> corpus;
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    try {
      const auto j = nlohmann::json::parse(in);
      corpus = j.at("sequences").get<std::vector<std::vector<TokenId>>>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path, std::string("malformed corpus JSON: ") + e.what());
    }
    return corpus;
  }
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<TokenId> seq;
    long long t;
    while (ls >> t) {
      if (t < 0) throw IoError(path, "negative token id");
      seq.push_back(static_cast<TokenId>(t));
    }
    if (!ls.eof()) throw IoError(path, "non-integer token in corpus");
    if (!seq.empty()) corpus.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace rdd

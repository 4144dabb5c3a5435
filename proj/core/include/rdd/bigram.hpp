#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdd/denoiser.hpp"

namespace rdd {

/// Additively smoothed first-order Markov model fitted on token sequences.
class BigramModel {
 public:
  /// Throws UsageError on an empty corpus or non-positive smoothing.
  /// `vocab_size` of 0 means "largest token in the corpus + 1".
  static std::shared_ptr<const BigramModel> fit(const std::vector<std::vector<TokenId>>& corpus,
                                                double smoothing = 0.1, std::size_t vocab_size = 0);

  std::size_t vocab_size() const noexcept { return vocab_; }
  double smoothing() const noexcept { return smoothing_; }

  /// P(next = b | current = a).
  double transition(TokenId a, TokenId b) const { return transition_[a * vocab_ + b]; }
  double unigram(TokenId b) const { return unigram_[b]; }

  /// Distribution of the token `distance` steps after `from` (row of T^distance).
  std::vector<double> propagate(TokenId from, std::size_t distance) const;

  /// One step of the chain: out = dist * T.
  void step(std::span<const double> dist, std::span<double> out) const;

  std::span<const double> unigram_distribution() const noexcept { return unigram_; }

 private:
  BigramModel() = default;

  std::size_t vocab_ = 0;
  double smoothing_ = 0.1;
  std::vector<double> transition_;
  std::vector<double> unigram_;
};

/// Reference denoiser backed by a BigramModel.
///
/// A masked position at distance d from the nearest committed token a to its
/// left (within prompt + prefix + window) is predicted from row a of T^d;
/// positions without any committed left token use the unigram distribution.
class BigramDenoiser final : public Denoiser {
 public:
  explicit BigramDenoiser(std::shared_ptr<const BigramModel> model, std::size_t top_k = 3);

  BlockState summarize_block(std::span<const TokenId> tokens, Position begin) const override;
  std::size_t vocab_size() const noexcept override { return model_->vocab_size(); }

  const BigramModel& model() const noexcept { return *model_; }

 protected:
  std::vector<Prediction> predict(const DenoiserInput& input) const override;

 private:
  std::shared_ptr<const BigramModel> model_;
  std::size_t top_k_;
};

/// Reads whitespace-separated integer tokens, one sequence per line.
std::vector<std::vector<TokenId>> load_corpus(const std::string& path);

}  // namespace rdd

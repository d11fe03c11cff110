#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace rasr {

// Which conditioning terms the decoder sees: the full set (instruction +
// retrieved context + audio + history) or audio + history only.
enum class Conditioning {
  ContextAware,  // context-presence flag and context bag are active
  AudioOnly,     // context flag forced to 0 regardless of the data
};

enum class TrainableGroup { EncoderOnly, DecoderOnly, Both };

inline constexpr int kToyBos = 0;
inline constexpr int kToyEos = 1;

// One toy utterance: a fixed "audio" feature vector, its token sequence
// (BOS ... EOS), and an optional retrieved-context summary represented as a
// normalized bag of symbols.
struct ToyExample {
  Eigen::VectorXd features;     // dim F
  std::vector<int> tokens;      // length >= 2, values in [0, vocab)
  Eigen::VectorXd context_bag;  // dim V; zero vector when has_context = false
  bool has_context = false;
};

// Miniature differentiable stand-in for the encoder/decoder pair: a linear
// encoder maps features to an embedding, a fixed projection scores soft
// "pooled output" buckets, and a tabular decoder emits next-token logits
// conditioned on (previous symbol, bucket, context flag), plus a learned
// scalar gain on the context bag.
//
// Forward pass for one prediction step with previous token u, features x,
// context flag c and bag g:
//   e = encoder * x                 (E)
//   z = projection * e              (B)
//   p = softmax(z)                  soft bucket weights
//   L_v = sum_b p_b * table[u,b,c,v] + c * context_gain * g_v
//   loss = -log softmax(L)[y]
struct ToyModel {
  int feature_dim = 8;   // F
  int embed_dim = 8;     // E
  int bucket_count = 8;  // B
  int vocab_size = 16;   // V, includes BOS=0 and EOS=1

  Eigen::MatrixXd encoder;     // E x F, encoder group
  Eigen::MatrixXd projection;  // B x E, fixed (never trained)
  std::vector<double> decoder_table;  // V*B*2*V logits, decoder group
  double context_gain = 0.0;          // decoder group

  static ToyModel init(std::uint64_t seed, int feature_dim = 8,
                       int embed_dim = 8, int bucket_count = 8,
                       int vocab_size = 16, double init_scale = 0.5);

  std::size_t table_index(int prev, int bucket, int flag, int v) const;

  // Throws Error on dimension mismatches or non-finite parameters.
  void validate() const;
};

// Mean negative log-likelihood of next tokens over all prediction steps in
// the batch. AudioOnly conditioning zeroes the context flag for every
// example. Throws EmptyInputError for an empty batch or too-short sequence,
// NonFiniteLoss if any logit or the loss is non-finite.
double nll_loss(const ToyModel& model, const std::vector<ToyExample>& batch,
                Conditioning conditioning);

// Gradient slots exist only for the trainable group; frozen groups are
// structurally absent rather than zero-filled.
struct ToyGradients {
  std::optional<Eigen::MatrixXd> encoder;
  std::optional<std::vector<double>> decoder_table;
  std::optional<double> context_gain;
  double loss = 0.0;  // loss of the same forward pass, for free
};

ToyGradients gradients(const ToyModel& model,
                       const std::vector<ToyExample>& batch,
                       Conditioning conditioning, TrainableGroup trainable);

struct ToyDataset {
  std::vector<ToyExample> train;
  std::vector<ToyExample> dev;
};

// Synthetic corpus where pairs of symbols share identical audio features
// ("homophones"), so audio-only conditioning cannot do better than an even
// split within a pair, while the context bag names the true symbol and makes
// the pair separable. Sequences are [BOS, symbol, EOS]; every example
// carries a context bag (the audio-only mode ignores it by construction).
ToyDataset make_disambiguation_dataset(std::uint64_t seed,
                                       int train_copies_per_symbol = 32,
                                       int dev_copies_per_symbol = 8);

}  // namespace rasr

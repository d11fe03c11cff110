#include "rasr/toy_model.hpp"

#include <cmath>
#include <random>

#include "rasr/errors.hpp"
#include "rasr/rng.hpp"

namespace rasr {

namespace {

using rng::symmetric_uniform;

// Numerically safe softmax in double precision.
Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

struct StepContext {
  int prev;
  int target;
  int flag;
  Eigen::VectorXd p;       // bucket weights
  Eigen::VectorXd logits;  // V
  Eigen::VectorXd e;       // embedding
};

void check_example(const ToyModel& model, const ToyExample& ex) {
  if (ex.tokens.size() < 2) {
    throw EmptyInputError("toy example needs at least BOS plus one token");
  }
  for (int t : ex.tokens) {
    if (t < 0 || t >= model.vocab_size) {
      throw Error("toy token " + std::to_string(t) + " outside vocabulary");
    }
  }
  if (ex.features.size() != model.feature_dim) {
    throw DimensionMismatch("toy example features have dim " +
                            std::to_string(ex.features.size()) + ", expected " +
                            std::to_string(model.feature_dim));
  }
  if (ex.has_context && ex.context_bag.size() != model.vocab_size) {
    throw DimensionMismatch("toy context bag has dim " +
                            std::to_string(ex.context_bag.size()) +
                            ", expected " + std::to_string(model.vocab_size));
  }
}

}  // namespace

ToyModel ToyModel::init(std::uint64_t seed, int feature_dim, int embed_dim,
                        int bucket_count, int vocab_size, double init_scale) {
  if (feature_dim < 1 || embed_dim < 1 || bucket_count < 1 || vocab_size < 3) {
    throw Error("toy model dimensions must be positive (vocab >= 3)");
  }
  ToyModel m;
  m.feature_dim = feature_dim;
  m.embed_dim = embed_dim;
  m.bucket_count = bucket_count;
  m.vocab_size = vocab_size;

  std::mt19937_64 rng(seed);
  m.encoder.resize(embed_dim, feature_dim);
  for (int r = 0; r < embed_dim; ++r) {
    for (int c = 0; c < feature_dim; ++c) {
      m.encoder(r, c) = symmetric_uniform(rng, init_scale);
    }
  }
  m.projection.resize(bucket_count, embed_dim);
  for (int r = 0; r < bucket_count; ++r) {
    for (int c = 0; c < embed_dim; ++c) {
      m.projection(r, c) = symmetric_uniform(rng, 1.0);
    }
  }
  // The decoder table starts random (standing in for a pretrained decoder) so
  // encoder-only training has usable gradient signal from the first step.
  m.decoder_table.resize(static_cast<std::size_t>(vocab_size) * bucket_count *
                         2 * vocab_size);
  for (double& v : m.decoder_table) v = symmetric_uniform(rng, init_scale);
  m.context_gain = symmetric_uniform(rng, 0.1);
  return m;
}

std::size_t ToyModel::table_index(int prev, int bucket, int flag, int v) const {
  return ((static_cast<std::size_t>(prev) * bucket_count + bucket) * 2 + flag) *
             vocab_size +
         v;
}

void ToyModel::validate() const {
  if (encoder.rows() != embed_dim || encoder.cols() != feature_dim) {
    throw Error("toy encoder matrix has wrong shape");
  }
  if (projection.rows() != bucket_count || projection.cols() != embed_dim) {
    throw Error("toy projection matrix has wrong shape");
  }
  const std::size_t expected = static_cast<std::size_t>(vocab_size) *
                               bucket_count * 2 * vocab_size;
  if (decoder_table.size() != expected) {
    throw Error("toy decoder table has wrong size");
  }
  if (!encoder.allFinite() || !projection.allFinite() ||
      !std::isfinite(context_gain)) {
    throw Error("toy model has non-finite parameters");
  }
  for (double v : decoder_table) {
    if (!std::isfinite(v)) throw Error("toy model has non-finite parameters");
  }
}

namespace {

// Shared forward pass. Calls `on_step` with the per-step context; returns the
// mean NLL.
template <typename StepFn>
double forward_pass(const ToyModel& model, const std::vector<ToyExample>& batch,
                    Conditioning conditioning, StepFn&& on_step) {
  if (batch.empty()) throw EmptyInputError("toy batch is empty");

  double loss_sum = 0.0;
  std::size_t steps = 0;
  for (const ToyExample& ex : batch) {
    check_example(model, ex);
    const int flag =
        (conditioning == Conditioning::ContextAware && ex.has_context) ? 1 : 0;
    const Eigen::VectorXd e = model.encoder * ex.features;
    const Eigen::VectorXd z = model.projection * e;
    const Eigen::VectorXd p = softmax(z);

    for (std::size_t t = 1; t < ex.tokens.size(); ++t) {
      const int prev = ex.tokens[t - 1];
      const int target = ex.tokens[t];
      Eigen::VectorXd logits = Eigen::VectorXd::Zero(model.vocab_size);
      for (int v = 0; v < model.vocab_size; ++v) {
        double acc = 0.0;
        for (int b = 0; b < model.bucket_count; ++b) {
          acc += p(b) * model.decoder_table[model.table_index(prev, b, flag, v)];
        }
        if (flag != 0) acc += model.context_gain * ex.context_bag(v);
        logits(v) = acc;
      }
      if (!logits.allFinite()) {
        throw NonFiniteLoss("non-finite logits in toy forward pass");
      }
      const double step_loss = log_sum_exp(logits) - logits(target);
      if (!std::isfinite(step_loss)) {
        throw NonFiniteLoss("non-finite loss in toy forward pass");
      }
      loss_sum += step_loss;
      ++steps;
      on_step(ex, StepContext{prev, target, flag, p, std::move(logits), e});
    }
  }
  return loss_sum / static_cast<double>(steps);
}

}  // namespace

double nll_loss(const ToyModel& model, const std::vector<ToyExample>& batch,
                Conditioning conditioning) {
  return forward_pass(model, batch, conditioning,
                      [](const ToyExample&, const StepContext&) {});
}

ToyGradients gradients(const ToyModel& model,
                       const std::vector<ToyExample>& batch,
                       Conditioning conditioning, TrainableGroup trainable) {
  const bool want_encoder = trainable == TrainableGroup::EncoderOnly ||
                            trainable == TrainableGroup::Both;
  const bool want_decoder = trainable == TrainableGroup::DecoderOnly ||
                            trainable == TrainableGroup::Both;

  ToyGradients g;
  if (want_encoder) {
    g.encoder = Eigen::MatrixXd::Zero(model.embed_dim, model.feature_dim);
  }
  if (want_decoder) {
    g.decoder_table = std::vector<double>(model.decoder_table.size(), 0.0);
    g.context_gain = 0.0;
  }

  std::size_t steps = 0;
  for (const ToyExample& ex : batch) {
    if (ex.tokens.size() >= 2) steps += ex.tokens.size() - 1;
  }

  g.loss = forward_pass(
      model, batch, conditioning,
      [&](const ToyExample& ex, const StepContext& step) {
        // r = softmax(logits) - onehot(target)
        Eigen::VectorXd r = softmax(step.logits);
        r(step.target) -= 1.0;
        const double inv_steps = 1.0 / static_cast<double>(steps);

        if (want_decoder) {
          for (int v = 0; v < model.vocab_size; ++v) {
            const double rv = r(v) * inv_steps;
            for (int b = 0; b < model.bucket_count; ++b) {
              (*g.decoder_table)[model.table_index(step.prev, b, step.flag, v)] +=
                  step.p(b) * rv;
            }
          }
          if (step.flag != 0) {
            *g.context_gain += r.dot(ex.context_bag) * inv_steps;
          }
        }
        if (want_encoder) {
          // s_b = sum_v r_v * table[prev,b,flag,v]; dz = p ⊙ (s - (p·s))
          Eigen::VectorXd s = Eigen::VectorXd::Zero(model.bucket_count);
          for (int b = 0; b < model.bucket_count; ++b) {
            double acc = 0.0;
            for (int v = 0; v < model.vocab_size; ++v) {
              acc += r(v) *
                     model.decoder_table[model.table_index(step.prev, b,
                                                           step.flag, v)];
            }
            s(b) = acc;
          }
          const double ps = step.p.dot(s);
          const Eigen::VectorXd dz =
              step.p.array() * (s.array() - ps) * inv_steps;
          const Eigen::VectorXd de = model.projection.transpose() * dz;
          g.encoder->noalias() += de * ex.features.transpose();
        }
      });
  return g;
}

ToyDataset make_disambiguation_dataset(std::uint64_t seed,
                                       int train_copies_per_symbol,
                                       int dev_copies_per_symbol) {
  if (train_copies_per_symbol < 1 || dev_copies_per_symbol < 1) {
    throw Error("dataset copy counts must be >= 1");
  }
  // Defaults of ToyModel::init: F=8, V=16 -> symbols 2..15 form 7 pairs; the
  // pair index selects the shared feature vector.
  const int feature_dim = 8;
  const int vocab = 16;
  (void)seed;  // construction is fully deterministic; kept for signature parity

  const auto make_example = [&](int symbol) {
    const int pair = (symbol - 2) / 2;
    ToyExample ex;
    ex.features = Eigen::VectorXd::Zero(feature_dim);
    ex.features(pair) = 1.0;
    ex.features(feature_dim - 1) = 0.5;  // shared bias component
    ex.tokens = {kToyBos, symbol, kToyEos};
    ex.context_bag = Eigen::VectorXd::Zero(vocab);
    ex.context_bag(symbol) = 1.0;
    ex.has_context = true;
    return ex;
  };

  ToyDataset ds;
  for (int copy = 0; copy < train_copies_per_symbol; ++copy) {
    for (int symbol = 2; symbol < vocab; ++symbol) {
      ds.train.push_back(make_example(symbol));
    }
  }
  for (int copy = 0; copy < dev_copies_per_symbol; ++copy) {
    for (int symbol = 2; symbol < vocab; ++symbol) {
      ds.dev.push_back(make_example(symbol));
    }
  }
  return ds;
}

}  // namespace rasr

#include "rasr/staged_training.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "rasr/errors.hpp"
#include "rasr/rng.hpp"

namespace rasr {

StageSchedule StageSchedule::from_label(const std::string& label) {
  const Stage enc10{TrainableGroup::EncoderOnly, Conditioning::AudioOnly, 10};
  StageSchedule s;
  s.label = label;
  if (label == "s1") {
    s.stages = {enc10};
  } else if (label == "s2") {
    s.stages = {{TrainableGroup::EncoderOnly, Conditioning::AudioOnly, 30}};
  } else if (label == "s3") {
    s.stages = {enc10,
                {TrainableGroup::DecoderOnly, Conditioning::AudioOnly, 20}};
  } else if (label == "s4") {
    s.stages = {enc10,
                {TrainableGroup::EncoderOnly, Conditioning::ContextAware, 20}};
  } else if (label == "s5") {
    s.stages = {enc10,
                {TrainableGroup::DecoderOnly, Conditioning::ContextAware, 20}};
  } else {
    throw ConfigError("unknown schedule label '" + label +
                      "' (expected s1..s5)");
  }
  return s;
}

void StageSchedule::validate() const {
  if (stages.empty()) throw Error("schedule must contain at least one stage");
  for (const Stage& st : stages) {
    if (st.epochs < 1) {
      throw Error("stage epochs must be >= 1, got " + std::to_string(st.epochs));
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

TrainOutcome train_schedule(ToyModel model, const ToyDataset& data,
                            const StageSchedule& schedule,
                            const TrainConfig& cfg) {
  schedule.validate();
  model.validate();
  if (data.train.empty() || data.dev.empty()) {
    throw EmptyInputError("training needs non-empty train and dev splits");
  }
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.learning_rate < 0.0 || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }

  TrainOutcome out;
  std::mt19937_64 gen(cfg.seed);
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t stage_idx = 0; stage_idx < schedule.stages.size();
       ++stage_idx) {
    const Stage& stage = schedule.stages[stage_idx];
    for (int epoch = 0; epoch < stage.epochs; ++epoch) {
      const double lr =
          cfg.cosine_annealing
              ? cfg.learning_rate * 0.5 *
                    (1.0 + std::cos(std::numbers::pi *
                                    static_cast<double>(epoch) /
                                    static_cast<double>(stage.epochs)))
              : cfg.learning_rate;

      rng::shuffle(order, gen);
      std::vector<ToyExample> batch;
      batch.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(cfg.batch_size)) {
        batch.clear();
        const std::size_t stop =
            std::min(order.size(),
                     start + static_cast<std::size_t>(cfg.batch_size));
        for (std::size_t i = start; i < stop; ++i) {
          batch.push_back(data.train[order[i]]);
        }
        try {
          const ToyGradients g =
              gradients(model, batch, stage.conditioning, stage.trainable);
          if (g.encoder.has_value()) {
            model.encoder.noalias() -= lr * (*g.encoder);
          }
          if (g.decoder_table.has_value()) {
            for (std::size_t i = 0; i < model.decoder_table.size(); ++i) {
              model.decoder_table[i] -= lr * (*g.decoder_table)[i];
            }
          }
          if (g.context_gain.has_value()) {
            model.context_gain -= lr * (*g.context_gain);
          }
        } catch (const NonFiniteLoss& e) {
          throw NonFiniteLoss(std::string(e.what()) + " (stage " +
                              std::to_string(stage_idx + 1) + ", epoch " +
                              std::to_string(epoch + 1) + ")");
        }
      }

      EpochRecord rec;
      rec.stage = static_cast<int>(stage_idx + 1);
      rec.epoch = epoch + 1;
      try {
        rec.train_nll = nll_loss(model, data.train, stage.conditioning);
        rec.dev_nll = nll_loss(model, data.dev, stage.conditioning);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss(std::string(e.what()) + " (stage " +
                            std::to_string(stage_idx + 1) + ", epoch " +
                            std::to_string(epoch + 1) + ")");
      }
      out.history.push_back(rec);
    }
  }
  out.model = std::move(model);
  return out;
}

nlohmann::json history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EpochRecord& r : history) {
    arr.push_back({{"stage", r.stage},
                   {"epoch", r.epoch},
                   {"train_nll", r.train_nll},
                   {"dev_nll", r.dev_nll}});
  }
  return arr;
}

}  // namespace rasr

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rasr/toy_model.hpp"

namespace rasr {

struct Stage {
  TrainableGroup trainable = TrainableGroup::EncoderOnly;
  Conditioning conditioning = Conditioning::AudioOnly;
  int epochs = 1;
  bool operator==(const Stage&) const = default;
};

struct StageSchedule {
  std::string label;  // "s1".."s5" for the built-ins, "custom" otherwise
  std::vector<Stage> stages;

  // Built-in strategies:
  //   s1: encoder 10 epochs, audio-only
  //   s2: encoder 30 epochs, audio-only
  //   s3: encoder 10 audio-only, then decoder 20 audio-only
  //   s4: encoder 10 audio-only, then encoder 20 context-aware
  //   s5: encoder 10 audio-only, then decoder 20 context-aware
  static StageSchedule from_label(const std::string& label);

  void validate() const;  // non-empty, every stage epochs >= 1
  bool operator==(const StageSchedule&) const = default;
};

struct TrainConfig {
  // Toy-scale default; full-scale acoustic training would start at 5e-5.
  double learning_rate = 5e-3;
  int batch_size = 128;
  bool cosine_annealing = false;
  std::uint64_t seed = 42;

  // CLI-facing validation: learning_rate > 0. train_schedule itself accepts
  // a zero rate (useful as a no-op control).
  void validate() const;
};

struct EpochRecord {
  int stage = 0;  // 1-based
  int epoch = 0;  // 1-based within the stage
  double train_nll = 0.0;
  double dev_nll = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainOutcome {
  ToyModel model;
  std::vector<EpochRecord> history;
};

// Runs SGD over data.train per the schedule; only the stage's trainable
// group changes (the other group's parameters stay bit-identical). Losses in
// the history are full-split evaluations under the stage's conditioning,
// recorded after each epoch. The optimizer (and the cosine annealing clock,
// when enabled) resets at each stage boundary. Deterministic for a fixed
// seed. NonFiniteLoss is rethrown with stage/epoch context.
TrainOutcome train_schedule(ToyModel model, const ToyDataset& data,
                            const StageSchedule& schedule,
                            const TrainConfig& cfg);

nlohmann::json history_to_json(const std::vector<EpochRecord>& history);

}  // namespace rasr

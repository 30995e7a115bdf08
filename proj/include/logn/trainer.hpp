#pragma once

// Multinomial logistic regression (optionally with one ReLU hidden layer)
// trained by mini-batch SGD on softmax cross-entropy. Produces the raw logits
// the calibration pipeline consumes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "logn/calibrate.hpp"
#include "logn/errors.hpp"
#include "logn/logit_table.hpp"
#include "logn/stats.hpp"
#include "logn/synth.hpp"

namespace logn {

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t seed = 1;
  double weight_decay = 1e-4;
  int hidden_units = 0;  // 0 = linear head

  // Online inverse normalization of the training logits.
  bool online_logn = false;
  BetaMode online_beta = BetaMode::none();
  double online_momentum = kDefaultMomentum;
  double online_eps = kDefaultEps;
  int warmup_steps = 100;
};

struct Model {
  int input_dim = 0;
  int hidden_units = 0;
  int num_outputs = 0;
  std::vector<double> hidden_weight;  // hidden_units x input_dim
  std::vector<double> hidden_bias;
  std::vector<double> weight;  // num_outputs x head_input_dim()
  std::vector<double> bias;

  static Model zeros(int input_dim, int hidden_units, int num_outputs);
  int head_input_dim() const { return hidden_units > 0 ? hidden_units : input_dim; }

  // Flat access across all parameter blocks, in declaration order.
  std::size_t parameter_count() const;
  double& parameter(std::size_t k);
  double parameter(std::size_t k) const;

  friend bool operator==(const Model&, const Model&) = default;
};

// Initial parameters for `config`: zeros for a linear head, He-scaled
// Gaussian weights when a hidden layer is present.
Model initialize_model(int input_dim, int num_outputs, const TrainConfig& config);

// z' = z * scale + shift, applied to the logits before the loss.
struct LogitTransform {
  std::vector<double> scale;
  std::vector<double> shift;

  static LogitTransform from_params(const CalibrationParams& params);
};

struct LossAndGradient {
  double loss = 0.0;
  Model gradient;
};

// Mean cross-entropy over the rows plus 0.5 * weight_decay * |weights|^2
// (biases are not decayed), and its gradient.
LossAndGradient loss_and_gradient(const Model& model,
                                  std::span<const double> features,
                                  std::span<const std::int32_t> labels,
                                  double weight_decay = 0.0,
                                  const LogitTransform* transform = nullptr);

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(int epoch, std::size_t batch);
  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  int epoch_;
  std::size_t batch_;
};

struct TrainResult {
  Model model;
  double initial_loss = 0.0;        // full-data loss before the first step
  std::vector<double> epoch_loss;   // mean batch loss per epoch
  std::size_t steps = 0;
  std::optional<RunningStats> online_stats;
};

TrainResult train(const Dataset& dataset, const TrainConfig& config);

std::vector<double> predict_one(const Model& model, std::span<const double> x);

// Raw logits for every row, no normalization. Labels and the background index
// are carried over from the dataset.
LogitTable predict_logits(const Model& model, const Dataset& dataset);
LogitTable predict_logits_serial(const Model& model, const Dataset& dataset);

// Row-wise logits for a bare feature matrix.
std::vector<double> predict_matrix(const Model& model,
                                   std::span<const double> features);

}  // namespace logn

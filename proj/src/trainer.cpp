#include "logn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace logn {
namespace {

void check_model(const Model& m) {
  if (m.input_dim <= 0 || m.num_outputs <= 0 || m.hidden_units < 0) {
    throw DimensionError("invalid model shape");
  }
  const auto in = static_cast<std::size_t>(m.head_input_dim());
  if (m.weight.size() != static_cast<std::size_t>(m.num_outputs) * in ||
      m.bias.size() != static_cast<std::size_t>(m.num_outputs) ||
      m.hidden_weight.size() != static_cast<std::size_t>(m.hidden_units) *
                                    static_cast<std::size_t>(m.input_dim) ||
      m.hidden_bias.size() != static_cast<std::size_t>(m.hidden_units)) {
    throw DimensionError("model parameter blocks do not match its shape");
  }
}

// Forward pass for one row. `hidden` receives post-ReLU activations.
void forward(const Model& m, std::span<const double> x, std::span<double> hidden,
             std::span<double> logits) {
  std::span<const double> head_in = x;
  if (m.hidden_units > 0) {
    const auto d = static_cast<std::size_t>(m.input_dim);
    for (std::size_t h = 0; h < hidden.size(); ++h) {
      double a = m.hidden_bias[h];
      const double* w = m.hidden_weight.data() + h * d;
      for (std::size_t j = 0; j < d; ++j) a += w[j] * x[j];
      hidden[h] = a > 0.0 ? a : 0.0;
    }
    head_in = hidden;
  }
  const auto in = head_in.size();
  for (std::size_t k = 0; k < logits.size(); ++k) {
    double z = m.bias[k];
    const double* w = m.weight.data() + k * in;
    for (std::size_t j = 0; j < in; ++j) z += w[j] * head_in[j];
    logits[k] = z;
  }
}

double squared_weights(const Model& m) {
  double s = 0.0;
  for (double w : m.weight) s += w * w;
  for (double w : m.hidden_weight) s += w * w;
  return s;
}

}  // namespace

Model Model::zeros(int input_dim, int hidden_units, int num_outputs) {
  if (input_dim <= 0 || num_outputs <= 0 || hidden_units < 0) {
    throw DimensionError("invalid model shape");
  }
  Model m;
  m.input_dim = input_dim;
  m.hidden_units = hidden_units;
  m.num_outputs = num_outputs;
  m.hidden_weight.assign(static_cast<std::size_t>(hidden_units) * input_dim, 0.0);
  m.hidden_bias.assign(static_cast<std::size_t>(hidden_units), 0.0);
  m.weight.assign(static_cast<std::size_t>(num_outputs) * m.head_input_dim(), 0.0);
  m.bias.assign(static_cast<std::size_t>(num_outputs), 0.0);
  return m;
}

std::size_t Model::parameter_count() const {
  return hidden_weight.size() + hidden_bias.size() + weight.size() + bias.size();
}

double& Model::parameter(std::size_t k) {
  for (auto* block : {&hidden_weight, &hidden_bias, &weight, &bias}) {
    if (k < block->size()) return (*block)[k];
    k -= block->size();
  }
  throw DimensionError("parameter index out of range");
}

double Model::parameter(std::size_t k) const {
  return const_cast<Model&>(*this).parameter(k);
}

Model initialize_model(int input_dim, int num_outputs, const TrainConfig& config) {
  Model m = Model::zeros(input_dim, config.hidden_units, num_outputs);
  if (config.hidden_units > 0) {
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> g1(0.0, std::sqrt(2.0 / input_dim));
    for (double& w : m.hidden_weight) w = g1(rng);
    std::normal_distribution<double> g2(0.0, std::sqrt(1.0 / config.hidden_units));
    for (double& w : m.weight) w = g2(rng);
  }
  return m;
}

LogitTransform LogitTransform::from_params(const CalibrationParams& params) {
  return {params.scale(), params.adj_mean};
}

LossAndGradient loss_and_gradient(const Model& model,
                                  std::span<const double> features,
                                  std::span<const std::int32_t> labels,
                                  double weight_decay,
                                  const LogitTransform* transform) {
  check_model(model);
  const auto d = static_cast<std::size_t>(model.input_dim);
  const auto k_out = static_cast<std::size_t>(model.num_outputs);
  const auto h_dim = static_cast<std::size_t>(model.hidden_units);
  const auto in = static_cast<std::size_t>(model.head_input_dim());
  const std::size_t n = labels.size();
  if (n == 0) throw DimensionError("empty batch");
  if (features.size() != n * d) throw DimensionError("feature buffer size mismatch");
  if (transform && (transform->scale.size() != k_out || transform->shift.size() != k_out)) {
    throw DimensionError("logit transform width mismatch");
  }

  LossAndGradient out;
  out.gradient = Model::zeros(model.input_dim, model.hidden_units, model.num_outputs);
  Model& g = out.gradient;
  std::vector<double> hidden(h_dim), logits(k_out), probs(k_out), dz(k_out), dh(h_dim);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k_out) {
      throw DimensionError("label " + std::to_string(label) + " out of range");
    }
    std::span<const double> x = features.subspan(i * d, d);
    forward(model, x, hidden, logits);
    if (transform) {
      for (std::size_t k = 0; k < k_out; ++k) {
        logits[k] = logits[k] * transform->scale[k] + transform->shift[k];
      }
    }
    softmax_into(logits, probs);
    loss -= std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));

    for (std::size_t k = 0; k < k_out; ++k) {
      dz[k] = (probs[k] - (static_cast<std::size_t>(label) == k ? 1.0 : 0.0)) * inv_n;
      if (transform) dz[k] *= transform->scale[k];
    }
    std::span<const double> head_in = h_dim > 0 ? std::span<const double>(hidden) : x;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t k = 0; k < k_out; ++k) {
      g.bias[k] += dz[k];
      double* gw = g.weight.data() + k * in;
      const double* w = model.weight.data() + k * in;
      for (std::size_t j = 0; j < in; ++j) {
        gw[j] += dz[k] * head_in[j];
        if (h_dim > 0) dh[j] += dz[k] * w[j];
      }
    }
    for (std::size_t h = 0; h < h_dim; ++h) {
      if (hidden[h] <= 0.0) continue;
      g.hidden_bias[h] += dh[h];
      double* gw = g.hidden_weight.data() + h * d;
      for (std::size_t j = 0; j < d; ++j) gw[j] += dh[h] * x[j];
    }
  }
  out.loss = loss * inv_n + 0.5 * weight_decay * squared_weights(model);
  if (weight_decay != 0.0) {
    for (std::size_t j = 0; j < g.weight.size(); ++j) {
      g.weight[j] += weight_decay * model.weight[j];
    }
    for (std::size_t j = 0; j < g.hidden_weight.size(); ++j) {
      g.hidden_weight[j] += weight_decay * model.hidden_weight[j];
    }
  }
  return out;
}

TrainingDivergedError::TrainingDivergedError(int epoch, std::size_t batch)
    : Error("training diverged (non-finite loss) at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(batch)),
      epoch_(epoch),
      batch_(batch) {}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  if (dataset.rows == 0) throw DimensionError("empty dataset");
  if (config.epochs < 0) throw DomainError("epochs must be nonnegative");
  if (config.batch_size <= 0) throw DomainError("batch_size must be positive");
  if (!(config.learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
  if (config.weight_decay < 0.0) throw DomainError("weight_decay must be nonnegative");

  TrainResult result;
  result.model = initialize_model(dataset.feature_dim, dataset.num_classes, config);
  Model& model = result.model;
  result.initial_loss =
      loss_and_gradient(model, dataset.features, dataset.labels, config.weight_decay).loss;

  RunningStats online;
  if (config.online_logn) {
    online = RunningStats::empty(dataset.num_classes, config.online_momentum,
                                 config.online_eps, dataset.bg_index);
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<double> batch_x;
  std::vector<std::int32_t> batch_y;
  std::vector<double> batch_logits;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < dataset.rows; begin += batch_size) {
      const std::size_t end = std::min(dataset.rows, begin + batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const auto r = dataset.row(order[i]);
        batch_x.insert(batch_x.end(), r.begin(), r.end());
        batch_y.push_back(dataset.labels[order[i]]);
      }

      std::optional<LogitTransform> transform;
      if (config.online_logn) {
        batch_logits = predict_matrix(model, batch_x);
        online = update_ema(std::move(online),
                            LogitView(dataset.num_classes, dataset.bg_index,
                                      batch_y, batch_logits));
        if (result.steps >= static_cast<std::size_t>(config.warmup_steps)) {
          transform = LogitTransform::from_params(
              finalize(online, config.online_beta, 1.0));
        }
      }

      auto lg = loss_and_gradient(model, batch_x, batch_y, config.weight_decay,
                                  transform ? &*transform : nullptr);
      if (!std::isfinite(lg.loss)) throw TrainingDivergedError(epoch, batches);
      for (std::size_t k = 0; k < model.parameter_count(); ++k) {
        model.parameter(k) -= config.learning_rate * lg.gradient.parameter(k);
      }
      loss_sum += lg.loss;
      ++batches;
      ++result.steps;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  if (config.online_logn) result.online_stats = online;
  return result;
}

std::vector<double> predict_one(const Model& model, std::span<const double> x) {
  check_model(model);
  if (x.size() != static_cast<std::size_t>(model.input_dim)) {
    throw DimensionError("feature width " + std::to_string(x.size()) +
                         " does not match model input " +
                         std::to_string(model.input_dim));
  }
  std::vector<double> hidden(static_cast<std::size_t>(model.hidden_units));
  std::vector<double> logits(static_cast<std::size_t>(model.num_outputs));
  forward(model, x, hidden, logits);
  return logits;
}

std::vector<double> predict_matrix(const Model& model,
                                   std::span<const double> features) {
  check_model(model);
  const auto d = static_cast<std::size_t>(model.input_dim);
  if (features.size() % d != 0) throw DimensionError("feature buffer size mismatch");
  const std::size_t rows = features.size() / d;
  const auto k_out = static_cast<std::size_t>(model.num_outputs);
  std::vector<double> out(rows * k_out);
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel
  {
    std::vector<double> hidden(static_cast<std::size_t>(model.hidden_units));
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      forward(model, features.subspan(r * d, d), hidden,
              std::span<double>(out).subspan(r * k_out, k_out));
    }
  }
  return out;
}

LogitTable predict_logits(const Model& model, const Dataset& dataset) {
  if (dataset.feature_dim != model.input_dim) {
    throw DimensionError("dataset feature width does not match the model");
  }
  if (dataset.num_classes != model.num_outputs) {
    throw DimensionError("dataset class count does not match the model");
  }
  LogitTable out(model.num_outputs, dataset.bg_index);
  out.labels() = dataset.labels;
  out.values() = predict_matrix(model, dataset.features);
  return out;
}

LogitTable predict_logits_serial(const Model& model, const Dataset& dataset) {
  LogitTable out(model.num_outputs, dataset.bg_index);
  out.reserve(dataset.rows);
  for (std::size_t i = 0; i < dataset.rows; ++i) {
    out.push_back(dataset.labels[i], predict_one(model, dataset.row(i)));
  }
  return out;
}

}  // namespace logn

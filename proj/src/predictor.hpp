#pragma once

#include "numeric.hpp"
#include "trace.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace canids {

struct PredictorHyper {
  std::size_t subsequence_length = kDefaultSubsequenceLength;
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 64;
  std::size_t batch_size = 256;
  double learning_rate = 1e-4;
  std::size_t max_epochs = 500;
  std::size_t patience = 10;
  // Experimental: average the loss over every step instead of the last one.
  bool all_steps_loss = false;

  void validate() const;
  bool operator==(const PredictorHyper &) const = default;
};

struct PredictorWeights {
  nn::Linear embed;     // k -> embed_dim
  nn::LstmParams enc1;  // embed_dim -> hidden
  nn::LstmParams enc2;  // hidden -> hidden
  nn::Linear attn;      // hidden -> hidden, query projection
  nn::Linear combine;   // [attended ; encoder state] -> hidden, tanh
  nn::LstmParams dec1;  // hidden -> hidden
  nn::LstmParams dec2;  // hidden -> hidden
  nn::Linear output;    // hidden -> k

  void resize(std::size_t k, std::size_t embed_dim, std::size_t hidden_dim);
  void set_zero();
  std::size_t parameter_count() const;

  // Named views over every parameter block, in serialisation order. The
  // views alias this object's storage.
  std::vector<nn::ParamView> views();
  std::vector<std::pair<std::string, const nn::Tensor2 *>> matrices() const;
  std::vector<std::pair<std::string, const nn::Vector *>> vectors() const;

  bool operator==(const PredictorWeights &) const = default;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct PredictorModel {
  std::size_t k = 0;
  PredictorHyper hyper;
  PredictorWeights weights;
  // Training-set scaling, carried so inference can scale raw frames.
  std::optional<ScalingParams> scaling;
  std::uint32_t version = kModelFormatVersion;

  std::size_t parameter_count() const { return weights.parameter_count(); }
  bool operator==(const PredictorModel &) const = default;
};

// Closed-form parameter total for the architecture above.
std::size_t expected_parameter_count(std::size_t k, std::size_t embed_dim,
                                     std::size_t hidden_dim);

PredictorModel build_model(std::size_t k, const PredictorHyper &hyper, std::uint64_t seed);

struct AttentionResult {
  nn::Vector context;  // combine([applied ; current])
  nn::Vector weights;
  nn::Vector applied;  // sum_j weights_j * state_j
};

// Attention for the state at index `step` over states[0..step]; nothing
// after `step` is read.
AttentionResult self_attention(std::span<const nn::Vector> encoder_states, std::size_t step,
                               const PredictorModel &model);

struct ForwardResult {
  Eigen::MatrixXd predictions; // L x k; row s predicts input row s + 1
  nn::Vector last;
  std::vector<nn::Vector> attention; // attention weights per step
};

ForwardResult forward(const PredictorModel &model, const Eigen::MatrixXd &window);
nn::Vector predict_next(const PredictorModel &model, const Eigen::MatrixXd &window);

// A batch of windows in time-major layout: steps[s] is k x B.
struct WindowBatch {
  std::vector<nn::Tensor2> steps;
  nn::Tensor2 targets; // k x B, the record after each window

  Eigen::Index size() const { return targets.cols(); }
};

// Windows starting at starts[b] over a k x n signal matrix.
WindowBatch make_batch(const Eigen::MatrixXd &signals, std::size_t length,
                       std::span<const std::size_t> starts);

// Last-step predictions k x B.
nn::Tensor2 predict_batch(const PredictorModel &model, const WindowBatch &batch);

// Mean loss over the batch; accumulates d(loss)/d(weights) into `grad` when
// given (grad must be shaped like the model and is not cleared).
double loss_and_gradient(const PredictorModel &model, const WindowBatch &batch,
                         PredictorWeights *grad);

// The loss as scale * sum (p - y)^2 over flattened predictions and targets;
// feeds the least-squares gradient check.
nn::LeastSquaresTerms loss_terms(const PredictorModel &model, const WindowBatch &batch);

struct EpochStats {
  std::size_t epoch = 0; // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

enum class StopReason { Patience, MaxEpochs };

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  StopReason stop_reason = StopReason::MaxEpochs;
};

struct TrainResult {
  PredictorModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats &)>;

// Sequential mini-batches, Adam, best-epoch restore, patience stop.
TrainResult train(const PredictorModel &initial, const Trace &train_trace, const Trace &val_trace,
                  const PredictorHyper &hyper, const EpochCallback &on_epoch = {});

// Mean last-step MSE over all windows of a trace.
double evaluate_loss(const PredictorModel &model, const Trace &trace);

// Mean MSE of the naive x_{t+1} = x_t predictor over the same windows.
double persistence_mse(const Trace &trace, std::size_t length);

void save_model(const PredictorModel &model, const std::string &path,
                const std::string &provenance = {});
std::string serialize_model(const PredictorModel &model, const std::string &provenance = {});
PredictorModel load_model(const std::string &path, std::optional<std::size_t> expected_k = {},
                          std::string *provenance = nullptr);

std::string to_string(StopReason reason);

} // namespace canids

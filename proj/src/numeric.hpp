#pragma once

// Dense building blocks for the predictor. Every activation matrix holds one
// column per independent sequence, so a single vector is the 1-column case.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace canids::nn {

using Tensor2 = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Linear {
  Tensor2 weight; // out x in
  Vector bias;    // out

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(weight.size() + bias.size());
  }
  void resize(Eigen::Index out, Eigen::Index in);
  void set_zero();

  bool operator==(const Linear &o) const { return weight == o.weight && bias == o.bias; }
};

Tensor2 linear(const Linear &layer, const Tensor2 &x);

// Accumulates dW, db into `grad` and writes dx when requested.
void linear_backward(const Linear &layer, const Tensor2 &x, const Tensor2 &dy, Linear &grad,
                     Tensor2 *dx);

// Gate rows are stacked in the order input, forget, candidate, output.
struct LstmParams {
  Tensor2 w_input;  // 4H x in
  Tensor2 w_hidden; // 4H x H
  Vector bias;      // 4H

  Eigen::Index hidden() const { return w_hidden.cols(); }
  Eigen::Index in() const { return w_input.cols(); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(w_input.size() + w_hidden.size() + bias.size());
  }
  void resize(Eigen::Index in, Eigen::Index hidden);
  void set_zero();

  bool operator==(const LstmParams &o) const {
    return w_input == o.w_input && w_hidden == o.w_hidden && bias == o.bias;
  }
};

struct LstmCache {
  Tensor2 x;
  Tensor2 h_prev;
  Tensor2 c_prev;
  Tensor2 i, f, g, o;
  Tensor2 tanh_c;
};

struct LstmStep {
  Tensor2 h;
  Tensor2 c;
  LstmCache cache;
};

LstmStep lstm_cell_step(const LstmParams &p, const Tensor2 &x, const Tensor2 &h_prev,
                        const Tensor2 &c_prev);

// dh / dc are the gradients arriving at this step's outputs.
void lstm_cell_backward(const LstmParams &p, const LstmCache &cache, const Tensor2 &dh,
                        const Tensor2 &dc, LstmParams &grad, Tensor2 &dx, Tensor2 &dh_prev,
                        Tensor2 &dc_prev);

Vector softmax(const Vector &v);

struct MseResult {
  double loss = 0.0;
  Vector grad;
};

MseResult mse_loss(const Vector &pred, const Vector &target);

struct ParamView {
  std::string name;
  std::span<double> values;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::span<const std::size_t> block_sizes);
};

// One bias-corrected update over all blocks; block i of `params` pairs with
// block i of `grads`.
void adam_step(AdamState &state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);

struct GradCheckBlock {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double tolerance = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
};

double relative_error(double analytic, double numeric);

// Central differences against the supplied analytic gradients. With
// max_entries_per_block > 0 only an evenly strided subset is perturbed.
GradCheckReport grad_check(const std::function<double()> &loss,
                           std::span<const ParamView> params,
                           std::span<const std::span<const double>> analytic, double tolerance,
                           std::size_t max_entries_per_block = 0, double h = 1e-5);

// A least-squares loss scale * sum_j (predictions_j - targets_j)^2.
struct LeastSquaresTerms {
  Vector predictions;
  Vector targets;
  double scale = 1.0;
};

// Same check for a least-squares loss. The perturbed difference is formed as
// scale * sum (p+ - p-)(p+ + p- - 2y), so the large common part of the two
// losses never gets rounded; small gradient entries stay well above roundoff.
GradCheckReport grad_check_squares(const std::function<LeastSquaresTerms()> &terms,
                                   std::span<const ParamView> params,
                                   std::span<const std::span<const double>> analytic,
                                   double tolerance, std::size_t max_entries_per_block = 0,
                                   double h = 1e-5);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_linear(Linear &layer, std::mt19937_64 &rng);
// Same weight rule; biases zero except the forget gate, which starts at +1.
void init_lstm(LstmParams &p, std::mt19937_64 &rng);

} // namespace canids::nn

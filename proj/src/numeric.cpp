#include "numeric.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace canids::nn {

namespace {

Tensor2 sigmoid(const Tensor2 &z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

std::string shape(const Tensor2 &m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void uniform_fill(double *data, Eigen::Index n, double bound, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < n; ++i) {
    data[i] = dist(rng);
  }
}

// Row-major fill order keeps initialisation independent of Eigen's storage.
void uniform_fill(Tensor2 &m, double bound, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = dist(rng);
    }
  }
}

} // namespace

void Linear::resize(Eigen::Index out, Eigen::Index in) {
  weight.setZero(out, in);
  bias.setZero(out);
}

void Linear::set_zero() {
  weight.setZero();
  bias.setZero();
}

Tensor2 linear(const Linear &layer, const Tensor2 &x) {
  require(x.rows() == layer.in(), ErrorCode::Shape,
          "linear: input " + shape(x) + " does not match weight " + shape(layer.weight));
  require(layer.bias.size() == layer.out(), ErrorCode::Shape, "linear: bias size mismatch");
  Tensor2 y(layer.out(), x.cols());
  y.noalias() = layer.weight * x;
  y.colwise() += layer.bias;
  return y;
}

void linear_backward(const Linear &layer, const Tensor2 &x, const Tensor2 &dy, Linear &grad,
                     Tensor2 *dx) {
  require(dy.rows() == layer.out() && dy.cols() == x.cols() && x.rows() == layer.in(),
          ErrorCode::Shape, "linear_backward: shape mismatch");
  grad.weight.noalias() += dy * x.transpose();
  grad.bias += dy.rowwise().sum();
  if (dx != nullptr) {
    dx->noalias() = layer.weight.transpose() * dy;
  }
}

void LstmParams::resize(Eigen::Index in, Eigen::Index hidden) {
  w_input.setZero(4 * hidden, in);
  w_hidden.setZero(4 * hidden, hidden);
  bias.setZero(4 * hidden);
}

void LstmParams::set_zero() {
  w_input.setZero();
  w_hidden.setZero();
  bias.setZero();
}

LstmStep lstm_cell_step(const LstmParams &p, const Tensor2 &x, const Tensor2 &h_prev,
                        const Tensor2 &c_prev) {
  const Eigen::Index hd = p.hidden();
  require(p.w_input.rows() == 4 * hd && p.w_hidden.rows() == 4 * hd && p.bias.size() == 4 * hd,
          ErrorCode::Shape, "lstm: inconsistent parameter shapes");
  require(x.rows() == p.in(), ErrorCode::Shape,
          "lstm: input " + shape(x) + " does not match w_input " + shape(p.w_input));
  require(h_prev.rows() == hd && c_prev.rows() == hd && h_prev.cols() == x.cols() &&
              c_prev.cols() == x.cols(),
          ErrorCode::Shape, "lstm: state shape mismatch");

  const Eigen::Index batch = x.cols();
  Tensor2 gates(4 * hd, batch);
  gates.noalias() = p.w_input * x;
  gates.noalias() += p.w_hidden * h_prev;
  gates.colwise() += p.bias;

  LstmStep out;
  LstmCache &cache = out.cache;
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.i = sigmoid(gates.topRows(hd));
  cache.f = sigmoid(gates.middleRows(hd, hd));
  cache.g = gates.middleRows(2 * hd, hd).array().tanh().matrix();
  cache.o = sigmoid(gates.bottomRows(hd));
  out.c = (cache.f.array() * c_prev.array() + cache.i.array() * cache.g.array()).matrix();
  cache.tanh_c = out.c.array().tanh().matrix();
  out.h = (cache.o.array() * cache.tanh_c.array()).matrix();
  require(out.h.allFinite() && out.c.allFinite(), ErrorCode::Numeric,
          "lstm: non-finite state (exploding weights?)");
  return out;
}

void lstm_cell_backward(const LstmParams &p, const LstmCache &cache, const Tensor2 &dh,
                        const Tensor2 &dc, LstmParams &grad, Tensor2 &dx, Tensor2 &dh_prev,
                        Tensor2 &dc_prev) {
  const Eigen::Index hd = p.hidden();
  const Eigen::Index batch = cache.x.cols();
  require(dh.rows() == hd && dc.rows() == hd && dh.cols() == batch && dc.cols() == batch,
          ErrorCode::Shape, "lstm_backward: gradient shape mismatch");

  const auto i = cache.i.array();
  const auto f = cache.f.array();
  const auto g = cache.g.array();
  const auto o = cache.o.array();
  const auto tc = cache.tanh_c.array();

  const Eigen::ArrayXXd dc_total = dc.array() + dh.array() * o * (1.0 - tc.square());

  Tensor2 dgates(4 * hd, batch);
  dgates.topRows(hd) = (dc_total * g * i * (1.0 - i)).matrix();
  dgates.middleRows(hd, hd) = (dc_total * cache.c_prev.array() * f * (1.0 - f)).matrix();
  dgates.middleRows(2 * hd, hd) = (dc_total * i * (1.0 - g.square())).matrix();
  dgates.bottomRows(hd) = (dh.array() * tc * o * (1.0 - o)).matrix();

  grad.w_input.noalias() += dgates * cache.x.transpose();
  grad.w_hidden.noalias() += dgates * cache.h_prev.transpose();
  grad.bias += dgates.rowwise().sum();

  dx.noalias() = p.w_input.transpose() * dgates;
  dh_prev.noalias() = p.w_hidden.transpose() * dgates;
  dc_prev = (dc_total * f).matrix();
}

Vector softmax(const Vector &v) {
  require(v.size() > 0, ErrorCode::InvalidArgument, "softmax of an empty vector");
  require(v.allFinite(), ErrorCode::Numeric, "softmax input is not finite");
  const double peak = v.maxCoeff();
  Vector e = (v.array() - peak).exp().matrix();
  return e / e.sum();
}

MseResult mse_loss(const Vector &pred, const Vector &target) {
  require(pred.size() == target.size() && pred.size() > 0, ErrorCode::Shape,
          "mse: length mismatch");
  const double k = static_cast<double>(pred.size());
  const Vector diff = pred - target;
  return {diff.squaredNorm() / k, (2.0 / k) * diff};
}

AdamState::AdamState(AdamConfig cfg, std::span<const std::size_t> block_sizes) : config(cfg) {
  for (std::size_t n : block_sizes) {
    first_moment.emplace_back(n, 0.0);
    second_moment.emplace_back(n, 0.0);
  }
}

void adam_step(AdamState &state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  require(params.size() == grads.size() && params.size() == state.first_moment.size(),
          ErrorCode::Shape, "adam: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].size() == grads[b].size() &&
                params[b].size() == state.first_moment[b].size(),
            ErrorCode::Shape, "adam: block " + std::to_string(b) + " size mismatch");
    for (double g : grads[b]) {
      require(std::isfinite(g), ErrorCode::Numeric, "adam: non-finite gradient");
    }
  }

  ++state.step;
  const AdamConfig &c = state.config;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto &m = state.first_moment[b];
    auto &v = state.second_moment[b];
    const auto &g = grads[b];
    auto &p = params[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto &b : blocks) {
    worst = std::max(worst, b.max_rel_error);
  }
  return worst;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

// Shared driver: `diff()` returns loss(w + h) - loss(w - h) for the entry
// currently being perturbed, with the perturbation applied by `set`.
template <class Diff>
GradCheckReport grad_check_impl(std::span<const ParamView> params,
                                std::span<const std::span<const double>> analytic,
                                double tolerance, std::size_t max_entries_per_block, double h,
                                Diff &&diff) {
  require(params.size() == analytic.size(), ErrorCode::Shape,
          "grad_check: block count mismatch");
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto values = params[b].values;
    require(values.size() == analytic[b].size(), ErrorCode::Shape,
            "grad_check: block " + params[b].name + " size mismatch");
    std::size_t stride = 1;
    if (max_entries_per_block > 0 && values.size() > max_entries_per_block) {
      stride = (values.size() + max_entries_per_block - 1) / max_entries_per_block;
    }
    GradCheckBlock block{params[b].name, 0.0, 0};
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      const double numeric = diff(values[i], saved) / (2.0 * h);
      values[i] = saved;
      block.max_rel_error = std::max(block.max_rel_error, relative_error(analytic[b][i], numeric));
      ++block.checked;
    }
    report.blocks.push_back(block);
  }
  return report;
}

} // namespace

GradCheckReport grad_check(const std::function<double()> &loss,
                           std::span<const ParamView> params,
                           std::span<const std::span<const double>> analytic, double tolerance,
                           std::size_t max_entries_per_block, double h) {
  const double base = loss();
  require(base == loss(), ErrorCode::InvalidArgument,
          "grad_check: loss closure is not deterministic");
  return grad_check_impl(params, analytic, tolerance, max_entries_per_block, h,
                         [&](double &v, double saved) {
                           v = saved + h;
                           const double up = loss();
                           v = saved - h;
                           return up - loss();
                         });
}

GradCheckReport grad_check_squares(const std::function<LeastSquaresTerms()> &terms,
                                   std::span<const ParamView> params,
                                   std::span<const std::span<const double>> analytic,
                                   double tolerance, std::size_t max_entries_per_block, double h) {
  const LeastSquaresTerms base = terms();
  require(base.predictions.size() == base.targets.size(), ErrorCode::Shape,
          "grad_check: predictions and targets differ in length");
  require(base.predictions == terms().predictions, ErrorCode::InvalidArgument,
          "grad_check: closure is not deterministic");
  return grad_check_impl(params, analytic, tolerance, max_entries_per_block, h,
                         [&](double &v, double saved) {
                           v = saved + h;
                           const Vector up = terms().predictions;
                           v = saved - h;
                           const Vector down = terms().predictions;
                           require(up.size() == base.targets.size() &&
                                       down.size() == base.targets.size(),
                                   ErrorCode::Shape, "grad_check: term count changed");
                           return base.scale *
                                  ((up - down).array() *
                                   (up + down - 2.0 * base.targets).array())
                                      .sum();
                         });
}

void init_linear(Linear &layer, std::mt19937_64 &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(layer.in(), 1)));
  uniform_fill(layer.weight, bound, rng);
  uniform_fill(layer.bias.data(), layer.bias.size(), bound, rng);
}

void init_lstm(LstmParams &p, std::mt19937_64 &rng) {
  const Eigen::Index hd = p.hidden();
  uniform_fill(p.w_input, 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(p.in(), 1))),
               rng);
  uniform_fill(p.w_hidden, 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(hd, 1))),
               rng);
  p.bias.setZero();
  p.bias.segment(hd, hd).setOnes();
}

} // namespace canids::nn

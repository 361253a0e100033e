#include "ocsvm.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>

namespace canids {

namespace {

// LRU cache of kernel rows. With room for every row it degenerates to the
// full precomputed matrix.
class KernelRows {
public:
  KernelRows(std::vector<double> points, std::size_t n, std::size_t dim, double gamma,
             std::size_t cache_bytes)
      : points_(std::move(points)), n_(n), dim_(dim), gamma_(gamma), slot_of_(n, -1) {
    const std::size_t row_bytes = std::max<std::size_t>(1, n * sizeof(double));
    capacity_ = std::clamp<std::size_t>(cache_bytes / row_bytes, 2, n);
  }

  const double *row(std::size_t i) {
    if (slot_of_[i] >= 0) {
      const auto s = static_cast<std::size_t>(slot_of_[i]);
      lru_.splice(lru_.begin(), lru_, where_[s]);
      return rows_[s].data();
    }
    std::size_t s;
    if (rows_.size() < capacity_) {
      s = rows_.size();
      rows_.emplace_back(n_);
      where_.emplace_back();
      owner_.push_back(i);
    } else {
      s = lru_.back();
      lru_.pop_back();
      slot_of_[owner_[s]] = -1;
      owner_[s] = i;
    }
    fill(i, rows_[s]);
    lru_.push_front(s);
    where_[s] = lru_.begin();
    slot_of_[i] = static_cast<long>(s);
    return rows_[s].data();
  }

private:
  void fill(std::size_t i, std::vector<double> &out) const {
    const double *xi = points_.data() + i * dim_;
    for (std::size_t t = 0; t < n_; ++t) {
      out[t] = rbf_kernel(xi, points_.data() + t * dim_, dim_, gamma_);
    }
  }

  std::vector<double> points_;
  std::size_t n_, dim_;
  double gamma_;
  std::size_t capacity_ = 2;
  std::vector<std::vector<double>> rows_;
  std::vector<std::size_t> owner_;
  std::vector<long> slot_of_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> where_;
};

constexpr double kTau = 1e-12;

} // namespace

double rbf_kernel(const double *a, const double *b, std::size_t dim, double gamma) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

OcsvmModel fit_ocsvm(const Eigen::MatrixXd &points, const OcsvmParams &params, std::uint64_t) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto dim = static_cast<std::size_t>(points.cols());
  require(n >= 2, ErrorCode::InvalidArgument, "ocsvm: need at least two training points");
  require(dim >= 1, ErrorCode::InvalidArgument, "ocsvm: points have no features");
  require(params.nu > 0.0 && params.nu <= 1.0, ErrorCode::InvalidArgument,
          "ocsvm: nu must lie in (0, 1]");
  require(points.allFinite(), ErrorCode::Numeric, "ocsvm: training points are not finite");
  const double gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(dim);
  require(std::isfinite(gamma), ErrorCode::InvalidArgument, "ocsvm: gamma must be finite");
  require(params.tol > 0.0, ErrorCode::InvalidArgument, "ocsvm: tol must be positive");

  std::vector<double> flat(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      flat[i * dim + j] = points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  KernelRows kernel(flat, n, dim, gamma, params.cache_mb * 1024 * 1024);

  const double nu_n = params.nu * static_cast<double>(n);
  const double c = 1.0 / nu_n;
  std::vector<double> alpha(n, 0.0);
  const auto full = std::min(n, static_cast<std::size_t>(std::floor(nu_n)));
  for (std::size_t i = 0; i < full; ++i) {
    alpha[i] = c;
  }
  if (full < n) {
    alpha[full] = (nu_n - static_cast<double>(full)) * c;
  }

  std::vector<double> grad(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) {
      continue;
    }
    const double *qi = kernel.row(i);
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += alpha[i] * qi[t];
    }
  }

  OcsvmModel model;
  model.dim = dim;
  model.nu = params.nu;
  model.gamma = gamma;
  model.n_train = n;

  std::uint64_t iter = 0;
  double violation = 0.0;
  for (;;) {
    // i: most violating index that may still grow; j: second-order choice
    // among indices that may shrink.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] < c && -grad[t] >= gmax) {
        gmax = -grad[t];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    const double *qi = i < n ? kernel.row(i) : nullptr;
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] <= 0.0) {
        continue;
      }
      gmax2 = std::max(gmax2, grad[t]);
      if (qi == nullptr) {
        continue;
      }
      const double b = gmax + grad[t];
      if (b > 0.0) {
        double a = 2.0 - 2.0 * qi[t];
        if (a <= 0.0) {
          a = kTau;
        }
        const double obj = -(b * b) / a;
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    violation = gmax + gmax2;
    if (i == n || j == n || violation * nu_n < params.tol) {
      model.converged = true;
      break;
    }
    if (iter >= params.max_iter) {
      break;
    }
    ++iter;

    const double *qj = kernel.row(j);
    qi = kernel.row(i);
    double quad = 2.0 - 2.0 * qi[j];
    if (quad <= 0.0) {
      quad = kTau;
    }
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    const double delta = (grad[i] - grad[j]) / quad;
    const double sum = old_i + old_j;
    double ai = old_i - delta;
    double aj = old_j + delta;
    if (sum > c) {
      if (ai > c) {
        ai = c;
        aj = sum - c;
      }
    } else if (aj < 0.0) {
      aj = 0.0;
      ai = sum;
    }
    if (sum > c) {
      if (aj > c) {
        aj = c;
        ai = sum - c;
      }
    } else if (ai < 0.0) {
      ai = 0.0;
      aj = sum;
    }
    alpha[i] = ai;
    alpha[j] = aj;
    const double di = ai - old_i;
    const double dj = aj - old_j;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += qi[t] * di + qj[t] * dj;
    }
  }
  model.iterations = iter;
  model.kkt_violation = std::max(0.0, violation);

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] >= c) {
      lb = std::max(lb, grad[t]);
    } else if (alpha[t] <= 0.0) {
      ub = std::min(ub, grad[t]);
    } else {
      free_sum += grad[t];
      ++free_count;
    }
  }
  if (free_count > 0) {
    model.rho = free_sum / static_cast<double>(free_count);
  } else if (std::isinf(ub)) {
    model.rho = lb;
  } else if (std::isinf(lb)) {
    model.rho = ub;
  } else {
    model.rho = 0.5 * (ub + lb);
  }

  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      sv.push_back(t);
    }
  }
  model.support.resize(static_cast<Eigen::Index>(sv.size()), static_cast<Eigen::Index>(dim));
  model.alphas.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support.row(static_cast<Eigen::Index>(s)) = points.row(static_cast<Eigen::Index>(sv[s]));
    model.alphas(static_cast<Eigen::Index>(s)) = alpha[sv[s]];
  }
  model.support_index = std::move(sv);
  return model;
}

double ocsvm_decision(const OcsvmModel &model, const double *x) {
  double f = 0.0;
  std::vector<double> row(model.dim);
  for (Eigen::Index s = 0; s < model.support.rows(); ++s) {
    for (std::size_t j = 0; j < model.dim; ++j) {
      row[j] = model.support(s, static_cast<Eigen::Index>(j));
    }
    f += model.alphas(s) * rbf_kernel(row.data(), x, model.dim, model.gamma);
  }
  return f - model.rho;
}

double ocsvm_decision(const OcsvmModel &model, const Eigen::VectorXd &x) {
  require(static_cast<std::size_t>(x.size()) == model.dim, ErrorCode::Shape,
          "ocsvm: input has dimension " + std::to_string(x.size()) + ", model expects " +
              std::to_string(model.dim));
  return ocsvm_decision(model, x.data());
}

Verdict classify(const OcsvmModel &model, const Eigen::VectorXd &x) {
  return ocsvm_decision(model, x) < 0.0 ? Verdict::Anomaly : Verdict::Normal;
}

Eigen::VectorXd dense_alphas(const OcsvmModel &model) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.n_train));
  for (std::size_t s = 0; s < model.support_index.size(); ++s) {
    out(static_cast<Eigen::Index>(model.support_index[s])) = model.alphas(static_cast<Eigen::Index>(s));
  }
  return out;
}

void write_ocsvm(BinaryWriter &w, const OcsvmModel &m) {
  w.u32(static_cast<std::uint32_t>(m.dim));
  w.f64(m.nu);
  w.f64(m.gamma);
  w.f64(m.rho);
  w.u64(m.n_train);
  w.u8(m.converged ? 1 : 0);
  w.u64(m.iterations);
  w.f64(m.kkt_violation);
  w.u32(static_cast<std::uint32_t>(m.support_index.size()));
  for (std::size_t idx : m.support_index) {
    w.u64(idx);
  }
  w.matrix(m.support);
  w.matrix(m.alphas);
}

OcsvmModel read_ocsvm(BinaryReader &r) {
  OcsvmModel m;
  m.dim = r.u32();
  m.nu = r.f64();
  m.gamma = r.f64();
  m.rho = r.f64();
  m.n_train = r.u64();
  m.converged = r.u8() != 0;
  m.iterations = r.u64();
  m.kkt_violation = r.f64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t s = 0; s < count; ++s) {
    m.support_index.push_back(r.u64());
  }
  m.support = r.matrix();
  const Eigen::MatrixXd a = r.matrix();
  require(m.support.rows() == count && a.rows() == count && a.cols() == 1 &&
              m.support.cols() == static_cast<Eigen::Index>(m.dim),
          ErrorCode::Shape, r.origin() + ": inconsistent support-vector block");
  require(m.nu > 0.0 && m.nu <= 1.0 && m.gamma > 0.0, ErrorCode::Format,
          r.origin() + ": invalid ocsvm parameters");
  m.alphas = a.col(0);
  return m;
}

} // namespace canids

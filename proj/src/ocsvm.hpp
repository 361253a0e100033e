#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace canids {

class BinaryWriter;
class BinaryReader;

struct OcsvmParams {
  double nu = 0.01;
  double gamma = 0.0; // <= 0 selects 1 / dimension
  // Stopping tolerance on the maximal KKT violation, measured on the
  // unnormalised scale (alphas summing to nu * n) so that values carry over
  // from libsvm-style solvers.
  double tol = 1e-3;
  std::uint64_t max_iter = 10'000'000;
  std::size_t cache_mb = 400;
};

// f(x) = sum_i alpha_i K(sv_i, x) - rho with alphas summing to 1.
struct OcsvmModel {
  std::size_t dim = 0;
  double nu = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  std::size_t n_train = 0;
  Eigen::MatrixXd support;             // n_sv x dim
  Eigen::VectorXd alphas;              // n_sv
  std::vector<std::size_t> support_index; // rows of the training matrix

  // Solver diagnostics.
  bool converged = false;
  std::uint64_t iterations = 0;
  double kkt_violation = 0.0; // normalised scale

  std::size_t support_count() const { return static_cast<std::size_t>(alphas.size()); }
  double upper_bound() const { return 1.0 / (nu * static_cast<double>(n_train)); }

  bool operator==(const OcsvmModel &) const = default;
};

double rbf_kernel(const double *a, const double *b, std::size_t dim, double gamma);

// Points are rows. Deterministic; the seed is accepted for interface
// symmetry but the solver does not draw random numbers.
OcsvmModel fit_ocsvm(const Eigen::MatrixXd &points, const OcsvmParams &params,
                     std::uint64_t seed = 0);

double ocsvm_decision(const OcsvmModel &model, const Eigen::VectorXd &x);
double ocsvm_decision(const OcsvmModel &model, const double *x);

enum class Verdict { Normal, Anomaly };

// Anomaly iff decision < 0; zero counts as normal.
Verdict classify(const OcsvmModel &model, const Eigen::VectorXd &x);

// Full-length dual vector (zeros for non-support points).
Eigen::VectorXd dense_alphas(const OcsvmModel &model);

void write_ocsvm(BinaryWriter &w, const OcsvmModel &model);
OcsvmModel read_ocsvm(BinaryReader &r);

} // namespace canids

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace canids {

enum class BandMode { Sma, Ewma };

struct BollingerConfig {
  std::size_t window = 20; // SMA window, or EWMA span
  double band_width = 2.0;
  BandMode mode = BandMode::Sma;

  void validate() const;
};

struct BandPoint {
  double mean = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  bool flag = false;
  bool warmup = true;
  // band_width minus the standardised distance from the mean; negative
  // exactly when flagged, lower is more anomalous.
  double score = 0.0;
};

// Bands at step t are built from the values before t.
std::vector<BandPoint> bollinger_flags(std::span<const double> series, const BollingerConfig &cfg);

struct MessageFlags {
  std::vector<bool> flags;
  std::vector<double> scores; // minimum over signals
};

// k x n signal matrix; a message is flagged when any of its signals is.
MessageFlags bollinger_message_flags(const Eigen::MatrixXd &signals, const BollingerConfig &cfg);

struct LofConfig {
  std::size_t k_neighbors = 20;
  double score_threshold = 1.5;
};

inline constexpr double kLofDistanceFloor = 1e-12;

// Points are rows. Brute-force neighbours; ties at the k-distance are
// included in the neighbourhood.
std::vector<double> lof_scores(const Eigen::MatrixXd &points, const LofConfig &cfg);

} // namespace canids

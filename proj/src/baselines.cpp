#include "baselines.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace canids {

namespace {

constexpr double kScoreFloor = -1e9;

void judge(BandPoint &p, double x, double mean, double sigma, double width) {
  p.mean = mean;
  p.upper = mean + width * sigma;
  p.lower = mean - width * sigma;
  p.warmup = false;
  p.flag = x > p.upper || x < p.lower;
  const double dist = std::abs(x - mean);
  double z;
  if (sigma > 0.0) {
    z = dist / sigma;
  } else {
    z = dist > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  p.score = std::max(width - z, kScoreFloor);
}

} // namespace

void BollingerConfig::validate() const {
  require(window >= 2, ErrorCode::InvalidArgument, "bollinger: window must be at least 2");
  require(band_width > 0.0, ErrorCode::InvalidArgument, "bollinger: band width must be positive");
}

std::vector<BandPoint> bollinger_flags(std::span<const double> series, const BollingerConfig &cfg) {
  cfg.validate();
  require(series.size() >= cfg.window, ErrorCode::InvalidArgument,
          "bollinger: series of length " + std::to_string(series.size()) +
              " is shorter than the window " + std::to_string(cfg.window));
  const std::size_t n = series.size();
  std::vector<BandPoint> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    out[t].mean = series[t];
    out[t].upper = series[t];
    out[t].lower = series[t];
    out[t].score = cfg.band_width;
  }

  if (cfg.mode == BandMode::Sma) {
    const std::size_t w = cfg.window;
    for (std::size_t t = w; t < n; ++t) {
      double mean = 0.0;
      for (std::size_t j = t - w; j < t; ++j) {
        mean += series[j];
      }
      mean /= static_cast<double>(w);
      double var = 0.0;
      for (std::size_t j = t - w; j < t; ++j) {
        const double d = series[j] - mean;
        var += d * d;
      }
      var /= static_cast<double>(w);
      judge(out[t], series[t], mean, std::sqrt(var), cfg.band_width);
    }
    return out;
  }

  const double lambda = 2.0 / (static_cast<double>(cfg.window) + 1.0);
  double mean = series[0];
  double var = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    const double x = series[t];
    if (t >= cfg.window) {
      judge(out[t], x, mean, std::sqrt(var), cfg.band_width);
    }
    const double d = x - mean;
    mean += lambda * d;
    var = (1.0 - lambda) * (var + lambda * d * d);
    if (!out[t].warmup) {
      continue;
    }
    out[t].mean = mean;
    out[t].upper = mean;
    out[t].lower = mean;
  }
  return out;
}

MessageFlags bollinger_message_flags(const Eigen::MatrixXd &signals, const BollingerConfig &cfg) {
  const auto n = static_cast<std::size_t>(signals.cols());
  MessageFlags out;
  out.flags.assign(n, false);
  out.scores.assign(n, std::numeric_limits<double>::infinity());
  std::vector<double> series(n);
  for (Eigen::Index s = 0; s < signals.rows(); ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      series[t] = signals(s, static_cast<Eigen::Index>(t));
    }
    const auto bands = bollinger_flags(series, cfg);
    for (std::size_t t = 0; t < n; ++t) {
      out.flags[t] = out.flags[t] || bands[t].flag;
      out.scores[t] = std::min(out.scores[t], bands[t].score);
    }
  }
  return out;
}

std::vector<double> lof_scores(const Eigen::MatrixXd &points, const LofConfig &cfg) {
  const auto n = static_cast<std::size_t>(points.rows());
  const std::size_t k = cfg.k_neighbors;
  require(k >= 1, ErrorCode::InvalidArgument, "lof: k_neighbors must be at least 1");
  require(n > k, ErrorCode::InvalidArgument,
          "lof: need more than " + std::to_string(k) + " points, got " + std::to_string(n));

  const Eigen::MatrixXd pts = points.transpose(); // one column per point
  auto dist = [&](std::size_t a, std::size_t b) {
    const double d = (pts.col(static_cast<Eigen::Index>(a)) - pts.col(static_cast<Eigen::Index>(b))).norm();
    return std::max(d, kLofDistanceFloor);
  };

  std::vector<std::vector<std::size_t>> hood(n);
  std::vector<std::vector<double>> hood_dist(n);
  std::vector<double> kdist(n);
  std::vector<double> d(n);
  std::vector<double> scratch;
  for (std::size_t p = 0; p < n; ++p) {
    scratch.clear();
    for (std::size_t o = 0; o < n; ++o) {
      d[o] = o == p ? std::numeric_limits<double>::infinity() : dist(p, o);
      if (o != p) {
        scratch.push_back(d[o]);
      }
    }
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     scratch.end());
    kdist[p] = scratch[k - 1];
    for (std::size_t o = 0; o < n; ++o) {
      if (o != p && d[o] <= kdist[p]) {
        hood[p].push_back(o);
        hood_dist[p].push_back(d[o]);
      }
    }
  }

  std::vector<double> lrd(n);
  for (std::size_t p = 0; p < n; ++p) {
    double total = 0.0;
    for (std::size_t m = 0; m < hood[p].size(); ++m) {
      total += std::max(kdist[hood[p][m]], hood_dist[p][m]);
    }
    lrd[p] = static_cast<double>(hood[p].size()) / total;
  }

  std::vector<double> lof(n);
  for (std::size_t p = 0; p < n; ++p) {
    double total = 0.0;
    for (std::size_t o : hood[p]) {
      total += lrd[o];
    }
    lof[p] = total / (static_cast<double>(hood[p].size()) * lrd[p]);
  }
  return lof;
}

} // namespace canids

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqsafe/distance.hpp"
#include "sqsafe/smoothing.hpp"
#include "sqsafe/superquadric.hpp"

// Numerical studies shared by the command-line tool and the acceptance
// suite: the implicit-function sweep, the gradient-accuracy grid and the
// pair-count scaling benchmark.
namespace sqsafe::studies {

// ------------------------------------------------------------ implicit sweep

struct FigTwoSample {
  double x = 0.0;
  double f_star = 0.0;      ///< implicit-function surrogate
  double df_dx = 0.0;
  double f_gauge = 0.0;     ///< independent bisection value of f_star
  double d = 0.0;           ///< signed distance from the polytope pipeline
  double grad_norm = 0.0;   ///< |d d / d t_B|
  bool converged = false;

  nlohmann::json to_json() const;
};

/// The two-box pair with B at (x, 3, 0) for `samples` x values spread
/// evenly over [x_min, x_max].
std::vector<FigTwoSample> figtwo(int samples = 61, double x_min = -3.0, double x_max = 3.0, int n = 200);

// ------------------------------------------------------------ gradient study

enum class Orientation { kFaceFace, kVertexVertex };
const char* to_string(Orientation o);

struct GradCell {
  double exponent = 1.0;
  Orientation orientation = Orientation::kFaceFace;
  double d_c = 0.0;
  double temperature = 0.0;
  double estimate = 0.0;   ///< x-component of d d / d t_B from the smoothed pipeline
  double reference = 0.0;  ///< central difference of the reference SDF
  double rel_error = 0.0;
  bool converged = true;

  nlohmann::json to_json() const;
};

/// Two SQs with a = 0.1 and e1 = e2 = `exponent`, centroids `d_c` apart
/// along world x. Face-face keeps both axis-aligned; vertex-vertex turns a
/// body diagonal onto the x axis.
class GradStudy {
 public:
  explicit GradStudy(int n = 200, double fd_step = 1e-6);
  GradCell cell(double exponent, Orientation o, double d_c, double temperature);
  std::vector<GradCell> grid(const std::vector<double>& exponents, const std::vector<Orientation>& orientations,
                             const std::vector<double>& d_cs, const std::vector<double>& temperatures);

 private:
  const ConvexPolytope& polytope(double exponent);
  int n_;
  double fd_step_;
  std::vector<std::pair<double, std::unique_ptr<ConvexPolytope>>> shapes_;
};

// ------------------------------------------------------------ scaling bench

struct BenchPoint {
  int pairs = 0;
  int workers = 1;
  int cycles = 0;
  double mean = 0.0;    ///< seconds per distance+gradient cycle
  double stddev = 0.0;

  nlohmann::json to_json() const;
};

/// A fixed random set of separated SQ pairs; each cycle evaluates distance
/// and gradient for the first `pairs` of them after a small pose drift.
class PairBenchmark {
 public:
  PairBenchmark(int max_pairs, std::uint64_t seed = 7, int n = 200, int shapes = 12);
  BenchPoint run(int pairs, int workers, int cycles, int warmup = 3);
  int max_pairs() const { return static_cast<int>(pairs_.size()); }

 private:
  struct Pair {
    int a = 0;
    int b = 0;
    Pose pose_a;
    Pose pose_b;
    Eigen::Vector3d drift = Eigen::Vector3d::Zero();
  };
  std::vector<std::unique_ptr<ConvexPolytope>> shapes_;
  std::vector<Pair> pairs_;
};

/// Coefficient of determination of the least-squares line through (x, y).
double r_squared(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sqsafe::studies

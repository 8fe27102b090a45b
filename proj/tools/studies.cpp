#include "studies.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "sqsafe/oracle.hpp"
#include "sqsafe/worker_pool.hpp"

namespace sqsafe::studies {

namespace {

double seconds(std::chrono::steady_clock::duration d) { return std::chrono::duration<double>(d).count(); }

}  // namespace

// ------------------------------------------------------------ implicit sweep

nlohmann::json FigTwoSample::to_json() const {
  return {{"x", x}, {"f_star", f_star}, {"df_dx", df_dx}, {"f_gauge", f_gauge},
          {"d", d}, {"grad_norm", grad_norm}, {"converged", converged}};
}

std::vector<FigTwoSample> figtwo(int samples, double x_min, double x_max, int n) {
  if (samples < 2) throw std::invalid_argument("figtwo: need at least two samples");
  const Superquadric s1(0.5, 1.5, 1.0, 0.2, 0.2);
  const Superquadric s2(1.0, 0.5, 1.0, 0.2, 0.2);
  const Pose p1 = Pose::from_chart(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, std::numbers::pi / 3));
  const ConvexPolytope poly1 = sample_surface(s1, n, n);
  const ConvexPolytope poly2 = sample_surface(s2, n, n);
  std::vector<FigTwoSample> out;
  for (int i = 0; i < samples; ++i) {
    FigTwoSample s;
    s.x = x_min + (x_max - x_min) * i / (samples - 1);
    const Pose p2 = Pose::from_chart(Eigen::Vector3d(s.x, 3.0, 0.0), Eigen::Vector3d(0, 0, -std::numbers::pi / 4));
    const PosedSq a{s1, p1};
    const PosedSq b{s2, p2};
    const oracle::SurrogateResult r = oracle::implicit_surrogate(a, b);
    s.f_star = r.f_star;
    s.df_dx = r.grad_x;
    s.converged = r.converged;
    s.f_gauge = oracle::implicit_surrogate_gauge(a, b);
    const DistanceQuery q{&poly1, &poly2, p1, p2};
    const WitnessPair w = signed_distance(q);
    s.d = w.distance;
    s.grad_norm = pose_gradient(q, w, SmoothingConfig{}).j_b.head<3>().norm();
    out.push_back(s);
  }
  return out;
}

// ------------------------------------------------------------ gradient study

const char* to_string(Orientation o) { return o == Orientation::kFaceFace ? "face-face" : "vertex-vertex"; }

nlohmann::json GradCell::to_json() const {
  return {{"e", exponent},         {"orientation", to_string(orientation)},
          {"d_c", d_c},            {"temperature", temperature},
          {"estimate", estimate},  {"reference", reference},
          {"rel_error", rel_error}, {"converged", converged}};
}

GradStudy::GradStudy(int n, double fd_step) : n_(n), fd_step_(fd_step) {}

const ConvexPolytope& GradStudy::polytope(double exponent) {
  for (const auto& [e, p] : shapes_) {
    if (e == exponent) return *p;
  }
  shapes_.emplace_back(exponent,
                       std::make_unique<ConvexPolytope>(sample_surface(Superquadric(0.1, 0.1, 0.1, exponent, exponent), n_, n_)));
  return *shapes_.back().second;
}

GradCell GradStudy::cell(double exponent, Orientation o, double d_c, double temperature) {
  GradCell c{exponent, o, d_c, temperature};
  const Superquadric sq(0.1, 0.1, 0.1, exponent, exponent);
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  if (o == Orientation::kVertexVertex) {
    // Body diagonal (1,1,1) onto +x; by symmetry (-1,-1,-1) faces -x.
    R = Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::Ones().normalized(), Eigen::Vector3d::UnitX())
            .toRotationMatrix();
  }
  const Pose pa{Eigen::Vector3d::Zero(), R};
  const Pose pb{Eigen::Vector3d(d_c, 0.0, 0.0), R};
  const ConvexPolytope& poly = polytope(exponent);
  const DistanceQuery q{&poly, &poly, pa, pb};
  const WitnessPair w = signed_distance(q);
  SmoothingConfig cfg;
  cfg.temperature = temperature;
  c.estimate = pose_gradient(q, w, cfg).j_b[0];

  bool ok = true;
  auto sdf = [&](const Vector6d& x) {
    const oracle::SdfReference s = oracle::sdf_reference({sq, pa}, {sq, pb.perturbed(x)});
    ok = ok && s.converged;
    return s.distance;
  };
  c.reference = oracle::fd_gradient(sdf, Vector6d::Zero(), fd_step_)[0];
  c.converged = ok;
  c.rel_error = std::abs(c.estimate - c.reference) / std::max(std::abs(c.reference), 1e-12);
  return c;
}

std::vector<GradCell> GradStudy::grid(const std::vector<double>& exponents,
                                      const std::vector<Orientation>& orientations,
                                      const std::vector<double>& d_cs, const std::vector<double>& temperatures) {
  std::vector<GradCell> out;
  for (double e : exponents) {
    for (Orientation o : orientations) {
      for (double d : d_cs) {
        for (double t : temperatures) out.push_back(cell(e, o, d, t));
      }
    }
  }
  return out;
}

// ------------------------------------------------------------ scaling bench

nlohmann::json BenchPoint::to_json() const {
  return {{"pairs", pairs}, {"workers", workers}, {"cycles", cycles}, {"mean_s", mean}, {"std_s", stddev}};
}

PairBenchmark::PairBenchmark(int max_pairs, std::uint64_t seed, int n, int shapes) {
  if (max_pairs < 0 || shapes < 1) throw std::invalid_argument("PairBenchmark: invalid sizes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Superquadric> sqs;
  for (int i = 0; i < shapes; ++i) {
    sqs.emplace_back(0.03 + 0.07 * uni(rng), 0.03 + 0.07 * uni(rng), 0.03 + 0.07 * uni(rng), 0.2 + 1.6 * uni(rng),
                     0.2 + 1.6 * uni(rng));
    shapes_.push_back(std::make_unique<ConvexPolytope>(sample_surface(sqs.back(), n, n)));
  }
  auto unit = [&] {
    Eigen::Vector3d v;
    do {
      v = Eigen::Vector3d(uni(rng), uni(rng), uni(rng)) * 2.0 - Eigen::Vector3d::Ones();
    } while (v.squaredNorm() > 1.0 || v.squaredNorm() < 1e-6);
    return v.normalized();
  };
  for (int i = 0; i < max_pairs; ++i) {
    Pair p;
    p.a = static_cast<int>(rng() % static_cast<std::uint64_t>(shapes));
    p.b = static_cast<int>(rng() % static_cast<std::uint64_t>(shapes));
    p.pose_a = Pose::from_chart(Eigen::Vector3d(uni(rng), uni(rng), uni(rng)), unit() * std::numbers::pi * uni(rng));
    // Centres are bounding radii plus up to 0.2 m apart, so every pair is
    // separated and within the usual activation radius.
    const double gap = sqs[static_cast<size_t>(p.a)].bounding_radius() + sqs[static_cast<size_t>(p.b)].bounding_radius() +
                       0.01 + 0.19 * uni(rng);
    p.pose_b = Pose::from_chart(p.pose_a.translation + gap * unit(), unit() * std::numbers::pi * uni(rng));
    p.drift = 1e-3 * unit();
    pairs_.push_back(p);
  }
}

BenchPoint PairBenchmark::run(int pairs, int workers, int cycles, int warmup) {
  if (pairs < 0 || pairs > max_pairs()) throw std::invalid_argument("PairBenchmark::run: pair count out of range");
  if (cycles < 1) throw std::invalid_argument("PairBenchmark::run: need at least one cycle");
  WorkerPool pool(workers);
  std::vector<PairCache> caches(static_cast<size_t>(pairs));
  std::vector<double> sink(static_cast<size_t>(pairs));
  std::vector<double> times;
  for (int c = -warmup; c < cycles; ++c) {
    // Small back-and-forth drift so warm starts see realistic motion.
    const double phase = std::sin(0.1 * (c + warmup));
    const auto t0 = std::chrono::steady_clock::now();
    pool.run(pairs, [&](int k) {
      const Pair& p = pairs_[static_cast<size_t>(k)];
      Pose pb = p.pose_b;
      pb.translation += phase * p.drift;
      const DistanceQuery q{shapes_[static_cast<size_t>(p.a)].get(), shapes_[static_cast<size_t>(p.b)].get(), p.pose_a, pb};
      PairCache& cache = caches[static_cast<size_t>(k)];
      const WitnessPair w = signed_distance(q, &cache);
      sink[static_cast<size_t>(k)] = pose_gradient(q, w, SmoothingConfig{}, &cache).j_x[0];
    });
    if (c >= 0) times.push_back(seconds(std::chrono::steady_clock::now() - t0));
  }
  BenchPoint b{pairs, workers, cycles};
  for (double t : times) b.mean += t / cycles;
  for (double t : times) b.stddev += (t - b.mean) * (t - b.mean) / cycles;
  b.stddev = std::sqrt(b.stddev);
  return b;
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("r_squared: need matching samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 1.0;
  return sxy * sxy / (sxx * syy);
}

}  // namespace sqsafe::studies

#include "dyneit/analysis.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "dyneit/popd.hpp"

namespace dyneit {

SmoothnessProbe make_cem_probe(const Mesh& mesh, const ElementGeometry& geom,
                               const std::vector<ExcitationPattern>& patterns,
                               double precision_scale, double lower, double upper) {
  auto factorized = [&mesh, &geom, lower, upper](const Eigen::VectorXd& v) {
    auto system = std::make_shared<CemSystem>(mesh, geom);
    ConductivityField x;
    x.values = v;
    x.lower = lower;
    x.upper = upper;
    system->factorize(x);
    return system;
  };

  SmoothnessProbe probe;
  probe.first = [factorized, patterns, precision_scale](const Eigen::VectorXd& x,
                                                        const Eigen::VectorXd& h) {
    auto system = factorized(x);
    std::vector<double> out;
    for (const auto& pattern : patterns) {
      const CemSolution base = system->solve_pattern(pattern);
      const CemSolution d = directional_derivative(*system, base, pattern, h);
      for (int i = 0; i < system->mesh().electrode_count(); ++i) {
        if (i == pattern.excited) continue;
        out.push_back(precision_scale * d.currents[i]);
      }
    }
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<long>(out.size())).eval();
  };
  probe.second = [factorized, patterns, precision_scale](const Eigen::VectorXd& x,
                                                         const Eigen::VectorXd& h1,
                                                         const Eigen::VectorXd& h2) {
    auto system = factorized(x);
    std::vector<double> out;
    for (const auto& pattern : patterns) {
      const CemSolution base = system->solve_pattern(pattern);
      const CemSolution dd = second_directional(*system, base, pattern, h1, h2);
      for (int i = 0; i < system->mesh().electrode_count(); ++i) {
        if (i == pattern.excited) continue;
        out.push_back(precision_scale * dd.currents[i]);
      }
    }
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<long>(out.size())).eval();
  };
  return probe;
}

SmoothnessEstimate estimate_smoothness(const SmoothnessProbe& probe,
                                       const Eigen::VectorXd& x_center, double delta,
                                       int n_samples, unsigned seed) {
  const int n = static_cast<int>(x_center.size());
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto random_unit = [&] {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    v.normalize();
    return v;
  };

  SmoothnessEstimate estimate;
  estimate.delta = delta;
  estimate.samples = n_samples;
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd x = x_center + delta * unif(rng) * random_unit();
    // Canonical directions first so small sample counts already cover the
    // coarse grid; random directions afterwards.
    Eigen::VectorXd h1;
    if (s < n) {
      h1 = Eigen::VectorXd::Zero(n);
      h1[s] = 1.0;
    } else {
      h1 = random_unit();
    }
    const Eigen::VectorXd h2 = random_unit();
    estimate.s_prime_max = std::max(estimate.s_prime_max, probe.first(x, h1).norm());
    estimate.s_second_max = std::max(estimate.s_second_max, probe.second(x, h1, h2).norm());
  }
  return estimate;
}

ThreePointReport check_three_point(const EnergyProvider& provider, const Eigen::VectorXd& x_bar,
                                   double delta, double lambda_tilde, double d_factor,
                                   int n_samples, unsigned seed,
                                   const std::optional<Eigen::VectorXd>& critical_point,
                                   double lambda_hat) {
  const int n = static_cast<int>(x_bar.size());
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto sample_in_ball = [&](const Eigen::VectorXd& center) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    v.normalize();
    return Eigen::VectorXd(center + delta * unif(rng) * v);
  };

  ThreePointReport report;
  report.samples = n_samples;
  report.worst_margin = std::numeric_limits<double>::infinity();
  report.monotonicity_worst_margin = std::numeric_limits<double>::infinity();
  const double e_bar = provider.value(x_bar);
  const double eps = 0.5 * lambda_tilde;

  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd x = sample_in_ball(x_bar);
    const Eigen::VectorXd z = sample_in_ball(x_bar);
    const Eigen::VectorXd grad_z = provider.grad(z);

    const double lhs = grad_z.dot(x - x_bar);
    const double rhs = provider.value(x) - e_bar + eps * (x - x_bar).squaredNorm() -
                       d_factor * (x - z).squaredNorm();
    const double margin = lhs - rhs;
    report.worst_margin = std::min(report.worst_margin, margin);
    if (margin < 0.0) ++report.violations;

    if (critical_point) {
      const Eigen::VectorXd& x_hat = *critical_point;
      const double mono_lhs = (grad_z - provider.grad(x_hat)).dot(x - x_hat);
      const double mono_rhs =
          lambda_hat * (x - x_hat).squaredNorm() - d_factor * (x - z).squaredNorm();
      const double mono_margin = mono_lhs - mono_rhs;
      report.monotonicity_worst_margin = std::min(report.monotonicity_worst_margin, mono_margin);
      if (mono_margin < 0.0) ++report.monotonicity_violations;
    }
  }
  return report;
}

double estimate_L_grad(const Jacobian& jac) {
  if (jac.matrix.size() == 0) throw NumericError("estimate_L_grad: empty Jacobian");
  return 0.5 * spectral_norm_jjt(jac.matrix);
}

}  // namespace dyneit

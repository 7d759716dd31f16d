#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ladi/flowlat/velocity.hpp"
#include "ladi/numcore/autodiff.hpp"

namespace ladi::flowlat {

inline constexpr double kDefaultTimeClamp = 1e-3;

double clamp_time(double t, double eps_t = kDefaultTimeClamp);

// sigma_t = a sqrt(t / (1 - t)) with t clamped to [eps_t, 1 - eps_t].
double noise_scale(double a, double t, double eps_t = kDefaultTimeClamp);

// Noise level used by the discretised SDE kernel for a step of size dt from
// t: the schedule is evaluated at min(t, 1 - dt) so the first step out of pure
// noise stays finite.
double sde_sigma_t(double a, double t, double dt,
                   double eps_t = kDefaultTimeClamp);

// grad log p_t(x) = -x / t - ((1 - t) / t) v.
std::vector<double> score(std::span<const double> v, std::span<const double> x,
                          double t, double eps_t = kDefaultTimeClamp);

// Every transition kernel here has mean  state * x + velocity * v(x, t)
// and isotropic std `std`; only the coefficients differ.
struct KernelCoeffs {
  double state = 1.0;
  double velocity = 0.0;
  double std = 0.0;

  bool operator==(const KernelCoeffs&) const = default;
};

KernelCoeffs ode_coeffs(double dt);
KernelCoeffs sde_coeffs(double t, double dt, double a,
                        double eps_t = kDefaultTimeClamp);
KernelCoeffs cps_coeffs(double t, double dt, double eta);

std::vector<double> kernel_mean(const KernelCoeffs& k, std::span<const double> x,
                                std::span<const double> v);
ad::Var kernel_mean(const KernelCoeffs& k, std::span<const double> x, ad::Var v);

struct StepResult {
  std::vector<double> next;
  std::vector<double> mean;
  double std = 0.0;
};

std::vector<double> ode_step(const VelocityNet& net, std::span<const double> params,
                             std::span<const double> x, double t, double dt,
                             std::span<const double> cond);

StepResult sde_step(const VelocityNet& net, std::span<const double> params,
                    std::span<const double> x, double t, double dt, double a,
                    std::span<const double> noise, std::span<const double> cond,
                    double eps_t = kDefaultTimeClamp);

// (x0_hat, x1_hat) = (x - t v, x + (1 - t) v).
std::pair<std::vector<double>, std::vector<double>> cps_predict(
    std::span<const double> x, double t, std::span<const double> v);

StepResult cps_step(const VelocityNet& net, std::span<const double> params,
                    std::span<const double> x, double t, double dt, double eta,
                    std::span<const double> noise, std::span<const double> cond);

// simplified: -|x - mu|^2. Full: Gaussian log-density with isotropic std.
double transition_logprob(std::span<const double> x_next,
                          std::span<const double> mean, double std,
                          bool simplified);
ad::Var transition_logprob(std::span<const double> x_next, ad::Var mean,
                           double std, bool simplified);

// Closed-form per-step KL between the SDE kernels of two velocity fields.
double kl_term(std::span<const double> v, std::span<const double> v_ref, double t,
               double a, double dt, double eps_t = kDefaultTimeClamp);
ad::Var kl_term(ad::Var v, std::span<const double> v_ref, double t, double a,
                double dt, double eps_t = kDefaultTimeClamp);

// CPS strength whose per-step std equals the Euler-Maruyama std at t = 0.5.
double default_cps_eta(double a, int steps);

}  // namespace ladi::flowlat

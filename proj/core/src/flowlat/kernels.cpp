#include "ladi/flowlat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ladi/common.hpp"

namespace ladi::flowlat {

namespace {

const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void check_same(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("latent dimension mismatch");
}

}  // namespace

double clamp_time(double t, double eps_t) {
  return std::clamp(t, eps_t, 1.0 - eps_t);
}

double noise_scale(double a, double t, double eps_t) {
  const double tc = clamp_time(t, eps_t);
  return a * std::sqrt(tc / (1.0 - tc));
}

double sde_sigma_t(double a, double t, double dt, double eps_t) {
  return noise_scale(a, std::min(t, 1.0 - dt), eps_t);
}

std::vector<double> score(std::span<const double> v, std::span<const double> x,
                          double t, double eps_t) {
  check_same(v, x);
  const double tc = std::max(t, eps_t);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = -x[i] / tc - ((1.0 - tc) / tc) * v[i];
  }
  return out;
}

KernelCoeffs ode_coeffs(double dt) { return {1.0, -dt, 0.0}; }

KernelCoeffs sde_coeffs(double t, double dt, double a, double eps_t) {
  if (!(dt > 0.0)) throw DomainError("sde step needs dt > 0");
  const double sigma = sde_sigma_t(a, t, dt, eps_t);
  const double tc = clamp_time(t, eps_t);
  const double k = sigma * sigma / (2.0 * tc);
  // mu = x - (v + k (x + (1 - t) v)) dt, integrating toward t = 0.
  return {1.0 - k * dt, -dt * (1.0 + k * (1.0 - tc)), sigma * std::sqrt(dt)};
}

KernelCoeffs cps_coeffs(double t, double dt, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("CPS eta must lie in [0, 1]");
  const double s = t - dt;
  if (s < -1e-12) throw DomainError("CPS step past t = 0");
  const double angle = eta * std::numbers::pi / 2.0;
  const double c = std::cos(angle);
  // mu = (1 - s) (x - t v) + s c (x + (1 - t) v)
  return {(1.0 - s) + s * c, -(1.0 - s) * t + s * c * (1.0 - t),
          s * std::sin(angle)};
}

std::vector<double> kernel_mean(const KernelCoeffs& k, std::span<const double> x,
                                std::span<const double> v) {
  check_same(x, v);
  std::vector<double> mu(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mu[i] = k.state * x[i] + k.velocity * v[i];
  return mu;
}

ad::Var kernel_mean(const KernelCoeffs& k, std::span<const double> x, ad::Var v) {
  std::vector<double> sx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sx[i] = k.state * x[i];
  ad::Tape& tape = *v.tape();
  return ad::add(tape.constant(std::move(sx)), ad::scale(v, k.velocity));
}

std::vector<double> ode_step(const VelocityNet& net, std::span<const double> params,
                             std::span<const double> x, double t, double dt,
                             std::span<const double> cond) {
  if (t - dt < -1e-12) throw DomainError("ode step past t = 0");
  return kernel_mean(ode_coeffs(dt), x, net(params, x, t, cond));
}

namespace {

StepResult finish(const KernelCoeffs& k, std::span<const double> x,
                  std::span<const double> v, std::span<const double> noise) {
  check_same(x, noise);
  StepResult r;
  r.mean = kernel_mean(k, x, v);
  r.std = k.std;
  r.next = r.mean;
  for (std::size_t i = 0; i < r.next.size(); ++i) r.next[i] += k.std * noise[i];
  return r;
}

}  // namespace

StepResult sde_step(const VelocityNet& net, std::span<const double> params,
                    std::span<const double> x, double t, double dt, double a,
                    std::span<const double> noise, std::span<const double> cond,
                    double eps_t) {
  return finish(sde_coeffs(t, dt, a, eps_t), x, net(params, x, t, cond), noise);
}

std::pair<std::vector<double>, std::vector<double>> cps_predict(
    std::span<const double> x, double t, std::span<const double> v) {
  check_same(x, v);
  std::vector<double> x0(x.size()), x1(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x0[i] = x[i] - t * v[i];
    x1[i] = x[i] + (1.0 - t) * v[i];
  }
  return {std::move(x0), std::move(x1)};
}

StepResult cps_step(const VelocityNet& net, std::span<const double> params,
                    std::span<const double> x, double t, double dt, double eta,
                    std::span<const double> noise, std::span<const double> cond) {
  return finish(cps_coeffs(t, dt, eta), x, net(params, x, t, cond), noise);
}

double transition_logprob(std::span<const double> x_next,
                          std::span<const double> mean, double std,
                          bool simplified) {
  check_same(x_next, mean);
  double sq = 0.0;
  for (std::size_t i = 0; i < x_next.size(); ++i) {
    const double d = x_next[i] - mean[i];
    sq += d * d;
  }
  if (simplified) return -sq;
  if (!(std > 0.0)) throw DomainError("full transition log-prob needs std > 0");
  const double dim = static_cast<double>(x_next.size());
  return sq * (-1.0 / (2.0 * std * std)) + (-dim * (std::log(std) + kLogSqrt2Pi));
}

ad::Var transition_logprob(std::span<const double> x_next, ad::Var mean,
                           double std, bool simplified) {
  ad::Tape& tape = *mean.tape();
  ad::Var sq = ad::sqnorm(ad::sub(tape.constant(x_next), mean));
  if (simplified) return ad::neg(sq);
  if (!(std > 0.0)) throw DomainError("full transition log-prob needs std > 0");
  const double dim = static_cast<double>(x_next.size());
  return ad::add_scalar(ad::scale(sq, -1.0 / (2.0 * std * std)),
                        -dim * (std::log(std) + kLogSqrt2Pi));
}

namespace {

double kl_factor(double t, double a, double dt, double eps_t) {
  if (!(a > 0.0)) throw DomainError("KL term undefined for noise level a = 0");
  const double sigma = sde_sigma_t(a, t, dt, eps_t);
  const double tc = clamp_time(t, eps_t);
  const double c = sigma * (1.0 - tc) / (2.0 * tc) + 1.0 / sigma;
  return 0.5 * dt * c * c;
}

}  // namespace

double kl_term(std::span<const double> v, std::span<const double> v_ref, double t,
               double a, double dt, double eps_t) {
  check_same(v, v_ref);
  double sq = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - v_ref[i];
    sq += d * d;
  }
  return kl_factor(t, a, dt, eps_t) * sq;
}

ad::Var kl_term(ad::Var v, std::span<const double> v_ref, double t, double a,
                double dt, double eps_t) {
  ad::Tape& tape = *v.tape();
  return ad::scale(ad::sqnorm(ad::sub(v, tape.constant(v_ref))),
                   kl_factor(t, a, dt, eps_t));
}

double default_cps_eta(double a, int steps) {
  if (steps < 2) throw ConfigError("CPS eta calibration needs at least 2 steps");
  const double dt = 1.0 / steps;
  const double t = 0.5;
  const double s = t - dt;
  if (!(s > 0.0)) return 1.0;
  const double em_std = noise_scale(a, t) * std::sqrt(dt);
  return 2.0 / std::numbers::pi * std::asin(std::min(1.0, em_std / s));
}

}  // namespace ladi::flowlat

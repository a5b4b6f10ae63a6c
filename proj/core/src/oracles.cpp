#include "meanfield/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "meanfield/geometry.hpp"
#include "meanfield/parallel.hpp"

namespace meanfield {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() {  // in [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double normal() {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
  }
};

// radius with density proportional to r^{dim-1} on [a, b]
double sample_radius(SplitMix64& rng, int dim, double a, double b) {
  const double u = rng.uniform();
  const double an = std::pow(a, dim), bn = std::pow(b, dim);
  return std::pow(an + u * (bn - an), 1.0 / dim);
}

// cos of the angle between two independent uniform directions
double sample_cos_angle(SplitMix64& rng, int dim) {
  if (dim == 1) return rng.uniform() < 0.5 ? -1.0 : 1.0;
  if (dim == 3) return 2.0 * rng.uniform() - 1.0;
  // generic: first coordinate of a uniform direction
  double x = rng.normal();
  double n2 = x * x;
  for (int k = 1; k < dim; ++k) {
    const double z = rng.normal();
    n2 += z * z;
  }
  return n2 > 0.0 ? x / std::sqrt(n2) : 1.0;
}

struct PairSampler {
  int dim;
  // cells with cumulative probabilities; empty means constant ball
  std::vector<double> cdf, lo, hi;
  double ball_radius = 0.0;

  double sample(SplitMix64& rng) const {  // one radius draw
    if (cdf.empty()) return sample_radius(rng, dim, 0.0, ball_radius);
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const std::size_t i = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
    return sample_radius(rng, dim, lo[i], hi[i]);
  }
};

McEstimate run_mc(const PairSampler& sampler, double mass, double p,
                  const McConfig& cfg) {
  if (cfg.samples < 10000)
    throw std::invalid_argument("mc_double_integral: need at least 10^4 samples");
  if (!(2.0 * p > -static_cast<double>(sampler.dim)))
    throw std::invalid_argument(
        "mc_double_integral: estimator variance is infinite for 2p <= -dim");

  constexpr int kChunks = 64;
  const std::int64_t base = cfg.samples / kChunks;
  const std::int64_t extra = cfg.samples % kChunks;
  double sums[kChunks], sums2[kChunks];

  parallel_for(0, kChunks, [&](int lo_c, int hi_c) {
    for (int c = lo_c; c < hi_c; ++c) {
      SplitMix64 rng(cfg.seed + 0xa3ec647659359acdull * static_cast<std::uint64_t>(c + 1));
      const std::int64_t n = base + (c < extra ? 1 : 0);
      double s = 0.0, s2 = 0.0;
      for (std::int64_t k = 0; k < n; ++k) {
        const double r1 = sampler.sample(rng);
        const double r2 = sampler.sample(rng);
        const double ct = sample_cos_angle(rng, sampler.dim);
        const double d2 = std::max(0.0, r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * ct);
        const double f = std::pow(d2, 0.5 * p);
        s += f;
        s2 += f * f;
      }
      sums[c] = s;
      sums2[c] = s2;
    }
  });

  double s = 0.0, s2 = 0.0;
  for (int c = 0; c < kChunks; ++c) {
    s += sums[c];
    s2 += sums2[c];
  }
  const double n = static_cast<double>(cfg.samples);
  const double scale = 0.5 * mass * mass;
  const double mean = s / n;
  const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
  McEstimate out;
  out.value = scale * mean;
  out.std_error = scale * std::sqrt(var / n);
  out.seed = cfg.seed;
  out.samples = cfg.samples;
  return out;
}

}  // namespace

McEstimate mc_double_integral(const RadialDensity& rho, PowerKernel kernel,
                              const McConfig& cfg) {
  const auto& g = *rho.grid;
  PairSampler sampler;
  sampler.dim = g.dim;
  double mass = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const double pm = g.w[i] * rho.values[i];
    if (pm < 0.0) throw std::invalid_argument("mc_double_integral: negative density");
    if (pm == 0.0) continue;
    mass += pm;
    sampler.cdf.push_back(mass);
    sampler.lo.push_back(g.edges[i]);
    sampler.hi.push_back(g.edges[i + 1]);
  }
  if (!(mass > 0.0)) throw std::invalid_argument("mc_double_integral: zero mass");
  for (double& c : sampler.cdf) c /= mass;
  sampler.cdf.back() = 1.0;
  return run_mc(sampler, mass, kernel.p, cfg);
}

McEstimate mc_double_integral_ball(int dim, double radius, double height,
                                   PowerKernel kernel, const McConfig& cfg) {
  if (dim < 1 || !(radius > 0.0) || !(height > 0.0))
    throw std::invalid_argument("mc_double_integral_ball: bad geometry");
  PairSampler sampler;
  sampler.dim = dim;
  sampler.ball_radius = radius;
  const double mass = height * ball_volume(dim, radius);
  return run_mc(sampler, mass, kernel.p, cfg);
}

std::vector<double> brute_force_bathtub(const std::vector<double>& target,
                                        const std::vector<double>& w, double mass,
                                        double ub) {
  const int n = static_cast<int>(target.size());
  if (n == 0 || w.size() != target.size())
    throw std::invalid_argument("brute_force_bathtub: size mismatch");
  if (n > 12) throw std::invalid_argument("brute_force_bathtub: refusing more than 12 cells");
  if (!(ub > 0.0)) throw std::invalid_argument("brute_force_bathtub: ub must be positive");

  long combos = 1;
  for (int i = 0; i < n; ++i) combos *= 3;

  std::vector<double> best;
  double best_obj = kInf;
  std::vector<int> state(n);  // 0 = at lower bound, 1 = free, 2 = at upper bound
  std::vector<double> cand(n);
  for (long code = 0; code < combos; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      state[i] = static_cast<int>(c % 3);
      c /= 3;
    }

    double w_free = 0.0, wt_free = 0.0, m_fixed = 0.0;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 1) {
        w_free += w[i];
        wt_free += w[i] * target[i];
      } else if (state[i] == 2) {
        if (!std::isfinite(ub)) { ok = false; break; }
        m_fixed += w[i] * ub;
      }
    }
    if (!ok) continue;

    double mu;
    if (w_free > 0.0) {
      mu = (wt_free + m_fixed - mass) / w_free;
    } else {
      if (std::abs(m_fixed - mass) > 1e-10 * std::max(1.0, std::abs(mass))) continue;
      // any multiplier between the binding bounds works; pick a midpoint
      double mu_lo = -kInf, mu_hi = kInf;
      for (int i = 0; i < n; ++i) {
        if (state[i] == 0) mu_lo = std::max(mu_lo, target[i]);
        else mu_hi = std::min(mu_hi, target[i] - ub);
      }
      if (mu_lo > mu_hi + 1e-12) continue;
      if (!std::isfinite(mu_lo)) mu = mu_hi;
      else if (!std::isfinite(mu_hi)) mu = mu_lo;
      else mu = 0.5 * (mu_lo + mu_hi);
    }

    ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const double v = target[i] - mu;
      if (state[i] == 0) ok = v <= 1e-12;
      else if (state[i] == 2) ok = v >= ub - 1e-12;
      else ok = v >= -1e-12 && v <= ub + 1e-12;
    }
    if (!ok) continue;

    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = state[i] == 0 ? 0.0 : (state[i] == 2 ? ub : std::clamp(target[i] - mu, 0.0, ub));
      cand[i] = v;
      const double d = v - target[i];
      obj += w[i] * d * d;
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = cand;
    }
  }
  if (best.empty()) throw std::runtime_error("brute_force_bathtub: no consistent active set");
  return best;
}

ScanResult constant_on_ball_scan(const ScanSpec& spec) {
  if (spec.dim < 1) throw std::invalid_argument("constant_on_ball_scan: dim must be >= 1");
  if (spec.radius_samples < 2)
    throw std::invalid_argument("constant_on_ball_scan: empty scan range");
  const int n = spec.dim;

  double i_rep = 0.0, i_att = ball_self_energy(n, spec.alpha);
  double r_lo, r_hi;
  bool log_spaced;
  if (spec.model == ScanModel::Flocking) {
    if (!(spec.lambda > 0.0) || !(spec.lambda < n))
      throw std::invalid_argument("constant_on_ball_scan: lambda must lie in (0, dim)");
    if (!(spec.mass > 0.0)) throw std::invalid_argument("constant_on_ball_scan: mass must be > 0");
    i_rep = ball_self_energy(n, -spec.lambda);
    r_lo = ball_radius(n, spec.mass);  // h = 1 end
    r_hi = 4.0 * r_lo;
    log_spaced = false;
  } else {
    if (!(spec.q > 0.0) || !(spec.q < 1.0))
      throw std::invalid_argument("constant_on_ball_scan: q must lie in (0, 1)");
    r_lo = 1e-2;
    r_hi = 10.0;
    log_spaced = true;
  }

  auto energy_at = [&](double radius) {
    const double vol = ball_volume(n, radius);
    const double h = (spec.model == ScanModel::Flocking ? spec.mass : 1.0) / vol;
    if (spec.model == ScanModel::Flocking) {
      if (h > 1.0 + 1e-12) return kInf;
      return h * h * (std::pow(radius, 2.0 * n - spec.lambda) * i_rep +
                      std::pow(radius, 2.0 * n + spec.alpha) * i_att);
    }
    return -std::pow(h, spec.q) * vol +
           h * h * std::pow(radius, 2.0 * n + spec.alpha) * i_att;
  };

  ScanResult best;
  for (int extension = 0; extension < 40; ++extension) {
    int arg = 0;
    double best_e = kInf, best_r = r_lo;
    for (int k = 0; k < spec.radius_samples; ++k) {
      const double t = static_cast<double>(k) / (spec.radius_samples - 1);
      const double r = log_spaced ? r_lo * std::pow(r_hi / r_lo, t)
                                  : r_lo + (r_hi - r_lo) * t;
      const double e = energy_at(r);
      if (e < best_e) {
        best_e = e;
        best_r = r;
        arg = k;
      }
    }
    best.radius = best_r;
    best.height = (spec.model == ScanModel::Flocking ? spec.mass : 1.0) /
                  ball_volume(n, best_r);
    best.energy = best_e;
    if (arg == spec.radius_samples - 1) {
      r_hi *= 4.0;
      continue;
    }
    if (log_spaced && arg == 0) {
      r_lo *= 0.25;
      continue;
    }
    break;
  }
  return best;
}

}  // namespace meanfield

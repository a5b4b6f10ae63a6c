#include "meanfield/kernels.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "meanfield/geometry.hpp"
#include "meanfield/parallel.hpp"
#include "meanfield/quadrature.hpp"

namespace meanfield {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_kernel(int dim, double p) {
  if (dim < 1) throw std::invalid_argument("kernel: dim must be >= 1");
  if (std::isnan(p)) throw std::invalid_argument("kernel: exponent is NaN");
  if (!(p > -static_cast<double>(dim)))
    throw std::invalid_argument("kernel: exponent p must exceed -dim, the double integral diverges otherwise");
}

double avg_two_point_1d(double p, double r, double s) {
  const double d = std::abs(r - s), u = r + s;
  if (d == 0.0) return p < 0 ? kInf : 0.5 * std::pow(u, p);
  return 0.5 * (std::pow(d, p) + std::pow(u, p));
}

/// 3d closed form: with q = p+2, u = r+s, d = |r-s|,
///   A = (u^q - d^q) / (2 r s q),   A = log(u/d) / (2 r s) at q = 0.
double avg_sphere_3d(double p, double r, double s) {
  const double q = p + 2.0;
  const double u = r + s, d = std::abs(r - s);
  const double two_rs = 2.0 * r * s;
  if (d == 0.0) return q > 0.0 ? std::pow(u, q) / (two_rs * q) : kInf;
  const double log_ratio = std::log(u / d);
  if (q == 0.0) return log_ratio / two_rs;
  // (u^q - d^q)/q written through expm1 so nearby radii do not cancel
  return std::pow(d, q) * std::expm1(q * log_ratio) / (two_rs * q);
}

double sin_power_norm(int dim) {
  // integral of sin^{dim-2} over (0, pi)
  return std::sqrt(M_PI) * std::tgamma(0.5 * (dim - 1)) / std::tgamma(0.5 * dim);
}

/// Polar-angle quadrature for dim >= 2 without a closed form. The integrand
/// (d^2 + 4 r s sin^2(t/2))^{p/2} sin^{dim-2} t is integrated over dyadic
/// panels shrinking toward t = 0, where it may be singular for r == s, p < 0.
/// The radial gap d is a separate argument so callers can pass gaps below
/// ulp(r) exactly.
double sphere_average_from_gap(int dim, double p, double d, double r, double s) {
  const double d2 = d * d;
  const double rs4 = 4.0 * r * s;
  const double nu = dim - 2;
  const bool on_diagonal = (d2 == 0.0);
  if (on_diagonal && p + dim - 1 <= 0.0) return kInf;

  auto f = [&](double t) {
    const double sh = std::sin(0.5 * t);
    double v = std::pow(d2 + rs4 * sh * sh, 0.5 * p);
    if (nu > 0) v *= std::pow(std::sin(t), nu);
    return v;
  };

  // The dyadic descent only has to resolve scales down to the regularization
  // knee t ~ 2d/sqrt(4rs); below it the integrand is a smooth power law and a
  // single adaptive pass closes the interval. On the diagonal (d == 0) there
  // is no knee and the descent runs to the floor as before.
  const double t_reg = on_diagonal ? 0.0 : std::min(M_PI, 4.0 * d / std::sqrt(rs4));

  constexpr int kMaxPanels = 64;
  double bounds[kMaxPanels + 1];
  double rough[kMaxPanels];
  int used = 0;
  double hi = M_PI, total = 0.0;
  int tiny_streak = 0;
  while (used < kMaxPanels) {
    const double lo = 0.5 * hi;
    bounds[used] = hi;
    rough[used] = gauss_legendre_8(f, lo, hi);
    total += rough[used];
    ++used;
    hi = lo;
    if (hi <= t_reg) break;
    tiny_streak = (rough[used - 1] < 1e-16 * total) ? tiny_streak + 1 : 0;
    if (tiny_streak >= 3) break;
  }
  bounds[used] = hi;

  // Each dyadic panel sees a smooth slice, so a 16-point rule nearly always
  // agrees with the 8-point pass to rounding; only disagreeing panels pay for
  // adaptive refinement.
  double sum = 0.0;
  const double tol = std::max(total * 1e-13, 1e-300);
  auto refined = [&](double a, double b, double coarse) {
    const double fine = gauss_legendre_16(f, a, b);
    if (std::fabs(fine - coarse) <= 4.0 * tol) return fine;
    return adaptive_simpson(f, a, b, tol, 40);
  };
  for (int k = used - 1; k >= 0; --k)
    sum += refined(bounds[k + 1], bounds[k], rough[k]);

  if (on_diagonal) {
    // power-law tail below the last panel edge
    const double t_star = bounds[used];
    sum += f(t_star) * t_star / (nu + p + 1.0);
  } else if (hi > 0.0) {
    sum += refined(0.0, hi, gauss_legendre_8(f, 0.0, hi));
  }

  return sum / sin_power_norm(dim);
}

double avg_sphere_quadrature(int dim, double p, double r, double s) {
  return sphere_average_from_gap(dim, p, std::abs(r - s), r, s);
}

/// Exact average of the 1d kernel over a cell pair, G(z) = z^{p+2}/((p+1)(p+2)).
double g_antiderivative(double p, double z) {
  return std::pow(z, p + 2.0) / ((p + 1.0) * (p + 2.0));
}

double avg_1d_cell_pair(double p, double a, double b, double c, double d) {
  // [a,b] x [c,d] with b <= c
  const double diff_part = g_antiderivative(p, d - a) + g_antiderivative(p, c - b) -
                           g_antiderivative(p, d - b) - g_antiderivative(p, c - a);
  const double sum_part = g_antiderivative(p, b + d) + g_antiderivative(p, a + c) -
                          g_antiderivative(p, a + d) - g_antiderivative(p, b + c);
  return (diff_part + sum_part) / (2.0 * (b - a) * (d - c));
}

double avg_1d_cell_diagonal(double p, double a, double b) {
  const double l = b - a;
  const double diff_part = 2.0 * g_antiderivative(p, l);
  const double sum_part = g_antiderivative(p, 2.0 * b) + g_antiderivative(p, 2.0 * a) -
                          2.0 * g_antiderivative(p, a + b);
  return (diff_part + sum_part) / (2.0 * l * l);
}

/// Angular average at radii (r, r + t) with the gap t passed exactly. The
/// dyadic panels below reach t < ulp(r), where r + t rounds back to r and the
/// pointwise routine would see a zero gap.
double angular_average_offset(int dim, double p, double r, double t) {
  const double s = r + t;
  if (dim == 1) return 0.5 * (std::pow(t, p) + std::pow(r + s, p));
  if (dim == 3) {
    const double q = p + 2.0;
    const double two_rs = 2.0 * r * s;
    const double log_ratio = std::log((r + s) / t);
    if (q == 0.0) return log_ratio / two_rs;
    return std::pow(t, q) * std::expm1(q * log_ratio) / (two_rs * q);
  }
  return sphere_average_from_gap(dim, p, t, r, s);
}

/// Exact-in-quadrature self-interaction average of one shell cell [a,b] for a
/// singular kernel: the squared-cell integral is reduced to t = s - r and the
/// t^{p+dim-1}-type near-singularity is integrated over dyadic panels plus an
/// analytically integrated power-law sliver at t = 0.
double diagonal_cell_average(int dim, double p, double a, double b) {
  const double sigma = sphere_measure(dim);
  const double w = sigma * (std::pow(b, dim) - std::pow(a, dim)) / dim;
  const double h = b - a;
  const double nm1 = dim - 1;
  const bool closed_form = (dim == 3);
  const int panels = closed_form ? 48 : 40;

  auto inner = [&](double t) {
    auto fr = [&](double r) {
      return std::pow(r * (r + t), nm1) * angular_average_offset(dim, p, r, t);
    };
    return closed_form ? gauss_legendre_16(fr, a, b - t) : gauss_legendre_8(fr, a, b - t);
  };

  double acc = 0.0;
  double hi = h;
  for (int k = 0; k < panels; ++k) {
    const double lo = 0.5 * hi;
    acc += gauss_legendre_8(inner, lo, hi);
    hi = lo;
  }
  const double gamma = p + dim - 1.0;
  acc += inner(hi) * hi / (gamma + 1.0);

  return 2.0 * acc * sigma * sigma / (w * w);
}

constexpr double kGL4X[4] = {-0.8611363115940526, -0.3399810435848563,
                             0.3399810435848563, 0.8611363115940526};
constexpr double kGL4W[4] = {0.3478548451374538, 0.6521451548625461,
                             0.6521451548625461, 0.3478548451374538};

/// Raw integral of (r s)^{dim-1} A(r,s) over [ra,rb] x [sa,sb] by a tensor
/// Gauss rule. Valid away from the r = s line.
double pair_panel(int dim, double p, double ra, double rb, double sa, double sb) {
  const double rc = 0.5 * (ra + rb), rh = 0.5 * (rb - ra);
  const double sc = 0.5 * (sa + sb), sh = 0.5 * (sb - sa);
  const double nm1 = dim - 1;
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double r = rc + rh * kGL4X[k];
    double inner = 0.0;
    for (int l = 0; l < 4; ++l) {
      const double s = sc + sh * kGL4X[l];
      inner += kGL4W[l] * std::pow(r * s, nm1) * angular_kernel_average(dim, p, r, s);
    }
    acc += kGL4W[k] * inner;
  }
  return acc * rh * sh;
}

/// Cell-pair average of the angular kernel for p < 0, dim >= 2: the table is
/// then the exact interaction energy of piecewise-constant shell densities up
/// to panel quadrature error, keeping the quadratic form positive definite.
/// Near pairs grade the panels geometrically toward the shared edge, where
/// the kernel's |r-s| power behavior concentrates the error.
double pair_average_nd(int dim, double p, double ra, double rb, double sa, double sb,
                       bool graded) {
  double raw = 0.0;
  if (!graded) {
    raw = pair_panel(dim, p, ra, rb, sa, sb);
  } else {
    constexpr int kLevels = 5;
    double rsplit[kLevels + 2], ssplit[kLevels + 2];
    rsplit[0] = ra;
    ssplit[kLevels + 1] = sb;
    for (int k = 1; k <= kLevels; ++k) {
      rsplit[k] = rb - (rb - ra) * std::ldexp(1.0, -k);
      ssplit[kLevels + 1 - k] = sa + (sb - sa) * std::ldexp(1.0, -k);
    }
    rsplit[kLevels + 1] = rb;
    ssplit[0] = sa;
    for (int a = 0; a <= kLevels; ++a)
      for (int b = 0; b <= kLevels; ++b)
        raw += pair_panel(dim, p, rsplit[a], rsplit[a + 1], ssplit[b], ssplit[b + 1]);
  }
  const double ir = (std::pow(rb, dim) - std::pow(ra, dim)) / dim;
  const double is = (std::pow(sb, dim) - std::pow(sa, dim)) / dim;
  return raw / (ir * is);
}

struct TableKey {
  const RadialGrid* grid;
  std::uint64_t p_bits;
  bool operator<(const TableKey& o) const {
    return grid != o.grid ? grid < o.grid : p_bits < o.p_bits;
  }
};

std::mutex g_table_mutex;
std::map<TableKey, std::shared_ptr<const AngularAverageTable>> g_table_cache;

struct BallKey {
  int dim;
  std::uint64_t p_bits;
  int n;
  bool operator<(const BallKey& o) const {
    if (dim != o.dim) return dim < o.dim;
    if (p_bits != o.p_bits) return p_bits < o.p_bits;
    return n < o.n;
  }
};

std::mutex g_ball_mutex;
std::map<BallKey, double> g_ball_cache;

std::uint64_t bits_of(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof b);
  return b;
}

}  // namespace

double angular_kernel_average(int dim, double p, double r, double s) {
  check_kernel(dim, p);
  if (!(r > 0) || !(s > 0))
    throw std::invalid_argument("angular_kernel_average: radii must be > 0");
  if (p == 0.0) return 1.0;
  if (p == 2.0) return r * r + s * s;
  if (p == 4.0) {
    const double t = r * r + s * s;
    return t * t + 4.0 * r * r * s * s / dim;
  }
  if (dim == 1) return avg_two_point_1d(p, r, s);
  if (dim == 3) return avg_sphere_3d(p, r, s);
  return avg_sphere_quadrature(dim, p, r, s);
}

AngularAverageTable::AngularAverageTable(std::shared_ptr<const RadialGrid> grid,
                                         PowerKernel kernel)
    : grid_(std::move(grid)), p_(kernel.p) {
  if (!grid_) throw std::invalid_argument("table: null grid");
  grid_->validate();
  check_kernel(grid_->dim, p_);
  n_ = grid_->size();
  a_.assign(static_cast<std::size_t>(n_) * n_, 0.0);

  const int dim = grid_->dim;
  const auto& r = grid_->r;
  const auto& e = grid_->edges;
  const bool exact_1d = (dim == 1 && p_ < 0.0);
  const bool pair_avg = (dim >= 2 && p_ < 0.0);

  // Even-power kernels factor into per-cell moments, so their cell-pair
  // averages are closed form.
  std::vector<double> m2, m4;
  if (p_ == 2.0 || p_ == 4.0) {
    m2.resize(n_);
    for (int i = 0; i < n_; ++i) m2[i] = cell_radial_moment(*grid_, i, 2.0);
    if (p_ == 4.0) {
      m4.resize(n_);
      for (int i = 0; i < n_; ++i) m4[i] = cell_radial_moment(*grid_, i, 4.0);
    }
  }

  // Every entry with a tractable cell-pair average uses it, so the table is
  // the exact Galerkin form on piecewise-constant densities: for Riesz
  // kernels that keeps the quadratic form positive definite (centroid point
  // values would misprice the cells and open descent directions no density
  // has), and for p = 2, 4 it makes the energy equal the moment identities
  // to rounding. Remaining exponents fall back to centroid point values.
  parallel_for(0, n_, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      double* row = a_.data() + static_cast<std::size_t>(i) * n_;
      if (exact_1d) {
        row[i] = avg_1d_cell_diagonal(p_, e[i], e[i + 1]);
      } else if (pair_avg) {
        row[i] = diagonal_cell_average(dim, p_, e[i], e[i + 1]);
      } else if (p_ == 2.0) {
        row[i] = 2.0 * m2[i];
      } else if (p_ == 4.0) {
        row[i] = 2.0 * m4[i] + (2.0 + 4.0 / dim) * m2[i] * m2[i];
      } else {
        row[i] = angular_kernel_average(dim, p_, r[i], r[i]);
      }
      for (int j = i + 1; j < n_; ++j) {
        double v;
        if (exact_1d)
          v = avg_1d_cell_pair(p_, e[i], e[i + 1], e[j], e[j + 1]);
        else if (pair_avg)
          v = pair_average_nd(dim, p_, e[i], e[i + 1], e[j], e[j + 1], j - i <= 2);
        else if (p_ == 2.0)
          v = m2[i] + m2[j];
        else if (p_ == 4.0)
          v = m4[i] + m4[j] + (2.0 + 4.0 / dim) * m2[i] * m2[j];
        else
          v = angular_kernel_average(dim, p_, r[i], r[j]);
        row[j] = v;
        a_[static_cast<std::size_t>(j) * n_ + i] = v;
      }
    }
  });
}

std::shared_ptr<const AngularAverageTable> shared_angular_table(
    const std::shared_ptr<const RadialGrid>& grid, PowerKernel kernel) {
  if (!grid) throw std::invalid_argument("shared_angular_table: null grid");
  const TableKey key{grid.get(), bits_of(kernel.p)};
  std::lock_guard<std::mutex> lock(g_table_mutex);
  auto it = g_table_cache.find(key);
  if (it != g_table_cache.end()) return it->second;
  // The table keeps the grid alive, so the pointer key cannot be reused while
  // the entry exists.
  auto table = std::make_shared<const AngularAverageTable>(grid, kernel);
  g_table_cache.emplace(key, table);
  return table;
}

void clear_kernel_caches() {
  {
    std::lock_guard<std::mutex> lock(g_table_mutex);
    g_table_cache.clear();
  }
  std::lock_guard<std::mutex> lock(g_ball_mutex);
  g_ball_cache.clear();
}

double interaction_energy(const RadialDensity& rho, PowerKernel kernel) {
  auto table = shared_angular_table(rho.grid, kernel);
  return interaction_energy(rho, *table);
}

double interaction_energy(const RadialDensity& rho, const AngularAverageTable& table) {
  if (rho.grid.get() != &table.grid())
    throw std::invalid_argument("interaction_energy: density and table use different grids");
  const int n = table.size();
  const auto& w = rho.grid->w;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = w[i] * rho.values[i];
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = table.row(i);
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += row[j] * g[j];
    e += g[i] * s;
  }
  return 0.5 * e;
}

std::vector<double> potential(const RadialDensity& rho, PowerKernel kernel) {
  auto table = shared_angular_table(rho.grid, kernel);
  return potential(rho, *table);
}

std::vector<double> potential(const RadialDensity& rho, const AngularAverageTable& table) {
  if (rho.grid.get() != &table.grid())
    throw std::invalid_argument("potential: density and table use different grids");
  const int n = table.size();
  const auto& w = rho.grid->w;
  std::vector<double> g(n), phi(n);
  for (int i = 0; i < n; ++i) g[i] = w[i] * rho.values[i];
  for (int i = 0; i < n; ++i) {
    const double* row = table.row(i);
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += row[j] * g[j];
    phi[i] = s;
  }
  return phi;
}

double radial_moment(const RadialDensity& rho, double k) {
  const auto& g = *rho.grid;
  double m = 0.0;
  for (int i = 0; i < g.size(); ++i)
    m += g.w[i] * rho.values[i] * cell_radial_moment(g, i, k);
  return m;
}

double ball_self_energy(int dim, double p, int grid_n) {
  check_kernel(dim, p);
  if (dim == 1) return std::pow(2.0, p + 2.0) / ((p + 1.0) * (p + 2.0));
  const double sigma = sphere_measure(dim);
  if (p == 0.0) {
    const double v = sigma / dim;
    return 0.5 * v * v;
  }
  if (p == 2.0) return sigma * sigma / (dim * (dim + 2.0));
  if (p == 4.0) {
    const double m0 = sigma / dim, m2 = sigma / (dim + 2), m4 = sigma / (dim + 4);
    return m0 * m4 + (1.0 + 2.0 / dim) * m2 * m2;
  }
  if (grid_n < 16) throw std::invalid_argument("ball_self_energy: grid_n must be >= 16");
  const BallKey key{dim, bits_of(p), grid_n};
  {
    std::lock_guard<std::mutex> lock(g_ball_mutex);
    auto it = g_ball_cache.find(key);
    if (it != g_ball_cache.end()) return it->second;
  }
  auto grid = make_radial_grid(dim, 1.0, grid_n);
  RadialDensity one(grid, std::vector<double>(grid_n, 1.0));
  const double e = interaction_energy(one, PowerKernel{p});
  std::lock_guard<std::mutex> lock(g_ball_mutex);
  g_ball_cache.emplace(key, e);
  return e;
}

}  // namespace meanfield

#include "opidmd/generators.hpp"

#include "opidmd/error.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace opidmd {

namespace {

using Complex = std::complex<double>;
using std::numbers::pi;

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

// Constant-coefficient cyclic tridiagonal solver (Sherman-Morrison on top of a
// Thomas sweep). Diagonal `diag`, both off-diagonals and both corners `off`.
class CyclicTridiagonal {
 public:
  CyclicTridiagonal(int n, Complex diag, Complex off) : n_(n), off_(off) {
    gamma_ = -diag;
    main_.assign(static_cast<std::size_t>(n), diag);
    main_.front() = diag - gamma_;
    main_.back() = diag - off * off / gamma_;
    std::vector<Complex> u(static_cast<std::size_t>(n), Complex(0.0));
    u.front() = gamma_;
    u.back() = off;
    correction_ = thomas(u);
  }

  void solve(std::vector<Complex>& rhs) const {
    auto x = thomas(rhs);
    const auto& z = correction_;
    const Complex fact = (x.front() + off_ * x.back() / gamma_) /
                         (Complex(1.0) + z.front() + off_ * z.back() / gamma_);
    for (int i = 0; i < n_; ++i) x[static_cast<std::size_t>(i)] -= fact * z[static_cast<std::size_t>(i)];
    rhs.swap(x);
  }

 private:
  std::vector<Complex> thomas(const std::vector<Complex>& rhs) const {
    const auto n = static_cast<std::size_t>(n_);
    std::vector<Complex> c(n), d(n);
    c[0] = off_ / main_[0];
    d[0] = rhs[0] / main_[0];
    for (std::size_t i = 1; i < n; ++i) {
      const Complex m = main_[i] - off_ * c[i - 1];
      c[i] = off_ / m;
      d[i] = (rhs[i] - off_ * d[i - 1]) / m;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
    return d;
  }

  int n_;
  Complex off_;
  Complex gamma_;
  std::vector<Complex> main_;
  std::vector<Complex> correction_;
};

}  // namespace

SnapshotMatrix gen_advection2d(const Advection2DConfig& cfg) {
  require(cfg.nx >= 2 && cfg.ny >= 2 && cfg.nt >= 1, ErrorCode::InvalidConfig, "grid sizes must be positive");
  require(cfg.lx > 0.0 && cfg.ly > 0.0 && cfg.t_end > 0.0, ErrorCode::InvalidConfig, "lengths must be positive");
  const double dx = cfg.lx / cfg.nx;
  const double dy = cfg.ly / cfg.ny;
  const double dt = cfg.t_end / cfg.nt;
  const double cfl_x = cfg.cx * dt / dx;
  const double cfl_y = cfg.cy * dt / dy;
  require(std::max(std::abs(cfl_x), std::abs(cfl_y)) <= 1.0, ErrorCode::CflViolated,
          "CFL number " + std::to_string(std::max(std::abs(cfl_x), std::abs(cfl_y))) + " exceeds 1");

  const int nx = cfg.nx;
  const int ny = cfg.ny;
  auto idx = [ny](int i, int j) { return static_cast<Eigen::Index>(i) * ny + j; };
  Matrix out(static_cast<Eigen::Index>(nx) * ny, cfg.nt + 1);
  Vector u(out.rows());
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double x = i * dx;
      const double y = j * dy;
      u(idx(i, j)) = cfg.initial ? cfg.initial(x, y) : std::sin(pi * x) * std::sin(pi * y);
    }
  }
  out.col(0) = u;
  Vector next(u.size());
  for (int step = 1; step <= cfg.nt; ++step) {
    for (int i = 0; i < nx; ++i) {
      const int ip = (i + 1) % nx;
      const int im = (i + nx - 1) % nx;
      for (int j = 0; j < ny; ++j) {
        const int jp = (j + 1) % ny;
        const int jm = (j + ny - 1) % ny;
        const double c = u(idx(i, j));
        const double ddx = cfg.cx >= 0.0 ? c - u(idx(im, j)) : u(idx(ip, j)) - c;
        const double ddy = cfg.cy >= 0.0 ? c - u(idx(i, jm)) : u(idx(i, jp)) - c;
        next(idx(i, j)) = c - cfl_x * ddx - cfl_y * ddy;
      }
    }
    u.swap(next);
    out.col(step) = u;
  }
  return SnapshotMatrix(std::move(out), dt);
}

Eigen::MatrixXcd schrodinger1d_wavefunction(const Schrodinger1DConfig& cfg) {
  require(cfg.nx >= 3, ErrorCode::InvalidConfig, "Schrodinger grid needs at least 3 points");
  require(cfg.nt >= 1 && cfg.dt > 0.0, ErrorCode::InvalidConfig, "time stepping must be positive");
  require(cfg.hbar > 0.0 && cfg.mass > 0.0 && cfg.lx > 0.0 && cfg.sigma > 0.0, ErrorCode::InvalidConfig,
          "physical constants must be positive");
  const int n = cfg.nx;
  const double dx = cfg.lx / n;
  // (I + i dt H / 2hbar) psi' = (I - i dt H / 2hbar) psi, H = -hbar^2/2m d2/dx2
  const Complex r(0.0, cfg.hbar * cfg.dt / (4.0 * cfg.mass * dx * dx));
  const CyclicTridiagonal lhs(n, Complex(1.0) + 2.0 * r, -r);

  Eigen::MatrixXcd out(n, cfg.nt + 1);
  std::vector<Complex> psi(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double x = -0.5 * cfg.lx + j * dx;
    const double envelope = std::exp(-(x - cfg.x0) * (x - cfg.x0) / (2.0 * cfg.sigma * cfg.sigma));
    psi[static_cast<std::size_t>(j)] = envelope * std::exp(Complex(0.0, cfg.k0 * x));
    out(j, 0) = psi[static_cast<std::size_t>(j)];
  }
  std::vector<Complex> rhs(static_cast<std::size_t>(n));
  for (int step = 1; step <= cfg.nt; ++step) {
    for (int j = 0; j < n; ++j) {
      const auto jm = static_cast<std::size_t>((j + n - 1) % n);
      const auto jp = static_cast<std::size_t>((j + 1) % n);
      const auto jj = static_cast<std::size_t>(j);
      rhs[jj] = (Complex(1.0) - 2.0 * r) * psi[jj] + r * (psi[jm] + psi[jp]);
    }
    lhs.solve(rhs);
    psi.swap(rhs);
    for (int j = 0; j < n; ++j) out(j, step) = psi[static_cast<std::size_t>(j)];
  }
  return out;
}

SnapshotMatrix gen_schrodinger1d(const Schrodinger1DConfig& cfg) {
  const Eigen::MatrixXcd psi = schrodinger1d_wavefunction(cfg);
  using Obs = Schrodinger1DConfig::Observable;
  switch (cfg.observable) {
    case Obs::Modulus:
      return SnapshotMatrix(psi.cwiseAbs(), cfg.dt);
    case Obs::RealPart:
      return SnapshotMatrix(psi.real(), cfg.dt);
    case Obs::StackedReIm: {
      Matrix stacked(2 * psi.rows(), psi.cols());
      stacked.topRows(psi.rows()) = psi.real();
      stacked.bottomRows(psi.rows()) = psi.imag();
      return SnapshotMatrix(std::move(stacked), cfg.dt);
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown observable");
}

SnapshotMatrix gen_advdiff1d(const AdvDiff1DConfig& cfg) {
  require(cfg.nx >= 3 && cfg.nt >= 1, ErrorCode::InvalidConfig, "grid sizes must be positive");
  require(cfg.length > 0.0 && cfg.dt > 0.0 && cfg.diffusion >= 0.0, ErrorCode::InvalidConfig,
          "length and dt must be positive, diffusion nonnegative");
  const int n = cfg.nx;
  const double dx = cfg.length / (n - 1);
  const double diff_number = cfg.diffusion * cfg.dt / (dx * dx);
  require(diff_number <= 0.5, ErrorCode::StabilityViolated,
          "diffusion number " + std::to_string(diff_number) + " exceeds 0.5");

  Vector v(n);
  Vector u(n);
  for (int i = 0; i < n; ++i) {
    const double x = i * dx;
    v(i) = cfg.v0 + cfg.v1 * std::cos(pi * x);
    u(i) = std::sin(pi * x);
  }
  u(0) = 0.0;
  u(n - 1) = 0.0;

  Matrix out(n, cfg.nt + 1);
  out.col(0) = u;
  Vector next = Vector::Zero(n);
  const double adv = cfg.dt / dx;
  for (int step = 1; step <= cfg.nt; ++step) {
    for (int i = 1; i < n - 1; ++i) {
      const double upwind = v(i) >= 0.0 ? u(i) - u(i - 1) : u(i + 1) - u(i);
      next(i) = u(i) + diff_number * (u(i + 1) - 2.0 * u(i) + u(i - 1)) - v(i) * adv * upwind;
    }
    next(0) = 0.0;
    next(n - 1) = 0.0;
    u.swap(next);
    out.col(step) = u;
  }
  return SnapshotMatrix(std::move(out), cfg.dt);
}

SnapshotMatrix gen_lorenz(const LorenzConfig& cfg) {
  require(cfg.n_steps >= 2, ErrorCode::InvalidConfig, "Lorenz needs at least 2 samples");
  require(cfg.dt > 0.0 && cfg.substeps >= 1, ErrorCode::InvalidConfig, "dt and substeps must be positive");
  const auto rhs = [&](const Eigen::Vector3d& s) {
    return Eigen::Vector3d(cfg.sigma * (s.y() - s.x()), s.x() * (cfg.rho - s.z()) - s.y(),
                           s.x() * s.y() - cfg.beta * s.z());
  };
  Matrix out(3, cfg.n_steps);
  Eigen::Vector3d s = cfg.init;
  const double h = cfg.dt / cfg.substeps;
  for (long long k = 0; k < cfg.n_steps; ++k) {
    out.col(k) = s;
    for (int sub = 0; sub < cfg.substeps; ++sub) {
      const Eigen::Vector3d k1 = rhs(s);
      const Eigen::Vector3d k2 = rhs(s + 0.5 * h * k1);
      const Eigen::Vector3d k3 = rhs(s + 0.5 * h * k2);
      const Eigen::Vector3d k4 = rhs(s + h * k3);
      s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return SnapshotMatrix(std::move(out), cfg.dt);
}

Matrix msd5_stiffness(double k) {
  Matrix stiff = Matrix::Zero(5, 5);
  for (int i = 0; i < 5; ++i) {
    stiff(i, i) = 2.0 * k;
    if (i + 1 < 5) {
      stiff(i, i + 1) = -k;
      stiff(i + 1, i) = -k;
    }
  }
  return stiff;
}

SnapshotMatrix gen_msd5(const Msd5Config& cfg) {
  require(cfg.m > 0.0 && cfg.k > 0.0 && cfg.c >= 0.0, ErrorCode::InvalidConfig,
          "mass and stiffness must be positive, damping nonnegative");
  require(cfg.dt > 0.0 && cfg.t_end >= cfg.dt, ErrorCode::InvalidConfig, "need at least one time step");
  require(cfg.beta > 0.0 && cfg.gamma > 0.0, ErrorCode::InvalidConfig, "Newmark parameters must be positive");

  const auto steps = static_cast<Eigen::Index>(std::llround(cfg.t_end / cfg.dt));
  const Matrix stiff = msd5_stiffness(cfg.k);
  const Matrix damp = (cfg.c / cfg.k) * stiff;
  const Matrix mass = cfg.m * Matrix::Identity(5, 5);
  const double b = cfg.beta;
  const double g = cfg.gamma;
  const double h = cfg.dt;

  Vector x = Vector::Zero(5);
  Vector v = Vector::Zero(5);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> amplitude(0.5, 1.5);
  v(4) = cfg.impulse == 0.0 ? 0.0 : cfg.impulse * amplitude(rng);
  Vector a = mass.llt().solve(-damp * v - stiff * x);

  const Matrix k_eff = stiff + (g / (b * h)) * damp + (1.0 / (b * h * h)) * mass;
  const Eigen::LLT<Matrix> solver(k_eff);
  require(solver.info() == Eigen::Success, ErrorCode::InvalidConfig, "effective stiffness is not SPD");

  Matrix out(10, steps + 1);
  out.col(0) << x, v;
  for (Eigen::Index n = 1; n <= steps; ++n) {
    const Vector rhs = mass * (x / (b * h * h) + v / (b * h) + (0.5 / b - 1.0) * a) +
                       damp * ((g / (b * h)) * x + (g / b - 1.0) * v + h * (0.5 * g / b - 1.0) * a);
    const Vector x_next = solver.solve(rhs);
    const Vector a_next = (x_next - x) / (b * h * h) - v / (b * h) - (0.5 / b - 1.0) * a;
    v += h * ((1.0 - g) * a + g * a_next);
    x = x_next;
    a = a_next;
    out.col(n) << x, v;
  }
  return SnapshotMatrix(std::move(out), cfg.dt);
}

SnapshotMatrix load_cylinder(const CylinderSource& src) {
  SnapshotMatrix raw = read_csv(src.path);
  if (!src.crop) return raw;
  const auto& c = *src.crop;
  require(c.grid_rows > 0 && c.grid_cols > 0, ErrorCode::InvalidConfig, "crop grid must be positive");
  require(static_cast<Eigen::Index>(c.grid_rows) * c.grid_cols == raw.n_state(), ErrorCode::InvalidConfig,
          "crop grid " + std::to_string(c.grid_rows) + "x" + std::to_string(c.grid_cols) +
              " does not match n_state " + std::to_string(raw.n_state()));
  require(c.row_begin >= 0 && c.row_count > 0 && c.row_begin + c.row_count <= c.grid_rows &&
              c.col_begin >= 0 && c.col_count > 0 && c.col_begin + c.col_count <= c.grid_cols,
          ErrorCode::InvalidConfig, "crop window outside the grid");
  Matrix cropped(static_cast<Eigen::Index>(c.row_count) * c.col_count, raw.n_time());
  Eigen::Index out_row = 0;
  for (int r = c.row_begin; r < c.row_begin + c.row_count; ++r) {
    for (int col = c.col_begin; col < c.col_begin + c.col_count; ++col) {
      cropped.row(out_row++) = raw.values().row(static_cast<Eigen::Index>(r) * c.grid_cols + col);
    }
  }
  return SnapshotMatrix(std::move(cropped), raw.dt());
}

}  // namespace opidmd

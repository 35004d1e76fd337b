#pragma once

#include "opidmd/snapshots.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

namespace opidmd {

/// 2D linear advection on a periodic unit square, first-order upwind in both
/// directions. Grid point (i, j) sits at (i Lx/Nx, j Ly/Ny) and is stored at
/// row i * Ny + j (row-major, y fastest).
struct Advection2DConfig {
  double cx = 0.5;
  double cy = 0.5;
  double lx = 1.0;
  double ly = 1.0;
  int nx = 15;
  int ny = 15;
  int nt = 5000;
  double t_end = 1.0;
  // Defaults to sin(pi x) sin(pi y).
  std::function<double(double, double)> initial;
};

struct Schrodinger1DConfig {
  enum class Observable { Modulus, RealPart, StackedReIm };

  double hbar = 1.0;
  double mass = 1.0;
  double lx = 10.0;
  double x0 = 0.0;
  double k0 = 20.0;
  double sigma = 1.0;
  int nx = 200;
  int nt = 10000;
  double dt = 1e-4;
  Observable observable = Observable::Modulus;
};

/// 1D advection-diffusion u_t = D u_xx - v(x) u_x with v(x) = v0 + v1 cos(pi x),
/// zero Dirichlet ends, on Nx points spanning [0, L] inclusive.
struct AdvDiff1DConfig {
  double diffusion = 0.1;
  double length = 1.0;
  double v0 = 1.0;
  double v1 = 0.1;
  int nx = 100;
  int nt = 5000;
  double dt = 2e-4;
};

struct LorenzConfig {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double dt = 0.01;
  long long n_steps = 150000;
  // RK4 steps per output sample.
  int substeps = 10;
  Eigen::Vector3d init = Eigen::Vector3d(1.0, 1.0, 1.0);
};

/// Five-mass chain M x'' + C x' + K x = 0 after an initial velocity impulse on
/// the last mass, integrated with Newmark-beta. State is [x; x'] (10 rows).
struct Msd5Config {
  double m = 1.0;
  double c = 0.06;
  double k = 1.0;
  double gamma = 0.5;
  double beta = 0.25;
  double dt = 0.005;
  double t_end = 1000.0;
  double impulse = 1.0;
  std::uint64_t seed = 0;
};

struct CylinderSource {
  std::filesystem::path path;
  // Rectangular window of a flattened grid_rows x grid_cols field (row-major).
  struct Crop {
    int grid_rows = 0;
    int grid_cols = 0;
    int row_begin = 0;
    int row_count = 0;
    int col_begin = 0;
    int col_count = 0;
  };
  std::optional<Crop> crop;
};

SnapshotMatrix gen_advection2d(const Advection2DConfig& cfg);

// Complex wavefunction history, Nx x (Nt + 1).
Eigen::MatrixXcd schrodinger1d_wavefunction(const Schrodinger1DConfig& cfg);
SnapshotMatrix gen_schrodinger1d(const Schrodinger1DConfig& cfg);

SnapshotMatrix gen_advdiff1d(const AdvDiff1DConfig& cfg);
SnapshotMatrix gen_lorenz(const LorenzConfig& cfg);

// Stiffness matrix of the chain: 2k on the diagonal, -k off it.
Matrix msd5_stiffness(double k);
SnapshotMatrix gen_msd5(const Msd5Config& cfg);

SnapshotMatrix load_cylinder(const CylinderSource& src);

}  // namespace opidmd

#include "dmn/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "dmn/errors.hpp"

namespace dmn {

namespace {

constexpr char kGridMagic[8] = {'D', 'M', 'N', 'V', 'O', 'X', '0', '1'};
constexpr int kMaxVoxelsPerAxis = 4096;
constexpr int kMaxVoxelCount = 1 << 27;

using Complex = std::complex<double>;

int signed_frequency(int m, int n) { return 2 * m <= n ? m : m - n; }

// Weight of one stored frequency when summing over the full lattice through
// the x-halved spectrum of a real field: conjugate pairs are stored once.
double hermitian_weight(int i, int n1) {
  if (i == 0) return 1.0;
  if (2 * i == n1) return 1.0;  // Nyquist plane of an even axis is self-paired
  return 2.0;
}

struct ReferenceMedium {
  double lambda = 0;
  double mu = 0;
  double coeff = 0;  // (lambda + mu) / (mu (lambda + 2 mu))
};

ReferenceMedium make_reference(const StiffnessMatrix& c_phase0, const StiffnessMatrix& c_phase1) {
  const IsotropicModuli m0 = isotropic_projection(c_phase0);
  const IsotropicModuli m1 = isotropic_projection(c_phase1);
  const double bulk = 0.5 * (m0.bulk + m1.bulk);
  const double shear = 0.5 * (m0.shear + m1.shear);
  ReferenceMedium ref;
  ref.mu = shear;
  ref.lambda = bulk - 2.0 / 3.0 * shear;
  ref.coeff = (ref.lambda + ref.mu) / (ref.mu * (ref.lambda + 2.0 * ref.mu));
  return ref;
}

// Six aligned scalar fields and their half-spectra, with one FFTW plan pair
// per component. Plans are bound to these buffers, so the workspace owns both.
class SpectralWorkspace {
 public:
  explicit SpectralWorkspace(const std::array<int, 3>& dims)
      : dims_(dims),
        nvox_(dims[0] * dims[1] * dims[2]),
        nfreq_(static_cast<std::size_t>(dims[2]) * dims[1] * (dims[0] / 2 + 1)) {
    for (int c = 0; c < 6; ++c) {
      real_[c] = fftw_alloc_real(nvox_);
      freq_[c] = fftw_alloc_complex(nfreq_);
      if (real_[c] == nullptr || freq_[c] == nullptr) throw std::bad_alloc();
      forward_[c] =
          fftw_plan_dft_r2c_3d(dims[2], dims[1], dims[0], real_[c], freq_[c], FFTW_ESTIMATE);
      backward_[c] =
          fftw_plan_dft_c2r_3d(dims[2], dims[1], dims[0], freq_[c], real_[c], FFTW_ESTIMATE);
    }
  }

  SpectralWorkspace(const SpectralWorkspace&) = delete;
  SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

  ~SpectralWorkspace() {
    for (int c = 0; c < 6; ++c) {
      fftw_destroy_plan(forward_[c]);
      fftw_destroy_plan(backward_[c]);
      fftw_free(real_[c]);
      fftw_free(freq_[c]);
    }
  }

  int voxel_count() const { return nvox_; }

  void load(const std::vector<double>& fields) {
    for (int c = 0; c < 6; ++c)
      std::memcpy(real_[c], fields.data() + static_cast<std::size_t>(c) * nvox_,
                  sizeof(double) * nvox_);
  }

  void store(std::vector<double>* fields) const {
    for (int c = 0; c < 6; ++c)
      std::memcpy(fields->data() + static_cast<std::size_t>(c) * nvox_, real_[c],
                  sizeof(double) * nvox_);
  }

  void forward() {
    for (int c = 0; c < 6; ++c) fftw_execute(forward_[c]);
  }

  void backward_normalized() {
    for (int c = 0; c < 6; ++c) fftw_execute(backward_[c]);
    const double scale = 1.0 / nvox_;
    for (int c = 0; c < 6; ++c)
      for (int v = 0; v < nvox_; ++v) real_[c][v] *= scale;
  }

  Complex& at(int c, std::size_t f) { return reinterpret_cast<Complex*>(freq_[c])[f]; }
  const Complex& at(int c, std::size_t f) const {
    return reinterpret_cast<const Complex*>(freq_[c])[f];
  }

  // Visits every stored frequency with its index and unit direction; the zero
  // frequency is passed with a null direction pointer.
  template <typename Fn>
  // Visits every stored frequency bin with its unit direction, or nullptr when
  // the bin has no single well-defined direction. On an even axis the Nyquist
  // harmonic m = N/2 aliases -N/2 on the lattice, so a bin mixing a Nyquist
  // component with any other nonzero component stands for two lattice modes
  // with genuinely different directions; assigning either one breaks the
  // Hermitian pairing of the stored half-spectrum. Such bins are passed with a
  // null direction, as is the zero frequency. A lone single-axis Nyquist bin
  // keeps its direction: the two aliases are +-n, which every even-in-n kernel
  // treats identically.
  void for_each_frequency(const std::array<double, 3>& lengths, Fn&& fn) const {
    const int half = dims_[0] / 2 + 1;
    std::size_t f = 0;
    for (int k = 0; k < dims_[2]; ++k) {
      const int mz = signed_frequency(k, dims_[2]);
      const double qz = mz / lengths[2];
      for (int j = 0; j < dims_[1]; ++j) {
        const int my = signed_frequency(j, dims_[1]);
        const double qy = my / lengths[1];
        for (int i = 0; i < half; ++i, ++f) {
          const double qx = i / lengths[0];
          const int nonzero = (i != 0) + (my != 0) + (mz != 0);
          const bool nyquist = 2 * i == dims_[0] || 2 * my == dims_[1] || 2 * mz == dims_[2];
          if (nonzero == 0 || (nyquist && nonzero > 1)) {
            fn(f, i, nullptr);
            continue;
          }
          const double norm = std::sqrt(qx * qx + qy * qy + qz * qz);
          const Vec3 n(qx / norm, qy / norm, qz / norm);
          fn(f, i, &n);
        }
      }
    }
  }

  // In-place Green operator of the isotropic reference medium on the spectra:
  // per frequency, with t = tau n, maps tau to sym(n (x) t)/mu - coeff (n.t n)(x)n,
  // and annihilates the mean.
  void apply_green(const std::array<double, 3>& lengths, const ReferenceMedium& ref) {
    const double inv_two_mu = 0.5 / ref.mu;
    for_each_frequency(lengths, [&](std::size_t f, int, const Vec3* n_ptr) {
      if (n_ptr == nullptr) {
        for (int c = 0; c < 6; ++c) at(c, f) = Complex(0, 0);
        return;
      }
      const Vec3& n = *n_ptr;
      const Complex t11 = at(0, f), t22 = at(1, f), t33 = at(2, f);
      const Complex t12 = at(3, f) / kSqrt2, t13 = at(4, f) / kSqrt2, t23 = at(5, f) / kSqrt2;
      const Complex t0 = t11 * n[0] + t12 * n[1] + t13 * n[2];
      const Complex t1 = t12 * n[0] + t22 * n[1] + t23 * n[2];
      const Complex t2 = t13 * n[0] + t23 * n[1] + t33 * n[2];
      const Complex s = t0 * n[0] + t1 * n[1] + t2 * n[2];
      const Complex cs = ref.coeff * s;
      at(0, f) = 2.0 * inv_two_mu * n[0] * t0 - cs * n[0] * n[0];
      at(1, f) = 2.0 * inv_two_mu * n[1] * t1 - cs * n[1] * n[1];
      at(2, f) = 2.0 * inv_two_mu * n[2] * t2 - cs * n[2] * n[2];
      at(3, f) = kSqrt2 * (inv_two_mu * (n[0] * t1 + n[1] * t0) - cs * n[0] * n[1]);
      at(4, f) = kSqrt2 * (inv_two_mu * (n[0] * t2 + n[2] * t0) - cs * n[0] * n[2]);
      at(5, f) = kSqrt2 * (inv_two_mu * (n[1] * t2 + n[2] * t1) - cs * n[1] * n[2]);
    });
  }

 private:
  std::array<int, 3> dims_;
  int nvox_;
  std::size_t nfreq_;
  std::array<double*, 6> real_{};
  std::array<fftw_complex*, 6> freq_{};
  std::array<fftw_plan, 6> forward_{};
  std::array<fftw_plan, 6> backward_{};
};

using Field = std::vector<double>;  // six Mandel components, component-major

// out = (C_phase(v) - C_ref) in, voxel by voxel.
void apply_contrast(const VoxelGrid& grid, const Mat6& delta0, const Mat6& delta1, const Field& in,
                    Field* out) {
  const int n = grid.voxel_count();
  for (int v = 0; v < n; ++v) {
    const Mat6& m = grid.phases[v] == 0 ? delta0 : delta1;
    for (int c = 0; c < 6; ++c) {
      double s = 0;
      for (int d = 0; d < 6; ++d) s += m(c, d) * in[static_cast<std::size_t>(d) * n + v];
      (*out)[static_cast<std::size_t>(c) * n + v] = s;
    }
  }
}

// <x, C_ref y> with isotropic C_ref = 2 mu I + lambda tr (x) tr. The
// Lippmann-Schwinger operator is self-adjoint positive definite in this
// inner product on compatible zero-mean fields, which is what entitles
// conjugate gradients to converge; the plain l2 product does not qualify.
double energy_dot(const Field& a, const Field& b, int n, const ReferenceMedium& ref) {
  const double plain = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  double traces = 0;
  for (int v = 0; v < n; ++v) {
    const double ta = a[v] + a[n + v] + a[2 * static_cast<std::size_t>(n) + v];
    const double tb = b[v] + b[n + v] + b[2 * static_cast<std::size_t>(n) + v];
    traces += ta * tb;
  }
  return 2.0 * ref.mu * plain + ref.lambda * traces;
}

struct EquilibriumCheck {
  double residual = 0;
  Vec6 mean_stress = Vec6::Zero();
};

// Fourier-space divergence norm of sigma = C (E + e), normalized by the mean
// stress magnitude; also reports that mean, which is the effective column.
EquilibriumCheck equilibrium_check(const VoxelGrid& grid, const Mat6& c0, const Mat6& c1,
                                   const Vec6& macro, const Field& fluctuation,
                                   SpectralWorkspace* ws) {
  const int n = grid.voxel_count();
  Field stress(static_cast<std::size_t>(6) * n);
  for (int v = 0; v < n; ++v) {
    const Mat6& m = grid.phases[v] == 0 ? c0 : c1;
    for (int c = 0; c < 6; ++c) {
      double s = 0;
      for (int d = 0; d < 6; ++d)
        s += m(c, d) * (macro[d] + fluctuation[static_cast<std::size_t>(d) * n + v]);
      stress[static_cast<std::size_t>(c) * n + v] = s;
    }
  }
  ws->load(stress);
  ws->forward();

  double divergence = 0;
  double mean_sq = 0;
  EquilibriumCheck out;
  ws->for_each_frequency(grid.lengths, [&](std::size_t f, int i, const Vec3* n_ptr) {
    if (n_ptr == nullptr) {
      // The zero bin carries the volume average; directionless Nyquist bins
      // lie outside the scheme's test space and contribute no traction term.
      if (f == 0) {
        for (int c = 0; c < 6; ++c) {
          out.mean_stress[c] = ws->at(c, f).real() / n;
          mean_sq += std::norm(ws->at(c, f));
        }
      }
      return;
    }
    const Vec3& dir = *n_ptr;
    const Complex t11 = ws->at(0, f), t22 = ws->at(1, f), t33 = ws->at(2, f);
    const Complex t12 = ws->at(3, f) / kSqrt2, t13 = ws->at(4, f) / kSqrt2,
                  t23 = ws->at(5, f) / kSqrt2;
    const Complex t0 = t11 * dir[0] + t12 * dir[1] + t13 * dir[2];
    const Complex t1 = t12 * dir[0] + t22 * dir[1] + t23 * dir[2];
    const Complex t2 = t13 * dir[0] + t23 * dir[1] + t33 * dir[2];
    divergence +=
        hermitian_weight(i, grid.dims[0]) * (std::norm(t0) + std::norm(t1) + std::norm(t2));
  });
  const double floor = std::numeric_limits<double>::min();
  out.residual = std::sqrt(divergence / std::max(mean_sq, floor));
  return out;
}

void check_spd(const StiffnessMatrix& c, const char* which) {
  const Mat6 sym = 0.5 * (c.mandel() + c.mandel().transpose());
  if (eig_sym(sym)[0] <= 0) {
    throw std::invalid_argument(std::string("phase stiffness ") + which +
                                " must be symmetric positive definite");
  }
}

void write_exact(std::ofstream& out, const void* data, std::size_t bytes, const std::string& path) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("failed writing grid file: " + path);
}

void read_exact(std::ifstream& in, void* data, std::size_t bytes, const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) {
    throw IoError("truncated grid file: " + path);
  }
}

}  // namespace

double VoxelGrid::fraction(int phase) const {
  if (phases.empty()) return 0.0;
  const auto count = std::count(phases.begin(), phases.end(), static_cast<std::uint8_t>(phase));
  return static_cast<double>(count) / static_cast<double>(phases.size());
}

void VoxelGrid::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < 1 || dims[d] > kMaxVoxelsPerAxis) {
      throw std::invalid_argument("voxel grid dimensions must be in [1, 4096]");
    }
    if (!(lengths[d] > 0) || !std::isfinite(lengths[d])) {
      throw std::invalid_argument("voxel grid cell lengths must be positive and finite");
    }
  }
  const long long count = 1LL * dims[0] * dims[1] * dims[2];
  if (count > kMaxVoxelCount) throw std::invalid_argument("voxel grid exceeds the size cap");
  if (phases.size() != static_cast<std::size_t>(count)) {
    throw std::invalid_argument("voxel grid phase array does not match the dimensions");
  }
  for (const std::uint8_t p : phases) {
    if (p > 1) throw std::invalid_argument("voxel grid phase ids must be 0 or 1");
  }
}

VoxelGrid generate_laminate(const std::array<int, 3>& dims, int axis, double fraction_first) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("laminate axis must be 0, 1 or 2");
  if (!(fraction_first >= 0.0 && fraction_first <= 1.0)) {
    throw std::invalid_argument("laminate fraction must lie in [0, 1]");
  }
  VoxelGrid grid;
  grid.dims = dims;
  grid.lengths = {static_cast<double>(dims[0]), static_cast<double>(dims[1]),
                  static_cast<double>(dims[2])};
  const long long layers = std::llround(fraction_first * dims[axis]);
  grid.phases.assign(static_cast<std::size_t>(1LL * dims[0] * dims[1] * dims[2]), 1);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const int coord = axis == 0 ? i : axis == 1 ? j : k;
        if (coord < layers) grid.phases[grid.index(i, j, k)] = 0;
      }
  grid.validate();
  return grid;
}

VoxelGrid generate_inclusion(const std::array<int, 3>& dims, InclusionShape shape,
                             double fraction) {
  VoxelGrid grid;
  grid.dims = dims;
  grid.lengths = {static_cast<double>(dims[0]), static_cast<double>(dims[1]),
                  static_cast<double>(dims[2])};
  const double lx = grid.lengths[0], ly = grid.lengths[1], lz = grid.lengths[2];
  double packing = 0;
  if (shape == InclusionShape::kSphere) {
    const double radius = 0.5 * std::min({lx, ly, lz});
    packing = 4.0 / 3.0 * std::numbers::pi * radius * radius * radius / (lx * ly * lz);
  } else {
    const double radius = 0.5 * std::min(ly, lz);
    packing = std::numbers::pi * radius * radius / (ly * lz);
  }
  if (!(fraction >= 0.0)) throw std::invalid_argument("inclusion fraction must be nonnegative");
  if (fraction > packing) {
    throw std::invalid_argument("inclusion fraction exceeds the packing limit of the shape");
  }

  const long long nvox = 1LL * dims[0] * dims[1] * dims[2];
  grid.phases.assign(static_cast<std::size_t>(nvox), 1);
  grid.validate();

  std::vector<double> dist_sq(static_cast<std::size_t>(nvox));
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const double dx = (i + 0.5) - 0.5 * lx;
        const double dy = (j + 0.5) - 0.5 * ly;
        const double dz = (k + 0.5) - 0.5 * lz;
        const double d2 =
            shape == InclusionShape::kSphere ? dx * dx + dy * dy + dz * dz : dy * dy + dz * dz;
        dist_sq[grid.index(i, j, k)] = d2;
      }
  std::vector<int> order(static_cast<std::size_t>(nvox));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dist_sq[a] != dist_sq[b]) return dist_sq[a] < dist_sq[b];
    return a < b;
  });
  const long long target = std::llround(fraction * static_cast<double>(nvox));
  for (long long r = 0; r < target; ++r) grid.phases[order[r]] = 0;
  return grid;
}

int FftSolveReport::total_iterations() const {
  return std::accumulate(iterations.begin(), iterations.end(), 0);
}

double FftSolveReport::max_residual() const {
  return *std::max_element(residuals.begin(), residuals.end());
}

StiffnessMatrix homogenize_fft(const VoxelGrid& grid, const StiffnessMatrix& c_phase0,
                               const StiffnessMatrix& c_phase1, const FftSettings& settings,
                               FftSolveReport* report) {
  grid.validate();
  check_spd(c_phase0, "0");
  check_spd(c_phase1, "1");
  if (!(settings.tolerance > 0) || settings.max_iterations < 1) {
    throw std::invalid_argument("solver settings require tolerance > 0 and max_iterations >= 1");
  }

  const ReferenceMedium ref = make_reference(c_phase0, c_phase1);
  const Mat6 c_ref = isotropic_stiffness(ref.lambda + 2.0 / 3.0 * ref.mu, ref.mu).mandel();
  const Mat6 delta0 = c_phase0.mandel() - c_ref;
  const Mat6 delta1 = c_phase1.mandel() - c_ref;

  SpectralWorkspace ws(grid.dims);
  const int n = grid.voxel_count();
  const std::size_t total = static_cast<std::size_t>(6) * n;
  Field fluctuation(total), residual(total), direction(total), tmp(total);

  // y = x + Green(contrast x): the Lippmann-Schwinger operator on zero-mean
  // strain fluctuations, symmetric positive definite near the reference medium.
  const auto apply_operator = [&](const Field& x, Field* y) {
    apply_contrast(grid, delta0, delta1, x, &tmp);
    ws.load(tmp);
    ws.forward();
    ws.apply_green(grid.lengths, ref);
    ws.backward_normalized();
    ws.store(&tmp);
    for (std::size_t u = 0; u < total; ++u) (*y)[u] = x[u] + tmp[u];
  };

  StiffnessMatrix effective = StiffnessMatrix::zero();
  for (int load = 0; load < 6; ++load) {
    Vec6 macro = Vec6::Zero();
    macro[load] = 1.0;

    // Right-hand side -Green(contrast E): constant per phase before the
    // projection, so the setup counts as the first iteration of the case.
    for (int v = 0; v < n; ++v) {
      const Mat6& m = grid.phases[v] == 0 ? delta0 : delta1;
      for (int c = 0; c < 6; ++c)
        residual[static_cast<std::size_t>(c) * n + v] = m.row(c).dot(macro);
    }
    ws.load(residual);
    ws.forward();
    ws.apply_green(grid.lengths, ref);
    ws.backward_normalized();
    ws.store(&residual);
    for (std::size_t u = 0; u < total; ++u) residual[u] = -residual[u];

    std::fill(fluctuation.begin(), fluctuation.end(), 0.0);
    direction = residual;
    double rho = energy_dot(residual, residual, n, ref);
    const double rhs_norm = std::sqrt(rho);

    int steps = 0;
    double cg_target = settings.tolerance;
    std::vector<double> history;
    EquilibriumCheck check;
    while (true) {
      if (rhs_norm > 0) {
        while (steps < settings.max_iterations && std::sqrt(rho) > cg_target * rhs_norm) {
          apply_operator(direction, &tmp);
          const double curvature = energy_dot(direction, tmp, n, ref);
          if (!(curvature > 0)) {
            throw ConvergenceError("conjugate gradient curvature became nonpositive in load case " +
                                       std::to_string(load),
                                   steps + 1, history);
          }
          const double alpha = rho / curvature;
          for (std::size_t u = 0; u < total; ++u) {
            fluctuation[u] += alpha * direction[u];
            residual[u] -= alpha * tmp[u];
          }
          const double rho_next = energy_dot(residual, residual, n, ref);
          const double beta = rho_next / rho;
          rho = rho_next;
          for (std::size_t u = 0; u < total; ++u)
            direction[u] = residual[u] + beta * direction[u];
          ++steps;
        }
      }
      check = equilibrium_check(grid, c_phase0.mandel(), c_phase1.mandel(), macro, fluctuation,
                                &ws);
      history.push_back(check.residual);
      if (check.residual <= settings.tolerance) break;
      if (steps >= settings.max_iterations) {
        throw ConvergenceError("equilibrium residual " + std::to_string(check.residual) +
                                   " still above tolerance after the iteration budget in load "
                                   "case " +
                                   std::to_string(load),
                               steps + 1, history);
      }
      if (rho == 0.0) {
        throw ConvergenceError("conjugate gradient reached an exact algebraic solution whose "
                               "equilibrium residual is still above tolerance in load case " +
                                   std::to_string(load),
                               steps + 1, history);
      }
      // Tighten below the current algebraic residual so the next round is
      // guaranteed to attempt further steps.
      cg_target = std::min(0.25 * cg_target, 0.25 * std::sqrt(rho) / rhs_norm);
    }

    for (int c = 0; c < 6; ++c) effective.mandel()(c, load) = check.mean_stress[c];
    if (report != nullptr) {
      report->iterations[load] = steps + 1;
      report->residuals[load] = check.residual;
    }
  }
  return effective;
}

double spectral_energy(const std::array<int, 3>& dims, const std::vector<double>& field) {
  const long long nvox = 1LL * dims[0] * dims[1] * dims[2];
  if (nvox < 1 || nvox > kMaxVoxelCount || field.size() != static_cast<std::size_t>(nvox)) {
    throw std::invalid_argument("field size does not match the grid dimensions");
  }
  double* real = fftw_alloc_real(field.size());
  const std::size_t nfreq = static_cast<std::size_t>(dims[2]) * dims[1] * (dims[0] / 2 + 1);
  fftw_complex* freq = fftw_alloc_complex(nfreq);
  if (real == nullptr || freq == nullptr) {
    fftw_free(real);
    fftw_free(freq);
    throw std::bad_alloc();
  }
  fftw_plan plan = fftw_plan_dft_r2c_3d(dims[2], dims[1], dims[0], real, freq, FFTW_ESTIMATE);
  std::memcpy(real, field.data(), sizeof(double) * field.size());
  fftw_execute(plan);

  const int half = dims[0] / 2 + 1;
  double sum = 0;
  std::size_t f = 0;
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < half; ++i, ++f) {
        const Complex value(freq[f][0], freq[f][1]);
        sum += hermitian_weight(i, dims[0]) * std::norm(value);
      }
  fftw_destroy_plan(plan);
  fftw_free(real);
  fftw_free(freq);
  return sum / static_cast<double>(nvox);
}

void write_grid_file(const VoxelGrid& grid, const std::string& path) {
  grid.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open grid file for writing: " + path);
  write_exact(out, kGridMagic, sizeof(kGridMagic), path);
  for (const int d : grid.dims) {
    const std::uint32_t u = static_cast<std::uint32_t>(d);
    write_exact(out, &u, sizeof(u), path);
  }
  for (const double l : grid.lengths) write_exact(out, &l, sizeof(l), path);
  const std::uint32_t phase_count = 2;
  write_exact(out, &phase_count, sizeof(phase_count), path);
  write_exact(out, grid.phases.data(), grid.phases.size(), path);
  out.close();
  if (!out) throw IoError("failed writing grid file: " + path);

  nlohmann::json sidecar{{"format_version", 1},
                         {"data_file", std::filesystem::path(path).filename().string()},
                         {"dimensions", grid.dims},
                         {"cell_lengths_um", grid.lengths},
                         {"phase_count", 2},
                         {"ordering", "x-fastest"},
                         {"payload", "u8 phase ids"}};
  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw IoError("cannot open grid sidecar for writing: " + path + ".json");
  side << sidecar.dump(2) << "\n";
  if (!side) throw IoError("failed writing grid sidecar: " + path + ".json");
}

VoxelGrid grid_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open grid file: " + path);
  char magic[8];
  read_exact(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kGridMagic, sizeof(magic)) != 0) {
    throw IoError("not a voxel grid file (bad magic): " + path);
  }
  VoxelGrid grid;
  for (int d = 0; d < 3; ++d) {
    std::uint32_t u = 0;
    read_exact(in, &u, sizeof(u), path);
    if (u < 1 || u > static_cast<std::uint32_t>(kMaxVoxelsPerAxis)) {
      throw IoError("grid dimensions out of range in " + path);
    }
    grid.dims[d] = static_cast<int>(u);
  }
  for (int d = 0; d < 3; ++d) read_exact(in, &grid.lengths[d], sizeof(double), path);
  std::uint32_t phase_count = 0;
  read_exact(in, &phase_count, sizeof(phase_count), path);
  if (phase_count != 2) throw IoError("unsupported phase count in " + path);
  const long long nvox = 1LL * grid.dims[0] * grid.dims[1] * grid.dims[2];
  if (nvox > kMaxVoxelCount) throw IoError("grid dimensions exceed the size cap in " + path);
  grid.phases.resize(static_cast<std::size_t>(nvox));
  read_exact(in, grid.phases.data(), grid.phases.size(), path);
  if (in.get() != std::ifstream::traits_type::eof()) {
    throw IoError("trailing data after the phase payload in " + path);
  }
  try {
    grid.validate();
  } catch (const std::invalid_argument& err) {
    throw IoError(std::string("invalid grid in ") + path + ": " + err.what());
  }
  return grid;
}

}  // namespace dmn

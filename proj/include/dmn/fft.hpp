#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dmn/tensor.hpp"

namespace dmn {

// Periodic voxel image of a two-phase microstructure. Storage is x-fastest:
// phases[i + dims[0] * (j + dims[1] * k)], phase ids in {0, 1}. lengths are
// the periodic cell edge lengths in micrometers.
struct VoxelGrid {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> phases;

  int voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  int index(int i, int j, int k) const { return i + dims[0] * (j + dims[1] * k); }
  double fraction(int phase) const;
  void validate() const;  // throws std::invalid_argument on inconsistent data
};

// Layered grid with the layer normal along a coordinate axis: the first
// round(fraction_first * dims[axis]) layers hold phase 0, the rest phase 1.
// Voxels are unit cubes (lengths[d] == dims[d]).
VoxelGrid generate_laminate(const std::array<int, 3>& dims, int axis, double fraction_first);

enum class InclusionShape {
  kSphere,
  kCylinder,  // axis along e1, spanning the cell
};

// Centered inclusion of phase 0 in a phase-1 matrix. The llround(fraction *
// voxel_count) voxel centers nearest the cell center (cylinder: nearest the
// axis) become the inclusion, ties broken by storage index, so the achieved
// fraction is exact to one voxel volume. Voxel exactness takes precedence for
// the cylinder: its outermost equal-distance column is filled partially unless
// the target count divides by dims[0]. Throws std::invalid_argument when the
// fraction exceeds the packing limit of the shape inside the periodic cell.
VoxelGrid generate_inclusion(const std::array<int, 3>& dims, InclusionShape shape,
                             double fraction);

struct FftSettings {
  double tolerance = 1e-10;  // equilibrium residual target per load case
  int max_iterations = 1000;  // iteration budget per load case
};

struct FftSolveReport {
  std::array<int, 6> iterations{};    // per macro strain load case
  std::array<double, 6> residuals{};  // final equilibrium residual per case

  int total_iterations() const;
  double max_residual() const;
};

// Effective stiffness of the periodic cell. Six unit Mandel macro strains are
// applied; each cell problem is the Lippmann-Schwinger equation for the
// zero-mean strain fluctuation with the classical trigonometric Green
// operator of an isotropic reference medium (arithmetic-mean moduli), solved
// by conjugate gradients. Column j of the result is the volume-average stress
// under unit macro strain j. Throws ConvergenceError when the equilibrium
// residual cannot be brought below the tolerance within the iteration budget.
StiffnessMatrix homogenize_fft(const VoxelGrid& grid, const StiffnessMatrix& c_phase0,
                               const StiffnessMatrix& c_phase1, const FftSettings& settings = {},
                               FftSolveReport* report = nullptr);

// Sum over the half-spectrum lattice of a real 3D field (x halved, Hermitian
// weights), divided by the voxel count; equals the sum of squares of the field
// values. Exposed so the weight bookkeeping used by the equilibrium residual
// is testable against Parseval's identity.
double spectral_energy(const std::array<int, 3>& dims, const std::vector<double>& field);

// Grid image on disk: fixed binary header (magic, dims, cell lengths, phase
// count) followed by the u8 phase payload, plus a JSON sidecar at
// path + ".json" describing the layout. Readers validate magic, sizes and
// phase ids and throw IoError on any mismatch.
void write_grid_file(const VoxelGrid& grid, const std::string& path);
VoxelGrid grid_from_file(const std::string& path);

}  // namespace dmn

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "sist/geometry.hpp"

namespace sist {

/// How a fractional conjugate view offset is resolved. `truncate` drops the
/// fraction (integer part toward zero); `interpolate` blends the two
/// neighbouring views. On an exact grid both agree.
enum class ConjugateMode { truncate, interpolate };

/// Lookup tables pairing each sample (view i, detector j) with the sample
/// (i + offset(j) mod P, -j) that measures the same line from the opposite
/// side, offset(j) = (pi + 2 j gamma_d) P / (2 pi). Parallel scans use
/// gamma_d = 0.
class ConjugateMap {
 public:
  explicit ConjugateMap(const FanGeometry& geom, ConjugateMode mode = ConjugateMode::truncate);

  const FanGeometry& geometry() const { return geom_; }
  ConjugateMode mode() const { return mode_; }
  /// True iff every column's offset is an integer.
  bool exact() const { return exact_; }

  int view_offset(int col) const { return offset_[col]; }
  double fraction(int col) const { return fraction_[col]; }

  /// out(i, j) = in(conjugate of (i, j)).
  void gather(std::span<const double> in, std::span<double> out) const;
  /// Adjoint of gather: grad_in += G^T grad_out.
  void scatter_add(std::span<const double> grad_out, std::span<double> grad_in) const;

 private:
  FanGeometry geom_;
  ConjugateMode mode_;
  bool exact_ = true;
  std::vector<int> offset_;
  std::vector<double> fraction_;
};

/// Conjugate sample of view i, signed detector j (truncating mode).
/// Throws std::domain_error for out-of-range indices.
std::pair<int, int> conjugate_index(int view, int j, const FanGeometry& geom);

Sinogram conjugate_sinogram(const Sinogram& sino, ConjugateMode mode = ConjugateMode::truncate);

struct LossGrad {
  double value = 0.0;
  std::vector<double> gradient;
};

/// L_C = mean over samples of (S - S_C)^2, with its gradient.
LossGrad global_loss(std::span<const double> values, const ConjugateMap& map);
LossGrad global_loss(const Sinogram& s_hat, ConjugateMode mode = ConjugateMode::truncate);

/// Second differences on the interior (1..P-2, 1..D-2); border entries are 0.
/// The mixed fields use the central cross stencil, so d_ij == d_ji.
struct SecondDerivatives {
  int rows = 0;
  int cols = 0;
  std::vector<double> d_ii;
  std::vector<double> d_jj;
  std::vector<double> d_ij;
  std::vector<double> d_ji;
};

SecondDerivatives second_order_derivatives(std::span<const double> values, int rows, int cols);
SecondDerivatives second_order_derivatives(const Sinogram& sino);

inline constexpr double kLocalLossEpsilon = 1e-12;

/// L_S = mean over samples of sqrt(D_ii^2 + D_jj^2 + D_ij^2 + D_ji^2 + eps),
/// where D_* are differences of second derivatives of s_hat and s_nd.
LossGrad local_loss(std::span<const double> s_hat, std::span<const double> s_nd, int rows,
                    int cols);
LossGrad local_loss(const Sinogram& s_hat, const Sinogram& s_nd);

struct SislWeights {
  double global = 1.0;
  double local = 1.0;
};

/// SISL = L_C(s_hat) + L_S(s_hat, s_nd), optionally reweighted.
LossGrad sisl(std::span<const double> s_hat, std::span<const double> s_nd, const ConjugateMap& map,
              SislWeights weights = {});
LossGrad sisl(const Sinogram& s_hat, const Sinogram& s_nd);

/// S - S_C for every sample.
std::vector<double> conjugate_residual(std::span<const double> values, const ConjugateMap& map);

}  // namespace sist

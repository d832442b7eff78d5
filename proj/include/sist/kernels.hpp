#pragma once

// Hot loops of the pipeline. Every kernel exists twice: `serial` is the
// reference, `omp` splits the outermost independent loop across threads.
// Both visit each output element's accumulation terms in the same order, so
// their results are bit-identical for any thread count.

#include <span>

#include "sist/geometry.hpp"

namespace sist::kernels {

/// Exact traversal-length line integral of one ray through a W x W pixel grid
/// covering [-1, 1]^2 (row 0 at y = +1).
double trace_ray(std::span<const double> image, int width, RayLine ray);

/// Input [cin, height, width], weight [cout, cin, ksize, ksize], output
/// [cout, height, width]; zero padding ksize / 2.
struct ConvShape {
  int cin = 1;
  int cout = 1;
  int height = 1;
  int width = 1;
  int ksize = 3;
};

namespace serial {

void project(std::span<const double> image, int width, const FanGeometry& geom,
             std::span<double> sino);

// rows x cols; `taps` holds 2*cols-1 kernel values centred at index cols-1.
void filter_rows(std::span<const double> in, int rows, int cols, std::span<const double> taps,
                 std::span<double> out);

// Riemann sum over views of interpolated filtered data, times `scale`.
void backproject(std::span<const double> filtered, const FanGeometry& geom, int width,
                 double scale, std::span<double> image);

// C[n,m] (+)= op(A) op(B); A is [n,k] (or [k,n] if trans_a), B is [k,m] (or [m,k]).
template <typename T>
void gemm(bool trans_a, bool trans_b, int n, int k, int m, const T* a, const T* b, T* c,
          bool accumulate);

template <typename T>
void conv2d_forward(const ConvShape& s, const T* in, const T* weight, const T* bias, T* out);

template <typename T>
void conv2d_backward_input(const ConvShape& s, const T* grad_out, const T* weight, T* grad_in);

template <typename T>
void conv2d_backward_weight(const ConvShape& s, const T* grad_out, const T* in, T* grad_weight,
                            T* grad_bias);

}  // namespace serial

namespace omp {

void project(std::span<const double> image, int width, const FanGeometry& geom,
             std::span<double> sino);
void filter_rows(std::span<const double> in, int rows, int cols, std::span<const double> taps,
                 std::span<double> out);
void backproject(std::span<const double> filtered, const FanGeometry& geom, int width,
                 double scale, std::span<double> image);

template <typename T>
void gemm(bool trans_a, bool trans_b, int n, int k, int m, const T* a, const T* b, T* c,
          bool accumulate);
template <typename T>
void conv2d_forward(const ConvShape& s, const T* in, const T* weight, const T* bias, T* out);
template <typename T>
void conv2d_backward_input(const ConvShape& s, const T* grad_out, const T* weight, T* grad_in);
template <typename T>
void conv2d_backward_weight(const ConvShape& s, const T* grad_out, const T* in, T* grad_weight,
                            T* grad_bias);

/// 0 restores the runtime default.
void set_threads(int threads);
int max_threads();

}  // namespace omp

}  // namespace sist::kernels

#include <omp.h>

#include <algorithm>
#include <cstddef>

#include "backproject_detail.hpp"
#include "sist/kernels.hpp"

namespace sist::kernels::omp {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr long long kParallelWork = 1 << 15;

}  // namespace

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

void project(std::span<const double> image, int width, const FanGeometry& geom,
             std::span<double> sino) {
  const int half = geom.half_span();
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < geom.num_views; ++i)
    for (int j = -half; j <= half; ++j)
      sino[static_cast<std::size_t>(i) * geom.num_detectors + j + half] =
          trace_ray(image, width, ray_line(geom, i, j));
}

void filter_rows(std::span<const double> in, int rows, int cols, std::span<const double> taps,
                 std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* row = in.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < cols; ++k) acc += row[k] * taps[c - k + cols - 1];
      out[static_cast<std::size_t>(r) * cols + c] = acc;
    }
  }
}

void backproject(std::span<const double> filtered, const FanGeometry& geom, int width,
                 double scale, std::span<double> image) {
  const detail::ViewTable views(geom);
  const double ps = 2.0 / width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < width; ++r) {
    const double y = 1.0 - (r + 0.5) * ps;
    for (int c = 0; c < width; ++c) {
      const double x = -1.0 + (c + 0.5) * ps;
      image[static_cast<std::size_t>(r) * width + c] =
          scale * detail::backproject_pixel(filtered, geom, views, x, y);
    }
  }
}

template <typename T>
void gemm(bool trans_a, bool trans_b, int n, int k, int m, const T* a, const T* b, T* c,
          bool accumulate) {
  const bool big = static_cast<long long>(n) * k * m >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (int i = 0; i < n; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * m;
    if (!accumulate)
      for (int j = 0; j < m; ++j) crow[j] = T(0);
    if (!trans_b) {
      for (int p = 0; p < k; ++p) {
        const T av = trans_a ? a[static_cast<std::size_t>(p) * n + i]
                             : a[static_cast<std::size_t>(i) * k + p];
        const T* brow = b + static_cast<std::size_t>(p) * m;
        for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
      }
    } else {
      for (int j = 0; j < m; ++j) {
        const T* brow = b + static_cast<std::size_t>(j) * k;
        T acc = crow[j];
        for (int p = 0; p < k; ++p) {
          const T av = trans_a ? a[static_cast<std::size_t>(p) * n + i]
                               : a[static_cast<std::size_t>(i) * k + p];
          acc += av * brow[p];
        }
        crow[j] = acc;
      }
    }
  }
}

template <typename T>
void conv2d_forward(const ConvShape& s, const T* in, const T* weight, const T* bias, T* out) {
  const int pad = s.ksize / 2;
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  const bool big = static_cast<long long>(plane) * s.cin * s.cout * s.ksize * s.ksize >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (int co = 0; co < s.cout; ++co) {
    T* o = out + co * plane;
    for (std::size_t q = 0; q < plane; ++q) o[q] = bias ? bias[co] : T(0);
    for (int ci = 0; ci < s.cin; ++ci) {
      const T* src = in + ci * plane;
      for (int ky = 0; ky < s.ksize; ++ky) {
        for (int kx = 0; kx < s.ksize; ++kx) {
          const T w = weight[((static_cast<std::size_t>(co) * s.cin + ci) * s.ksize + ky) * s.ksize + kx];
          const int oy = ky - pad;
          const int ox = kx - pad;
          const int y0 = std::max(0, -oy);
          const int y1 = std::min(s.height, s.height - oy);
          const int x0 = std::max(0, -ox);
          const int x1 = std::min(s.width, s.width - ox);
          for (int y = y0; y < y1; ++y) {
            T* orow = o + static_cast<std::size_t>(y) * s.width;
            const T* irow = src + static_cast<std::size_t>(y + oy) * s.width + ox;
            for (int x = x0; x < x1; ++x) orow[x] += w * irow[x];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvShape& s, const T* grad_out, const T* weight, T* grad_in) {
  const int pad = s.ksize / 2;
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  const bool big = static_cast<long long>(plane) * s.cin * s.cout * s.ksize * s.ksize >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (int ci = 0; ci < s.cin; ++ci) {
    T* gi = grad_in + ci * plane;
    for (int co = 0; co < s.cout; ++co) {
      const T* go = grad_out + co * plane;
      for (int ky = 0; ky < s.ksize; ++ky) {
        for (int kx = 0; kx < s.ksize; ++kx) {
          const T w = weight[((static_cast<std::size_t>(co) * s.cin + ci) * s.ksize + ky) * s.ksize + kx];
          const int oy = ky - pad;
          const int ox = kx - pad;
          const int y0 = std::max(0, -oy);
          const int y1 = std::min(s.height, s.height - oy);
          const int x0 = std::max(0, -ox);
          const int x1 = std::min(s.width, s.width - ox);
          for (int y = y0; y < y1; ++y) {
            const T* grow = go + static_cast<std::size_t>(y) * s.width;
            T* irow = gi + static_cast<std::size_t>(y + oy) * s.width + ox;
            for (int x = x0; x < x1; ++x) irow[x] += w * grow[x];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvShape& s, const T* grad_out, const T* in, T* grad_weight,
                            T* grad_bias) {
  const int pad = s.ksize / 2;
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  const bool big = static_cast<long long>(plane) * s.cin * s.cout * s.ksize * s.ksize >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (int co = 0; co < s.cout; ++co) {
    const T* go = grad_out + co * plane;
    if (grad_bias) {
      T acc = T(0);
      for (std::size_t q = 0; q < plane; ++q) acc += go[q];
      grad_bias[co] += acc;
    }
    for (int ci = 0; ci < s.cin; ++ci) {
      const T* src = in + ci * plane;
      for (int ky = 0; ky < s.ksize; ++ky) {
        for (int kx = 0; kx < s.ksize; ++kx) {
          const int oy = ky - pad;
          const int ox = kx - pad;
          const int y0 = std::max(0, -oy);
          const int y1 = std::min(s.height, s.height - oy);
          const int x0 = std::max(0, -ox);
          const int x1 = std::min(s.width, s.width - ox);
          T acc = T(0);
          for (int y = y0; y < y1; ++y) {
            const T* grow = go + static_cast<std::size_t>(y) * s.width;
            const T* irow = src + static_cast<std::size_t>(y + oy) * s.width + ox;
            for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
          }
          grad_weight[((static_cast<std::size_t>(co) * s.cin + ci) * s.ksize + ky) * s.ksize + kx] += acc;
        }
      }
    }
  }
}

#define SIST_INSTANTIATE(T)                                                                    \
  template void gemm<T>(bool, bool, int, int, int, const T*, const T*, T*, bool);             \
  template void conv2d_forward<T>(const ConvShape&, const T*, const T*, const T*, T*);        \
  template void conv2d_backward_input<T>(const ConvShape&, const T*, const T*, T*);           \
  template void conv2d_backward_weight<T>(const ConvShape&, const T*, const T*, T*, T*);

SIST_INSTANTIATE(float)
SIST_INSTANTIATE(double)
#undef SIST_INSTANTIATE

}  // namespace sist::kernels::omp

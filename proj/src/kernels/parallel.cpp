// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "agenet/kernels.hpp"

namespace agenet::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void maxpool2d_backward(std::size_t out_size, const double* dy, const std::size_t* argmax,
                        double* dx) {
  for (std::size_t o = 0; o < out_size; ++o) dx[argmax[o]] += dy[o];
}

namespace parallel {
namespace {

// col[(ci*k + kh)*k + kw][oh*ow_n + ow], zero where the window hits padding.
void im2col(const Conv2dGeometry& g, const double* x, double* col) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w(), k = g.kernel, p_n = oh_n * ow_n;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    const double* plane = x + ci * g.in_h * g.in_w;
    for (std::size_t kh = 0; kh < k; ++kh) {
      for (std::size_t kw = 0; kw < k; ++kw) {
        double* row = col + ((ci * k + kh) * k + kw) * p_n;
        for (std::size_t oh = 0; oh < oh_n; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
          double* out = row + oh * ow_n;
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) {
            std::fill(out, out + ow_n, 0.0);
            continue;
          }
          const double* src = plane + ih * g.in_w;
          for (std::size_t ow = 0; ow < ow_n; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
            out[ow] = (iw < 0 || iw >= static_cast<long>(g.in_w)) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

void col2im_add(const Conv2dGeometry& g, const double* col, double* dx) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w(), k = g.kernel, p_n = oh_n * ow_n;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    double* plane = dx + ci * g.in_h * g.in_w;
    for (std::size_t kh = 0; kh < k; ++kh) {
      for (std::size_t kw = 0; kw < k; ++kw) {
        const double* row = col + ((ci * k + kh) * k + kw) * p_n;
        for (std::size_t oh = 0; oh < oh_n; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
          double* dst = plane + ih * g.in_w;
          for (std::size_t ow = 0; ow < ow_n; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
            if (iw >= 0 && iw < static_cast<long>(g.in_w)) dst[iw] += row[oh * ow_n + ow];
          }
        }
      }
    }
  }
}

// c[i*p + q] += sum_k a(i, k) * b[k*p + q], k ascending for every element.
// a(i, k) = a[i*a_rs + k*a_cs]. Register-blocked 4 rows x 8 columns.
void gemm_accumulate(std::size_t m, std::size_t kdim, std::size_t p, const double* a,
                     std::size_t a_rs, std::size_t a_cs, const double* __restrict b,
                     double* __restrict c) {
  constexpr std::size_t kRows = 4, kCols = 8;
  std::size_t q0 = 0;
  for (; q0 + kCols <= p; q0 += kCols) {
    std::size_t i0 = 0;
    for (; i0 + kRows <= m; i0 += kRows) {
      double acc[kRows][kCols];
      for (std::size_t r = 0; r < kRows; ++r)
        for (std::size_t q = 0; q < kCols; ++q) acc[r][q] = c[(i0 + r) * p + q0 + q];
      const double* a0 = a + i0 * a_rs;
      for (std::size_t kk = 0; kk < kdim; ++kk) {
        const double* brow = b + kk * p + q0;
        const double w0 = a0[kk * a_cs];
        const double w1 = a0[a_rs + kk * a_cs];
        const double w2 = a0[2 * a_rs + kk * a_cs];
        const double w3 = a0[3 * a_rs + kk * a_cs];
        for (std::size_t q = 0; q < kCols; ++q) {
          const double bv = brow[q];
          acc[0][q] += w0 * bv;
          acc[1][q] += w1 * bv;
          acc[2][q] += w2 * bv;
          acc[3][q] += w3 * bv;
        }
      }
      for (std::size_t r = 0; r < kRows; ++r)
        for (std::size_t q = 0; q < kCols; ++q) c[(i0 + r) * p + q0 + q] = acc[r][q];
    }
    for (; i0 < m; ++i0) {
      double acc[kCols];
      for (std::size_t q = 0; q < kCols; ++q) acc[q] = c[i0 * p + q0 + q];
      for (std::size_t kk = 0; kk < kdim; ++kk) {
        const double w = a[i0 * a_rs + kk * a_cs];
        const double* brow = b + kk * p + q0;
        for (std::size_t q = 0; q < kCols; ++q) acc[q] += w * brow[q];
      }
      for (std::size_t q = 0; q < kCols; ++q) c[i0 * p + q0 + q] = acc[q];
    }
  }
  if (q0 < p) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t q = q0; q < p; ++q) {
        double acc = c[i * p + q];
        for (std::size_t kk = 0; kk < kdim; ++kk) acc += a[i * a_rs + kk * a_cs] * b[kk * p + q];
        c[i * p + q] = acc;
      }
    }
  }
}

// Fixed 4-lane split reduction.
double dot(const double* __restrict x, const double* __restrict y, std::size_t n) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += x[i] * y[i];
    l1 += x[i + 1] * y[i + 1];
    l2 += x[i + 2] * y[i + 2];
    l3 += x[i + 3] * y[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return ((l0 + l1) + (l2 + l3)) + tail;
}

}  // namespace

void conv2d_forward(const Conv2dGeometry& g, const double* x, const double* w, const double* b,
                    double* y) {
  const std::size_t p_n = g.out_h() * g.out_w(), patch = g.patch();
  const std::size_t x_stride = g.in_channels * g.in_h * g.in_w;
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel
  {
    std::vector<double> col(patch * p_n);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      im2col(g, x + n * x_stride, col.data());
      double* yn = y + n * g.out_channels * p_n;
      for (std::size_t co = 0; co < g.out_channels; ++co)
        std::fill(yn + co * p_n, yn + (co + 1) * p_n, b != nullptr ? b[co] : 0.0);
      gemm_accumulate(g.out_channels, patch, p_n, w, patch, 1, col.data(), yn);
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, const double* dy, const double* w, double* dx) {
  const std::size_t p_n = g.out_h() * g.out_w(), patch = g.patch();
  const std::size_t x_stride = g.in_channels * g.in_h * g.in_w;
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel
  {
    std::vector<double> dcol(patch * p_n);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      std::fill(dcol.begin(), dcol.end(), 0.0);
      // dcol = W^T dy_n : a(r, co) = w[co*patch + r]
      gemm_accumulate(patch, g.out_channels, p_n, w, 1, patch, dy + n * g.out_channels * p_n,
                      dcol.data());
      col2im_add(g, dcol.data(), dx + n * x_stride);
    }
  }
}

void conv2d_backward_weight(const Conv2dGeometry& g, const double* dy, const double* x, double* dw,
                            double* db) {
  const std::size_t p_n = g.out_h() * g.out_w(), patch = g.patch();
  const std::size_t x_stride = g.in_channels * g.in_h * g.in_w;
  const long out_channels = static_cast<long>(g.out_channels);
  std::vector<double> col(patch * p_n);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(g, x + n * x_stride, col.data());
    const double* dyn = dy + n * g.out_channels * p_n;
#pragma omp parallel for schedule(static)
    for (long co = 0; co < out_channels; ++co) {
      const double* grow = dyn + co * p_n;
      if (db != nullptr) {
        double s = 0.0;
        for (std::size_t q = 0; q < p_n; ++q) s += grow[q];
        db[co] += s;
      }
      double* dwrow = dw + co * patch;
      for (std::size_t r = 0; r < patch; ++r) dwrow[r] += dot(grow, col.data() + r * p_n, p_n);
    }
  }
}

void affine_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* w, const double* b, double* y) {
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    double* yr = y + r * d_out;
    for (std::size_t j = 0; j < d_out; ++j) yr[j] = b != nullptr ? b[j] : 0.0;
    const double* xr = x + r * d_in;
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xv = xr[i];
      const double* wr = w + i * d_out;
      for (std::size_t j = 0; j < d_out; ++j) yr[j] += xv * wr[j];
    }
  }
}

void affine_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* dy,
                     const double* x, const double* w, double* dx, double* dw, double* db) {
  if (dx != nullptr) {
    const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < d_in; ++i) dx[r * d_in + i] += dot(dy + r * d_out, w + i * d_out, d_out);
    }
  }
  if (dw != nullptr) {
    const long ins = static_cast<long>(d_in);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < ins; ++i) {
      double* dwr = dw + i * d_out;
      for (std::size_t r = 0; r < n; ++r) {
        const double xv = x[r * d_in + i];
        const double* gr = dy + r * d_out;
        for (std::size_t j = 0; j < d_out; ++j) dwr[j] += xv * gr[j];
      }
    }
  }
  if (db != nullptr) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d_out; ++j) db[j] += dy[r * d_out + j];
  }
}

void maxpool2d_forward(const Pool2dGeometry& g, const double* x, double* y, std::size_t* argmax) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  const long planes = static_cast<long>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < planes; ++nc) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      const long h_lo = static_cast<long>(oh * g.stride) - static_cast<long>(g.padding);
      const long h0 = std::max(0L, h_lo);
      const long h1 = std::min(static_cast<long>(g.in_h), h_lo + static_cast<long>(g.kernel));
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        const long w_lo = static_cast<long>(ow * g.stride) - static_cast<long>(g.padding);
        const long w0 = std::max(0L, w_lo);
        const long w1 = std::min(static_cast<long>(g.in_w), w_lo + static_cast<long>(g.kernel));
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = static_cast<std::size_t>(nc) * g.in_h * g.in_w;
        for (long ih = h0; ih < h1; ++ih) {
          for (long iw = w0; iw < w1; ++iw) {
            const std::size_t idx = (nc * g.in_h + ih) * g.in_w + iw;
            if (x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (nc * oh_n + oh) * ow_n + ow;
        y[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
}

}  // namespace parallel
}  // namespace agenet::kernels

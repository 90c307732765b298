// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

// Raw compute kernels behind the differentiable ops.
//
// Two implementations share one interface:
//   kernels::reference - direct nested loops, serial. Kept as the test oracle.
//   kernels::parallel  - im2col + blocked GEMM, OpenMP over samples / output channels.
//
// Every output element of a parallel kernel is reduced in a fixed order that does
// not depend on the thread count, so results are bit-identical across OMP_NUM_THREADS.
// Forward conv and affine additionally reproduce the reference reduction order exactly.
// All backward kernels accumulate (+=) into their outputs.

namespace agenet::kernels {

struct Conv2dGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h() const { return (in_h + 2 * padding - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * padding - kernel) / stride + 1; }
  std::size_t patch() const { return in_channels * kernel * kernel; }
};

struct Pool2dGeometry {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h() const { return (in_h + 2 * padding - kernel) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * padding - kernel) / stride + 1; }
};

namespace reference {

void conv2d_forward(const Conv2dGeometry& g, const double* x, const double* w, const double* b,
                    double* y);
void conv2d_backward_input(const Conv2dGeometry& g, const double* dy, const double* w, double* dx);
void conv2d_backward_weight(const Conv2dGeometry& g, const double* dy, const double* x, double* dw,
                            double* db);

void affine_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* w, const double* b, double* y);
void affine_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* dy,
                     const double* x, const double* w, double* dx, double* dw, double* db);

/// `argmax` receives the flat input index chosen for every output element.
void maxpool2d_forward(const Pool2dGeometry& g, const double* x, double* y, std::size_t* argmax);

}  // namespace reference

namespace parallel {

void conv2d_forward(const Conv2dGeometry& g, const double* x, const double* w, const double* b,
                    double* y);
void conv2d_backward_input(const Conv2dGeometry& g, const double* dy, const double* w, double* dx);
void conv2d_backward_weight(const Conv2dGeometry& g, const double* dy, const double* x, double* dw,
                            double* db);

void affine_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* w, const double* b, double* y);
/// Null gradient pointers are skipped.
void affine_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* dy,
                     const double* x, const double* w, double* dx, double* dw, double* db);

void maxpool2d_forward(const Pool2dGeometry& g, const double* x, double* y, std::size_t* argmax);

}  // namespace parallel

void maxpool2d_backward(std::size_t out_size, const double* dy, const std::size_t* argmax,
                        double* dx);

/// Threads used by the parallel kernels (omp_get_max_threads, or 1 without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace agenet::kernels

// SPDX-License-Identifier: Apache-2.0
#include <limits>

#include "agenet/kernels.hpp"

namespace agenet::kernels::reference {

void conv2d_forward(const Conv2dGeometry& g, const double* x, const double* w, const double* b,
                    double* y) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w(), k = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oh = 0; oh < oh_n; ++oh) {
        for (std::size_t ow = 0; ow < ow_n; ++ow) {
          double acc = b != nullptr ? b[co] : 0.0;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t kh = 0; kh < k; ++kh) {
              const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
              for (std::size_t kw = 0; kw < k; ++kw) {
                const long iw =
                    static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
                const double wv = w[((co * g.in_channels + ci) * k + kh) * k + kw];
                double xv = 0.0;
                if (ih >= 0 && iw >= 0 && ih < static_cast<long>(g.in_h) &&
                    iw < static_cast<long>(g.in_w)) {
                  xv = x[((n * g.in_channels + ci) * g.in_h + ih) * g.in_w + iw];
                }
                acc += wv * xv;
              }
            }
          }
          y[((n * g.out_channels + co) * oh_n + oh) * ow_n + ow] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, const double* dy, const double* w, double* dx) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w(), k = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oh = 0; oh < oh_n; ++oh)
        for (std::size_t ow = 0; ow < ow_n; ++ow) {
          const double gy = dy[((n * g.out_channels + co) * oh_n + oh) * ow_n + ow];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t kh = 0; kh < k; ++kh) {
              const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
              if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
              for (std::size_t kw = 0; kw < k; ++kw) {
                const long iw =
                    static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
                if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
                dx[((n * g.in_channels + ci) * g.in_h + ih) * g.in_w + iw] +=
                    gy * w[((co * g.in_channels + ci) * k + kh) * k + kw];
              }
            }
        }
}

void conv2d_backward_weight(const Conv2dGeometry& g, const double* dy, const double* x, double* dw,
                            double* db) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w(), k = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oh = 0; oh < oh_n; ++oh)
        for (std::size_t ow = 0; ow < ow_n; ++ow) {
          const double gy = dy[((n * g.out_channels + co) * oh_n + oh) * ow_n + ow];
          if (db != nullptr) db[co] += gy;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t kh = 0; kh < k; ++kh) {
              const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
              if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
              for (std::size_t kw = 0; kw < k; ++kw) {
                const long iw =
                    static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
                if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
                dw[((co * g.in_channels + ci) * k + kh) * k + kw] +=
                    gy * x[((n * g.in_channels + ci) * g.in_h + ih) * g.in_w + iw];
              }
            }
        }
}

void affine_forward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* x,
                    const double* w, const double* b, double* y) {
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d_out; ++j) {
      double acc = b != nullptr ? b[j] : 0.0;
      for (std::size_t i = 0; i < d_in; ++i) acc += x[r * d_in + i] * w[i * d_out + j];
      y[r * d_out + j] = acc;
    }
}

void affine_backward(std::size_t n, std::size_t d_in, std::size_t d_out, const double* dy,
                     const double* x, const double* w, double* dx, double* dw, double* db) {
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d_out; ++j) {
      const double gy = dy[r * d_out + j];
      if (db != nullptr) db[j] += gy;
      for (std::size_t i = 0; i < d_in; ++i) {
        if (dx != nullptr) dx[r * d_in + i] += gy * w[i * d_out + j];
        if (dw != nullptr) dw[i * d_out + j] += gy * x[r * d_in + i];
      }
    }
}

void maxpool2d_forward(const Pool2dGeometry& g, const double* x, double* y, std::size_t* argmax) {
  const std::size_t oh_n = g.out_h(), ow_n = g.out_w();
  for (std::size_t nc = 0; nc < g.batch * g.channels; ++nc)
    for (std::size_t oh = 0; oh < oh_n; ++oh)
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = nc * g.in_h * g.in_w;
        for (std::size_t kh = 0; kh < g.kernel; ++kh) {
          const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.padding);
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
          for (std::size_t kw = 0; kw < g.kernel; ++kw) {
            const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.padding);
            if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
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

}  // namespace agenet::kernels::reference

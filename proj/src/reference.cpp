#include "eddynet/reference.hpp"

#include <cmath>

namespace eddynet::reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                         const ConvGeometry& g) {
  const int batch = x.dim(0), cin = x.dim(1), hi = x.dim(2), wi = x.dim(3);
  const int cout = w.dim(0);
  require_shape(w.dim(1) == cin && w.dim(2) == g.kh && w.dim(3) == g.kw, "conv weight shape");
  const int ho = g.conv_out(hi, true);
  const int wo = g.conv_out(wi, false);
  Tensor<T> y({batch, cout, ho, wo});
  for (int b = 0; b < batch; ++b)
    for (int co = 0; co < cout; ++co)
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) {
          T acc = bias.empty() ? T(0) : bias[co];
          for (int ci = 0; ci < cin; ++ci)
            for (int ki = 0; ki < g.kh; ++ki)
              for (int kj = 0; kj < g.kw; ++kj) {
                const int ih = oh * g.sh - g.ph + ki;
                const int iw = ow * g.sw - g.pw + kj;
                if (ih < 0 || ih >= hi || iw < 0 || iw >= wi) continue;
                acc += x.at(b, ci, ih, iw) * w.at(co, ci, ki, kj);
              }
          y.at(b, co, oh, ow) = acc;
        }
  return y;
}

template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           const ConvGeometry& g) {
  const int batch = x.dim(0), cin = x.dim(1), hi = x.dim(2), wi = x.dim(3);
  const int cout = w.dim(1);
  require_shape(w.dim(0) == cin && w.dim(2) == g.kh && w.dim(3) == g.kw, "deconv weight shape");
  const int ho = g.deconv_out(hi, true);
  const int wo = g.deconv_out(wi, false);
  Tensor<T> y({batch, cout, ho, wo});
  for (int b = 0; b < batch; ++b) {
    for (int co = 0; co < cout; ++co)
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) y.at(b, co, oh, ow) = bias.empty() ? T(0) : bias[co];
    for (int ci = 0; ci < cin; ++ci)
      for (int ih = 0; ih < hi; ++ih)
        for (int iw = 0; iw < wi; ++iw)
          for (int co = 0; co < cout; ++co)
            for (int ki = 0; ki < g.kh; ++ki)
              for (int kj = 0; kj < g.kw; ++kj) {
                const int oh = ih * g.sh - g.ph + ki;
                const int ow = iw * g.sw - g.pw + kj;
                if (oh < 0 || oh >= ho || ow < 0 || ow >= wo) continue;
                y.at(b, co, oh, ow) += x.at(b, ci, ih, iw) * w.at(ci, co, ki, kj);
              }
  }
  return y;
}

template Tensor<float> conv2d_forward(const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&, const ConvGeometry&);
template Tensor<double> conv2d_forward(const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, const ConvGeometry&);
template Tensor<float> deconv2d_forward(const Tensor<float>&, const Tensor<float>&,
                                        const Tensor<float>&, const ConvGeometry&);
template Tensor<double> deconv2d_forward(const Tensor<double>&, const Tensor<double>&,
                                         const Tensor<double>&, const ConvGeometry&);

ResponseMaps forward_operate(const CrackProfile& p, const SimConfig& cfg) {
  ResponseMaps out;
  for (int k = 0; k < kFrequencies; ++k) {
    const double delta = cfg.skin_depths_cells[k];
    for (int i = 0; i < kScanRows; ++i) {
      double ax = 0.0;
      for (int u = cfg.crack_x_begin; u < cfg.crack_x_end; ++u) {
        ax += std::exp(-(i - u) * (i - u) / (2.0 * cfg.sigma_x_cells * cfg.sigma_x_cells));
      }
      for (int j = 0; j < kScanCols; ++j) {
        Complex sum{0.0, 0.0};
        for (int m = 0; m < kProfileRows; ++m) {
          for (int n = 0; n < kProfileCols; ++n) {
            if (!p.at(m, n)) continue;
            int above = 0;
            for (int up = 0; up < n; ++up) above += p.at(m, up);
            const double shadow = std::exp(-cfg.gamma * above);
            const double z = n + 0.5;
            const Complex depth = std::exp(Complex{-2.0 * z / delta, -2.0 * z / delta});
            const double lateral =
                std::exp(-(j - m) * (j - m) / (2.0 * cfg.sigma_y_cells * cfg.sigma_y_cells));
            sum += shadow * depth * lateral;
          }
        }
        out.at(k, i, j) = -cfg.calibration[k] * ax * sum;
      }
    }
  }
  out.frequencies_hz = cfg.frequencies_hz;
  return out;
}

}  // namespace eddynet::reference

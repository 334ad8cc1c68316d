#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "warpcert/common.hpp"

namespace warpcert {

// Chart-local metric sampler: coordinates -> symmetric positive bilinear
// form.  The oracle never sees the closed-form curvature machinery, only
// this map, which keeps it an independent check.
using ChartMetric = std::function<Mat(const Vec&)>;

struct FdOptions {
  double step = 1e-3;  // grid spacing as a fraction of scale
  double scale = 1.0;  // chart length scale the step is relative to
  bool richardson = true;
};

// Riemann components R^l_{ijk}; sign fixed so the unit round sphere gives
// sectional curvature +1.
struct FdRiemann {
  int dim = 0;
  std::vector<double> comp;

  double at(int l, int i, int j, int k) const {
    return comp[((static_cast<std::size_t>(l) * dim + i) * dim + j) * dim + k];
  }
  double& at(int l, int i, int j, int k) {
    return comp[((static_cast<std::size_t>(l) * dim + i) * dim + j) * dim + k];
  }
};

// Curvature by nested fourth-order central differences of the metric.
// Two derivative layers on a five-point stencil; one Richardson step (order
// four) when enabled.
class FdCurvature {
 public:
  FdCurvature(ChartMetric metric, int dim)
      : metric_(std::move(metric)), dim_(dim) {
    if (dim < 2) throw dimension_error("FdCurvature: chart dimension must be >= 2");
  }

  int dim() const { return dim_; }

  Mat metric_at(const Vec& p) const { return metric_(p); }

  std::vector<Mat> metric_derivatives(const Vec& p, double h) const {
    std::vector<Mat> dg(dim_);
    Vec q = p;
    for (int i = 0; i < dim_; ++i) {
      const double base = p[i];
      q[i] = base + 2.0 * h;
      Mat acc = -metric_(q);
      q[i] = base + h;
      acc += 8.0 * metric_(q);
      q[i] = base - h;
      acc -= 8.0 * metric_(q);
      q[i] = base - 2.0 * h;
      acc += metric_(q);
      q[i] = base;
      dg[i] = acc / (12.0 * h);
    }
    return dg;
  }

  // Gamma[k](i,j) = (1/2) g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij})
  std::vector<Mat> christoffel(const Vec& p, double h) const {
    const Mat g = metric_(p);
    Eigen::FullPivLU<Mat> lu(g);
    if (!lu.isInvertible())
      throw oracle_error("FdCurvature: degenerate metric sample");
    const Mat ginv = lu.inverse();
    const std::vector<Mat> dg = metric_derivatives(p, h);
    std::vector<Mat> gamma(dim_, Mat::Zero(dim_, dim_));
    for (int k = 0; k < dim_; ++k)
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) {
          double sum = 0.0;
          for (int l = 0; l < dim_; ++l)
            sum += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
          gamma[k](i, j) = 0.5 * sum;
        }
    return gamma;
  }

  // R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
  //           + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}
  FdRiemann riemann(const Vec& p, double h) const {
    const std::vector<Mat> gamma = christoffel(p, h);
    std::vector<std::vector<Mat>> dgamma(dim_);
    Vec q = p;
    for (int i = 0; i < dim_; ++i) {
      const double base = p[i];
      q[i] = base + 2.0 * h;
      std::vector<Mat> acc = christoffel(q, h);
      for (Mat& m : acc) m = -m;
      q[i] = base + h;
      std::vector<Mat> plus = christoffel(q, h);
      for (int k = 0; k < dim_; ++k) acc[k] += 8.0 * plus[k];
      q[i] = base - h;
      std::vector<Mat> minus = christoffel(q, h);
      for (int k = 0; k < dim_; ++k) acc[k] -= 8.0 * minus[k];
      q[i] = base - 2.0 * h;
      std::vector<Mat> far = christoffel(q, h);
      for (int k = 0; k < dim_; ++k) acc[k] += far[k];
      q[i] = base;
      for (int k = 0; k < dim_; ++k) acc[k] /= 12.0 * h;
      dgamma[i] = std::move(acc);
    }
    FdRiemann out;
    out.dim = dim_;
    out.comp.assign(static_cast<std::size_t>(dim_) * dim_ * dim_ * dim_, 0.0);
    for (int l = 0; l < dim_; ++l)
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
          for (int k = 0; k < dim_; ++k) {
            double value = dgamma[i][l](j, k) - dgamma[j][l](i, k);
            for (int m = 0; m < dim_; ++m)
              value += gamma[l](i, m) * gamma[m](j, k) -
                       gamma[l](j, m) * gamma[m](i, k);
            out.at(l, i, j, k) = value;
          }
    return out;
  }

  double scalar_at_step(const Vec& p, double h) const {
    const Mat g = metric_(p);
    Eigen::FullPivLU<Mat> lu(g);
    if (!lu.isInvertible())
      throw oracle_error("FdCurvature: degenerate metric sample");
    const Mat ginv = lu.inverse();
    const FdRiemann rm = riemann(p, h);
    double scalar = 0.0;
    for (int j = 0; j < dim_; ++j)
      for (int k = 0; k < dim_; ++k) {
        double ric = 0.0;
        for (int i = 0; i < dim_; ++i) ric += rm.at(i, i, j, k);
        scalar += ginv(j, k) * ric;
      }
    return scalar;
  }

  double sectional_at_step(const Vec& p, const Vec& u, const Vec& v,
                           double h) const {
    const Mat g = metric_(p);
    const FdRiemann rm = riemann(p, h);
    Vec w = Vec::Zero(dim_);
    for (int l = 0; l < dim_; ++l) {
      double sum = 0.0;
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
          for (int k = 0; k < dim_; ++k)
            sum += rm.at(l, i, j, k) * u[i] * v[j] * v[k];
      w[l] = sum;
    }
    const double num = u.dot(g * w);
    const double uu = u.dot(g * u);
    const double vv = v.dot(g * v);
    const double uv = u.dot(g * v);
    const double den = uu * vv - uv * uv;
    if (!(den > 0.0))
      throw oracle_error("FdCurvature: sectional plane is degenerate");
    return num / den;
  }

  double scalar(const Vec& p, FdOptions opt = {}) const {
    const double h = opt.step * opt.scale;
    const double coarse = scalar_at_step(p, h);
    if (!opt.richardson) return coarse;
    const double fine = scalar_at_step(p, 0.5 * h);
    return (16.0 * fine - coarse) / 15.0;
  }

  double sectional(const Vec& p, const Vec& u, const Vec& v,
                   FdOptions opt = {}) const {
    const double h = opt.step * opt.scale;
    const double coarse = sectional_at_step(p, u, v, h);
    if (!opt.richardson) return coarse;
    const double fine = sectional_at_step(p, u, v, 0.5 * h);
    return (16.0 * fine - coarse) / 15.0;
  }

 private:
  ChartMetric metric_;
  int dim_;
};

}  // namespace warpcert

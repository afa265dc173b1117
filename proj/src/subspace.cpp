#include "specrec/subspace.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace specrec {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

ConstMap map_system(const SystemMatrix& h) {
  return ConstMap(h.data.data(), h.rows(), h.bands);
}

ConstMap map_stack(const RgbStack& stack) {
  return ConstMap(stack.data.data(), stack.channels(), stack.pixels());
}

void require_nonzero(const SystemMatrix& h) {
  for (double x : h.data)
    if (x != 0.0) return;
  throw std::invalid_argument("subspace_project: system matrix is identically zero");
}

}  // namespace

std::vector<double> projection_operator(const SystemMatrix& h, double ridge) {
  h.validate();
  require_nonzero(h);
  if (ridge < 0.0) throw std::invalid_argument("projection_operator: ridge must be >= 0");
  ConstMap hm = map_system(h);
  Eigen::MatrixXd gram = hm * hm.transpose();
  gram.diagonal().array() += ridge;
  // 3M <= 9 by contract, a direct SPD solve is exact enough at 1e-9 scale
  Eigen::MatrixXd inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
  RowMat op = hm.transpose() * inv;
  return {op.data(), op.data() + op.size()};
}

SpectralCube subspace_project(const SystemMatrix& h, const RgbStack& stack, double ridge) {
  h.validate();
  require_nonzero(h);
  if (stack.channels() != h.rows())
    throw std::invalid_argument("subspace_project: stack channels do not match system matrix rows");
  ConstMap hm = map_system(h);
  ConstMap im = map_stack(stack);
  Eigen::MatrixXd gram = hm * hm.transpose();
  gram.diagonal().array() += ridge;
  Eigen::MatrixXd x = gram.ldlt().solve(im);
  SpectralCube out(h.bands, stack.height, stack.width);
  Eigen::Map<RowMat>(out.data.data(), h.bands, stack.pixels()) = hm.transpose() * x;
  return out;
}

SpectralCube recover_linear(const SystemMatrix& h, const RgbStack& stack, RescaleFactor omega, double ridge) {
  SpectralCube cube = subspace_project(h, stack, ridge);
  for (double& v : cube.data) v *= omega.value;
  return cube;
}

double decomposition_residual(const SystemMatrix& h, const SpectralCube& reflectance) {
  h.validate();
  reflectance.validate_shape();
  if (reflectance.bands != h.bands)
    throw std::invalid_argument("decomposition_residual: band mismatch");
  ConstMap hm = map_system(h);
  ConstMap rm(reflectance.data.data(), reflectance.bands, reflectance.pixels());
  RowMat observed = hm * rm;

  RgbStack stack;
  stack.m_illums = h.m_illums;
  stack.height = reflectance.height;
  stack.width = reflectance.width;
  stack.data.assign(observed.data(), observed.data() + observed.size());
  SpectralCube parallel = subspace_project(h, stack, 0.0);

  ConstMap pm(parallel.data.data(), parallel.bands, parallel.pixels());
  return (observed - hm * pm).cwiseAbs().maxCoeff();
}

double henderson_searle_check(const SystemMatrix& h_hat, const SystemMatrix& delta_h, const RgbStack& stack) {
  h_hat.validate();
  delta_h.validate();
  if (h_hat.rows() != delta_h.rows() || h_hat.bands != delta_h.bands)
    throw std::invalid_argument("henderson_searle_check: shape mismatch between H^ and dH");
  if (stack.channels() != h_hat.rows())
    throw std::invalid_argument("henderson_searle_check: stack channels do not match");

  ConstMap hm = map_system(h_hat);
  ConstMap dm = map_system(delta_h);
  ConstMap im = map_stack(stack);
  const int rows = h_hat.rows();

  Eigen::MatrixXd perturbed = hm + dm;
  Eigen::MatrixXd gram_pert = perturbed * perturbed.transpose();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_pert(gram_pert);
  Eigen::MatrixXd direct = perturbed.transpose() * lu_pert.solve(im);

  // expansion route: invert H^ H^^T, then correct through the SVD of the
  // Gram perturbation K = H^ dH^T + dH H^^T + dH dH^T
  Eigen::MatrixXd gram = hm * hm.transpose();
  Eigen::MatrixXd gram_inv = gram.partialPivLu().solve(Eigen::MatrixXd::Identity(rows, rows));
  Eigen::MatrixXd k = hm * dm.transpose() + dm * hm.transpose() + dm * dm.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd sigma = svd.singularValues().asDiagonal();
  Eigen::MatrixXd inner =
      Eigen::MatrixXd::Identity(rows, rows) + sigma * svd.matrixV().transpose() * gram_inv * svd.matrixU();

  Eigen::JacobiSVD<Eigen::MatrixXd> inner_svd(inner);
  const double smin = inner_svd.singularValues().minCoeff();
  const double smax = inner_svd.singularValues().maxCoeff();
  // absolute floor: inner ~ 0 has a harmless-looking relative condition
  // number but the expansion is meaningless there
  if (!(smin > 1e-14 * std::max(1.0, smax))) {
    std::ostringstream msg;
    msg << "henderson_searle_check: inner matrix near-singular, cond ~= "
        << (smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity());
    throw std::runtime_error(msg.str());
  }

  Eigen::MatrixXd correction =
      gram_inv * svd.matrixU() * inner.partialPivLu().solve(sigma * svd.matrixV().transpose() * gram_inv);
  Eigen::MatrixXd expanded_inv = gram_inv - correction;
  Eigen::MatrixXd expanded = hm.transpose() * (expanded_inv * im) + dm.transpose() * lu_pert.solve(im);

  return (direct - expanded).cwiseAbs().maxCoeff();
}

}  // namespace specrec

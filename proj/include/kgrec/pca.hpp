#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "kgrec/error.hpp"

namespace kgrec {

struct Projection {
  Eigen::MatrixXd coordinates;  // n x components
  Eigen::VectorXd explained;    // variance fraction per component
  Eigen::MatrixXd axes;         // d x components, unit columns
};

// Principal components of the sample covariance. The largest-magnitude
// loading of every axis is made positive so the output is sign-stable.
inline Projection pca_project(std::span<const Eigen::VectorXd> vectors, int components) {
  require(vectors.size() >= 2, "pca_project: need at least two vectors");
  const auto d = vectors.front().size();
  require(components >= 1 && components <= d, "pca_project: components must lie in [1, d]");
  const auto n = static_cast<Eigen::Index>(vectors.size());

  Eigen::MatrixXd data(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(vectors[static_cast<std::size_t>(i)].size() == d, "pca_project: dimension mismatch");
    data.row(i) = vectors[static_cast<std::size_t>(i)].transpose();
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  data.rowwise() -= mean;
  const Eigen::MatrixXd cov = data.transpose() * data / static_cast<double>(n - 1);

  Projection out;
  out.axes = Eigen::MatrixXd::Zero(d, components);
  out.explained = Eigen::VectorXd::Zero(components);
  const double total = cov.trace();
  if (!(total > 0.0)) {
    out.coordinates = Eigen::MatrixXd::Zero(n, components);
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues come back ascending.
  for (int c = 0; c < components; ++c) {
    const Eigen::Index src = d - 1 - c;
    Eigen::VectorXd axis = solver.eigenvectors().col(src);
    Eigen::Index largest = 0;
    axis.cwiseAbs().maxCoeff(&largest);
    if (axis[largest] < 0.0) axis = -axis;
    out.axes.col(c) = axis;
    out.explained[c] = std::max(0.0, solver.eigenvalues()[src]) / total;
  }
  out.coordinates = data * out.axes;
  return out;
}

}  // namespace kgrec

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace qflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Particle-number sector does not fit the orbital space.
class InvalidSector : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operands of incompatible shape (matrix vs basis, CAS vs sector, ...).
class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative numerical procedure did not meet its termination criterion.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qflow

#pragma once

#include <stdexcept>
#include <string>

namespace ncwave {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid lattice parameters, mismatched grids, malformed shapes.
class GridError : public Error {
public:
    using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// The causal cone of a source reaches the Dirichlet rim of the grid, so the
// stepped solution would no longer agree with the infinite-lattice one.
class BoundaryContaminationError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

// Neumann series requested outside its convergence regime.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// The finite-rank resolvent system is singular: lambda sits on a pole.
class PoleError : public Error {
public:
    explicit PoleError(const std::string& what, double det_abs = 0.0)
        : Error(what), det_abs_(det_abs) {}
    double det_abs() const { return det_abs_; }

private:
    double det_abs_;
};

// An iterative estimator ran out of iterations.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_gap)
        : Error(what), last_gap_(last_gap) {}
    double last_gap() const { return last_gap_; }

private:
    double last_gap_;
};

}  // namespace ncwave

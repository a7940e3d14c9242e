#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cmcsl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Malformed or inconsistent input data (files, manifests, labels).
// The CLI maps this to exit code 2; everything else unexpected is 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A violated call contract (bad budget, mismatched dimensions, ...).
struct InvalidArgument : std::runtime_error {
    explicit InvalidArgument(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cmcsl

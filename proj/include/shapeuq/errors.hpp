// SPDX-License-Identifier: Apache-2.0

#ifndef SHAPEUQ_ERRORS_HPP
#define SHAPEUQ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shapeuq
{

// Invalid user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// A computation could not be completed: singular maps, indefinite mass
// matrices, non-isolated clusters (CLI exit code 1).
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// The (perturbed) domain map has a non-positive Jacobian determinant.
class NonInvertibleMap : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

}  // namespace shapeuq

#endif  // SHAPEUQ_ERRORS_HPP

#pragma once

#include <stdexcept>
#include <string>

namespace toa {

// Raised when a documented precondition of an operation is violated.
class ContractError : public std::invalid_argument {
  public:
    explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when a computation cannot reach a meaningful result
// (vanishing normalisation, non-convergence).
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

#define TOA_REQUIRE(cond, msg)                                                  \
    do {                                                                        \
        if (!(cond)) throw ::toa::ContractError(std::string(__func__) + ": " + (msg)); \
    } while (0)

}  // namespace toa

#ifndef INLA_ERRORS_HPP
#define INLA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace inla {

// Base class for everything thrown by the engine. Subclasses map to CLI
// exit codes: validation -> 2, numerical -> 3, io -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Cholesky pivot failure; carries the (original-order) index of the bad pivot.
class NotPositiveDefiniteError : public NumericalError {
public:
    NotPositiveDefiniteError(const std::string& msg, int index)
        : NumericalError(msg), index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

}  // namespace inla

#endif

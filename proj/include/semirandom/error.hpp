#ifndef SEMIRANDOM_ERROR_HPP
#define SEMIRANDOM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace semirandom {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

class SpectralBoundViolated : public Error {
public:
    using Error::Error;
};

class OracleFailure : public Error {
public:
    using Error::Error;
};

class AllGuessesInfeasible : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace semirandom

#endif

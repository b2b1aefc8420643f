#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmm {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Invalid kernel/option parameters or malformed inputs.
class ParameterError : public Error {
  public:
    using Error::Error;
};

// Special-function evaluation left the representable range.
class EvaluationError : public Error {
  public:
    using Error::Error;
};

// Radial derivative requested at r <= r_cutoff; the force direction is undefined there.
class DegenerateRadiusError : public Error {
  public:
    using Error::Error;
};

class DivergenceError : public Error {
  public:
    DivergenceError(const std::string &what, double time) : Error(what), time_(time) {}
    double time() const { return time_; }

  private:
    double time_;
};

class ConversionError : public Error {
  public:
    ConversionError(const std::string &what, double condition) : Error(what), condition_(condition) {}
    // Estimated 2-norm condition number of the Gram matrix (inf for exact rank deficiency).
    double condition() const { return condition_; }

  private:
    double condition_;
};

class ShootingError : public Error {
  public:
    using Error::Error;
};

class AveragingError : public Error {
  public:
    AveragingError(const std::string &what, std::size_t member) : Error(what), member_(member) {}
    std::size_t member() const { return member_; }

  private:
    std::size_t member_;
};

class FitError : public Error {
  public:
    using Error::Error;
};

// Too few draws or a degenerate sample for density contouring.
class ContourError : public Error {
  public:
    using Error::Error;
};

class IngestionError : public Error {
  public:
    IngestionError(const std::string &file, std::size_t line, const std::string &msg)
        : Error(file + ":" + std::to_string(line) + ": " + msg), file_(file), line_(line) {}
    const std::string &file() const { return file_; }
    std::size_t line() const { return line_; }

  private:
    std::string file_;
    std::size_t line_;
};

} // namespace lmm

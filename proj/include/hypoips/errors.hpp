#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hypoips {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Raised when a smooth-block quantity is requested from a model with d_S = 0.
class EllipticModelError : public Error {
  public:
    using Error::Error;
};

class HypoellipticityViolation : public Error {
  public:
    using Error::Error;
};

class DegenerateCovariance : public NumericalError {
  public:
    DegenerateCovariance(std::size_t particle, std::size_t step, const std::string& detail)
        : NumericalError("degenerate LG covariance at particle " + std::to_string(particle) +
                         ", step " + std::to_string(step) + ": " + detail),
          particle_(particle),
          step_(step)
    {
    }

    std::size_t particle() const noexcept { return particle_; }
    std::size_t step() const noexcept { return step_; }

  private:
    std::size_t particle_;
    std::size_t step_;
};

class BlowupError : public NumericalError {
  public:
    BlowupError(double time, std::size_t particle)
        : NumericalError("state diverged at t=" + std::to_string(time) + " for particle " +
                         std::to_string(particle)),
          time_(time),
          particle_(particle)
    {
    }

    double time() const noexcept { return time_; }
    std::size_t particle() const noexcept { return particle_; }

  private:
    double time_;
    std::size_t particle_;
};

class DataError : public Error {
  public:
    using Error::Error;
};

class InitializationError : public Error {
  public:
    using Error::Error;
};

class NotConditionallyLinear : public Error {
  public:
    NotConditionallyLinear(int coordinate, const std::string& detail)
        : Error("model is not conditionally linear in hidden coordinate " +
                std::to_string(coordinate) + ": " + detail),
          coordinate_(coordinate)
    {
    }

    int coordinate() const noexcept { return coordinate_; }

  private:
    int coordinate_;
};

class FilterDegeneracy : public NumericalError {
  public:
    FilterDegeneracy(std::size_t step, std::size_t particle)
        : NumericalError("innovation covariance not SPD at step " + std::to_string(step) +
                         ", particle " + std::to_string(particle)),
          step_(step),
          particle_(particle)
    {
    }

    std::size_t step() const noexcept { return step_; }
    std::size_t particle() const noexcept { return particle_; }

  private:
    std::size_t step_;
    std::size_t particle_;
};

class OracleSizeError : public Error {
  public:
    using Error::Error;
};

class StructureError : public Error {
  public:
    using Error::Error;
};

class InsufficientReplicates : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

}  // namespace hypoips

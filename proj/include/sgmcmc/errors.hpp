#pragma once

#include <stdexcept>
#include <string>

namespace sgmcmc
{

// Bad argument to an operation (batch size, index, horizon, ...).
class ArgumentError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

// Model parameters or data that do not define a valid posterior.
class ModelError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite parameter passed where a finite one is required.
class DivergenceError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error
{
  public:
    ConvergenceError(const std::string& what, double last_gradient_norm)
        : std::runtime_error(what), last_gradient_norm_(last_gradient_norm)
    {
    }
    double last_gradient_norm() const { return last_gradient_norm_; }

  private:
    double last_gradient_norm_;
};

// A test function lacks the derivatives (or Poisson solution) an operation needs.
class CapabilityError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

class TuningError : public std::runtime_error
{
  public:
    TuningError(const std::string& what, double best_delta, double best_acceptance)
        : std::runtime_error(what), best_delta_(best_delta), best_acceptance_(best_acceptance)
    {
    }
    double best_delta() const { return best_delta_; }
    double best_acceptance() const { return best_acceptance_; }

  private:
    double best_delta_;
    double best_acceptance_;
};

// File could not be read or written; the message carries the path.
class IoError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Malformed or unknown configuration; maps to CLI exit code 2.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

} // namespace sgmcmc

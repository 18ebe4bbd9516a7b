#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace acbdf2 {

/// Base class for failures raised while advancing the discrete solution.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NewtonDiverged : public SolverError {
public:
    NewtonDiverged(int iterations, double residual)
        : SolverError("Newton iteration did not converge after " + std::to_string(iterations) +
                      " iterations (residual " + std::to_string(residual) + ")"),
          iterations_(iterations), residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// The step violates tau_n < (1+2r_n)/(1+r_n), so the Jacobian is not guaranteed SPD.
class SolvabilityViolated : public SolverError {
public:
    SolvabilityViolated(double tau, double ratio, double bound)
        : SolverError("step " + std::to_string(tau) + " (ratio " + std::to_string(ratio) +
                      ") is not below the solvability bound " + std::to_string(bound)),
          tau_(tau), bound_(bound) {}

    double tau() const noexcept { return tau_; }
    double bound() const noexcept { return bound_; }

private:
    double tau_;
    double bound_;
};

class TooManyRejects : public SolverError {
public:
    TooManyRejects(double t, int rejects)
        : SolverError("adaptive controller rejected " + std::to_string(rejects) +
                      " consecutive attempts at t = " + std::to_string(t)) {}
};

/// Relative error estimate requested against an identically zero reference field.
class ZeroReference : public std::domain_error {
public:
    ZeroReference() : std::domain_error("error estimate reference field has zero norm") {}
};

/// Raised by the run driver when a constraint configured as `enforce` fails.
class ConstraintViolation : public std::runtime_error {
public:
    ConstraintViolation(std::string condition, std::size_t step)
        : std::runtime_error("constraint '" + condition + "' violated at step " + std::to_string(step)),
          condition_(std::move(condition)), step_(step) {}

    const std::string& condition() const noexcept { return condition_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::string condition_;
    std::size_t step_;
};

}  // namespace acbdf2

#pragma once

#include <stdexcept>
#include <string>

namespace lifecycle {

// Base of every error the engine raises. Subclasses carry the failure kind so
// the CLI can map them onto exit codes.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public ModelError {
public:
    using ModelError::ModelError;
};

class SingularSigma : public ModelError {
public:
    using ModelError::ModelError;
};

class HypothesisViolated : public ModelError {
public:
    using ModelError::ModelError;
};

class NoConvergence : public ModelError {
public:
    NoConvergence(const std::string& what, int iterations, double defect)
        : ModelError(what), iterations_(iterations), defect_(defect) {}
    int iterations() const { return iterations_; }
    double defect() const { return defect_; }

private:
    int iterations_;
    double defect_;
};

class OutOfRange : public ModelError {
public:
    using ModelError::ModelError;
};

class GridMismatch : public ModelError {
public:
    using ModelError::ModelError;
};

class BoundaryViolation : public ModelError {
public:
    using ModelError::ModelError;
};

class InadmissibleState : public ModelError {
public:
    using ModelError::ModelError;
};

class ConfigMismatch : public ModelError {
public:
    using ModelError::ModelError;
};

class AdmissibilityBreach : public ModelError {
public:
    AdmissibilityBreach(const std::string& what, long path, double t, double gamma)
        : ModelError(what), path_(path), t_(t), gamma_(gamma) {}
    long path() const { return path_; }
    double time() const { return t_; }
    double total_wealth() const { return gamma_; }

private:
    long path_;
    double t_;
    double gamma_;
};

}  // namespace lifecycle

#pragma once

#include <stdexcept>
#include <string>

namespace nlb {

/// Invalid configuration input (bad schema, bad value). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key_path, const std::string& what)
        : std::runtime_error(key_path.empty() ? what : key_path + ": " + what),
          key_path_(std::move(key_path)) {}
    const std::string& key_path() const { return key_path_; }

private:
    std::string key_path_;
};

/// Missing or malformed on-disk artifact (ledger, snapshot, cache). Exit code 3.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: solver breakdown, non-finite values, violated step constraints. Exit code 4.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = 0.0;
};

/// API misuse: incompatible meshes, size mismatches, capacity overruns.
class StructuralError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace nlb

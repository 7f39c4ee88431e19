#pragma once

#include <stdexcept>
#include <string>

namespace capmeter {

// Bad user input: malformed files, out-of-range indices, unknown names.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Electrical impossibility detected while solving a circuit.
class CircuitError : public std::runtime_error {
public:
    explicit CircuitError(const std::string& what) : std::runtime_error(what) {}
};

// Two sources driving different voltages onto the same connected component.
class SourceConflictError : public CircuitError {
public:
    explicit SourceConflictError(const std::string& what) : CircuitError(what) {}
};

// Calibration cannot produce a usable lookup table.
class CalibrationError : public std::runtime_error {
public:
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

// Lookup table built under different parameters than the ones in use.
class FingerprintError : public CalibrationError {
public:
    explicit FingerprintError(const std::string& what) : CalibrationError(what) {}
};

} // namespace capmeter

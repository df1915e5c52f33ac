#pragma once

#include <stdexcept>
#include <string>

namespace mrp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Kernel or manifest layer parameters that cannot be applied to the given shapes.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad caller-supplied data: wrong channel count, image too small, undecodable file.
class InputError : public Error {
public:
    using Error::Error;
};

// API misuse: double normalization, mismatched descriptors, invalid metric configuration.
class UsageError : public Error {
public:
    using Error::Error;
};

class WeightFileError : public Error {
public:
    using Error::Error;
};

class FormatError : public WeightFileError {
public:
    using WeightFileError::WeightFileError;
};

class CorruptionError : public WeightFileError {
public:
    using WeightFileError::WeightFileError;
};

class ManifestError : public WeightFileError {
public:
    using WeightFileError::WeightFileError;
};

// 2AFC dataset could not be ingested.
class IngestionError : public Error {
public:
    using Error::Error;
};

}  // namespace mrp

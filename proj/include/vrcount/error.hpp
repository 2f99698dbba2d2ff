#pragma once

#include <stdexcept>
#include <string>

namespace vrc {

// Base for every error raised by the pipeline. The CLI maps ConfigError to
// exit code 2 and everything else to 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Manifest or config record that does not parse or lacks a key.
class ManifestError : public ConfigError {
public:
    ManifestError(std::string field, const std::string& what)
        : ConfigError(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Declared geometry disagrees with the data on disk.
class GeometryError : public Error {
public:
    GeometryError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}
    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// The external detector process could not be started or died.
class SpawnError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

// A caller broke an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace vrc

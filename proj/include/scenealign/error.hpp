#pragma once

#include <stdexcept>
#include <string>

namespace scenealign {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct CapacityError : Error {
    using Error::Error;
};

struct ApplicabilityError : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct EmptyInputError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct MissingArtifactError : Error {
    explicit MissingArtifactError(const std::string& path)
        : Error("missing artifact: " + path), path(path) {}
    std::string path;
};

// Transport-level remote failure (connect refused, timeout). Retryable by contract.
struct TransportError : Error {
    explicit TransportError(const std::string& msg) : Error(msg) {}
    bool retryable = true;
};

// Wire payload did not match the protocol. Carries the raw payload for diagnosis.
struct ProtocolError : Error {
    ProtocolError(const std::string& msg, std::string payload)
        : Error(msg), raw_payload(std::move(payload)) {}
    std::string raw_payload;
};

struct TrainingDiverged : Error {
    using Error::Error;
};

struct PlanningError : Error {
    using Error::Error;
};

}  // namespace scenealign

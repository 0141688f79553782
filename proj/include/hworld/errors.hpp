#pragma once

#include <stdexcept>
#include <string>

namespace hworld {

/// Base for all simulator errors. `code` is a stable machine-readable tag
/// (also used for CLI diagnostic lines), `what()` is the human message.
class SimError : public std::runtime_error {
public:
    SimError(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct DuplicateInstanceId : SimError {
    explicit DuplicateInstanceId(const std::string& msg) : SimError("DuplicateInstanceId", msg) {}
};

struct UnknownAreaReference : SimError {
    explicit UnknownAreaReference(const std::string& msg) : SimError("UnknownAreaReference", msg) {}
};

struct ContainmentCycle : SimError {
    explicit ContainmentCycle(const std::string& msg) : SimError("ContainmentCycle", msg) {}
};

struct EffectIntegrityError : SimError {
    explicit EffectIntegrityError(const std::string& msg) : SimError("EffectIntegrityError", msg) {}
};

struct UnboundVariable : SimError {
    explicit UnboundVariable(const std::string& msg) : SimError("UnboundVariable", msg) {}
};

struct UnknownArea : SimError {
    explicit UnknownArea(const std::string& msg) : SimError("UnknownArea", msg) {}
};

struct UnknownLabel : SimError {
    explicit UnknownLabel(const std::string& msg) : SimError("UnknownLabel", msg) {}
};

struct InitMismatch : SimError {
    explicit InitMismatch(const std::string& msg) : SimError("InitMismatch", msg) {}
};

struct ReplayFailure : SimError {
    explicit ReplayFailure(const std::string& msg) : SimError("ReplayFailure", msg) {}
};

struct LengthMismatch : SimError {
    explicit LengthMismatch(const std::string& msg) : SimError("LengthMismatch", msg) {}
};

struct ProtocolViolation : SimError {
    explicit ProtocolViolation(const std::string& msg) : SimError("ProtocolViolation", msg) {}
};

struct FormatError : SimError {
    explicit FormatError(const std::string& msg) : SimError("FormatError", msg) {}
};

} // namespace hworld

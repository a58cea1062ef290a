#pragma once

#include <stdexcept>
#include <string>

namespace mensura {

enum class ErrorCode {
    MalformedXml,         // input is not well-formed UTF-8 XML
    NotCmme,              // well-formed XML, but not a CMME piece
    SchemaViolation,      // a known element is structurally broken
    EmptyScore,           // no mensural section to convert
    NegativeState,        // proportion with a zero term
    Unrepresentable,      // duration cannot be written with the available values
    SerializationFailure, // internal invariant breach while writing
    InvalidArguments,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::MalformedXml: return "MalformedXml";
        case ErrorCode::NotCmme: return "NotCmme";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::EmptyScore: return "EmptyScore";
        case ErrorCode::NegativeState: return "NegativeState";
        case ErrorCode::Unrepresentable: return "Unrepresentable";
        case ErrorCode::SerializationFailure: return "SerializationFailure";
        case ErrorCode::InvalidArguments: return "InvalidArguments";
    }
    return "Unknown";
}

class MensuraError : public std::runtime_error {
public:
    MensuraError(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mensura

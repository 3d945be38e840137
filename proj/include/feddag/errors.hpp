#pragma once

#include <stdexcept>
#include <string>

namespace feddag {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct CyclicInput : Error { using Error::Error; };
struct TransportFailure : Error { using Error::Error; };
struct ProtocolViolation : Error { using Error::Error; };
struct ChecksumMismatch : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct LabelMismatch : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace feddag

#pragma once

#include <stdexcept>
#include <string>

namespace reid {

// Base class for all toolkit errors. `kind()` is a stable machine-readable
// tag; the CLI maps each kind to a distinct exit code.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define REID_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                  \
    public:                                                      \
        explicit Name(const std::string& msg) : Error(#Name, msg) {} \
    }

REID_DEFINE_ERROR(InvalidImage);
REID_DEFINE_ERROR(FormatError);
REID_DEFINE_ERROR(InvalidBox);
REID_DEFINE_ERROR(DegenerateRegions);
REID_DEFINE_ERROR(FusionError);
REID_DEFINE_ERROR(SelectionError);
REID_DEFINE_ERROR(InsufficientPairs);
REID_DEFINE_ERROR(NumericalError);
REID_DEFINE_ERROR(DimError);
REID_DEFINE_ERROR(ProtocolError);
REID_DEFINE_ERROR(NameError);
REID_DEFINE_ERROR(LayoutError);
REID_DEFINE_ERROR(KeyError);
REID_DEFINE_ERROR(ExtractionFailed);

#undef REID_DEFINE_ERROR

}  // namespace reid

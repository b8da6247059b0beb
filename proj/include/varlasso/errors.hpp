#pragma once

#include <stdexcept>
#include <string>

namespace varlasso {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define VARLASSO_DEFINE_ERROR(Name)                     \
    class Name : public Error {                         \
    public:                                             \
        explicit Name(const std::string& what)          \
            : Error(std::string(#Name ": ") + what) {}  \
    }

// linalg
VARLASSO_DEFINE_ERROR(NotPositiveDefinite);
VARLASSO_DEFINE_ERROR(SingularDesign);
VARLASSO_DEFINE_ERROR(Overflow);
VARLASSO_DEFINE_ERROR(NonConvergence);
VARLASSO_DEFINE_ERROR(NotStationary);
VARLASSO_DEFINE_ERROR(DimensionMismatch);

// solver / estimators
VARLASSO_DEFINE_ERROR(AllWeightsInfinite);
VARLASSO_DEFINE_ERROR(TooManySelected);
VARLASSO_DEFINE_ERROR(InvalidArgument);

// theory
VARLASSO_DEFINE_ERROR(ZeroKappa);
VARLASSO_DEFINE_ERROR(MissingInnovations);
VARLASSO_DEFINE_ERROR(SingularSubGram);

// mc / io
VARLASSO_DEFINE_ERROR(UnknownCombination);
VARLASSO_DEFINE_ERROR(FormatError);

#undef VARLASSO_DEFINE_ERROR

}  // namespace varlasso

#pragma once

#include <stdexcept>
#include <string>

namespace rcvae {

// Error taxonomy. The CLI maps these onto process exit codes:
//   ConfigError / DataError / ParseError / FormatError -> 2
//   MissingArtifactError                               -> 3
//   NumericError                                       -> 4
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };      // shape mismatch
struct StateError : Error { using Error::Error; };          // API misuse (backward without forward, ...)
struct NumericError : Error { using Error::Error; };        // NaN/Inf or divergence
struct ParseError : Error { using Error::Error; };          // malformed text input
struct DataError : Error { using Error::Error; };           // invalid data content
struct FormatError : Error { using Error::Error; };         // binary format violation
struct LookupError : Error { using Error::Error; };         // unknown key
struct SpecError : Error { using Error::Error; };           // invalid operation spec (ablation target, ...)
struct ConfigError : Error { using Error::Error; };         // bad run configuration
struct MissingArtifactError : Error { using Error::Error; };
struct HpoError : Error { using Error::Error; };

}  // namespace rcvae

#ifndef AHD_ERRORS_HPP
#define AHD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ahd {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidSpec : Error { using Error::Error; };
struct EncodeSingular : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct BadLength : Error { using Error::Error; };
struct NonPositiveNoise : Error { using Error::Error; };
struct NonPositiveClip : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };

// A kernel blew up during decoding. Distinct from a normal decode failure:
// the batch is abandoned and the candidate is scored catastrophic upstream.
struct KernelFault : Error { using Error::Error; };
struct NumericFault : KernelFault { using KernelFault::KernelFault; };

struct UnknownKernel : Error { using Error::Error; };
struct UnknownIsland : Error { using Error::Error; };
struct ProtocolMismatch : Error { using Error::Error; };
struct EmptyIsland : Error { using Error::Error; };
struct NoIntermediateZone : Error { using Error::Error; };
struct CorruptLog : Error { using Error::Error; };

} // namespace ahd

#endif

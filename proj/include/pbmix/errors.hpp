#pragma once

#include <stdexcept>
#include <string>

namespace pbmix {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define PBMIX_DEFINE_ERROR(Name)                                  \
  struct Name : Error {                                           \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

PBMIX_DEFINE_ERROR(ParseError);
PBMIX_DEFINE_ERROR(InvariantViolation);
PBMIX_DEFINE_ERROR(DegenerateCell);
PBMIX_DEFINE_ERROR(MarkerMismatch);
PBMIX_DEFINE_ERROR(MissingInteriorNeighbour);
PBMIX_DEFINE_ERROR(CollinearCentroids);
PBMIX_DEFINE_ERROR(SingularGram);
PBMIX_DEFINE_ERROR(PointOnDirichletBoundary);
PBMIX_DEFINE_ERROR(CoefficientBoundViolation);
PBMIX_DEFINE_ERROR(SingularSystem);
PBMIX_DEFINE_ERROR(LocalSingular);
PBMIX_DEFINE_ERROR(UndefinedNorm);
PBMIX_DEFINE_ERROR(UnknownCase);
PBMIX_DEFINE_ERROR(MeshMismatch);
PBMIX_DEFINE_ERROR(UnsupportedOrder);

#undef PBMIX_DEFINE_ERROR

}  // namespace pbmix

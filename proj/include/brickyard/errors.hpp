#pragma once
#include <stdexcept>
#include <string>

namespace brickyard {

// Domain failures thrown by library ops. The CLI maps any of these to exit 1.
struct Error : std::runtime_error {
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }
 private:
  std::string code_;
};

#define BRICKYARD_ERROR(Name)                                   \
  struct Name : Error {                                         \
    explicit Name(const std::string& what = "") : Error(#Name, what) {} \
  }

BRICKYARD_ERROR(MalformedBlueprint);
BRICKYARD_ERROR(OverCapacity);
BRICKYARD_ERROR(EmptyCloud);
BRICKYARD_ERROR(NoPlaneFound);
BRICKYARD_ERROR(DegenerateCluster);
BRICKYARD_ERROR(EmptyView);
BRICKYARD_ERROR(NoGround);
BRICKYARD_ERROR(NoPile);
BRICKYARD_ERROR(EmptyAfterCrop);
BRICKYARD_ERROR(NoCorrespondences);
BRICKYARD_ERROR(Unpartitionable);
BRICKYARD_ERROR(Infeasible);
BRICKYARD_ERROR(NoCandidate);
BRICKYARD_ERROR(MarkerNotVisible);
BRICKYARD_ERROR(CorruptSnapshot);
BRICKYARD_ERROR(BadFile);
BRICKYARD_ERROR(BadArgument);

#undef BRICKYARD_ERROR

}  // namespace brickyard

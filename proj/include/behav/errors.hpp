#pragma once

#include <stdexcept>
#include <string>

namespace behav {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BEHAV_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

BEHAV_DEFINE_ERROR(InvalidArgument)
BEHAV_DEFINE_ERROR(LengthMismatch)
BEHAV_DEFINE_ERROR(DimensionMismatch)
BEHAV_DEFINE_ERROR(EmptyList)
BEHAV_DEFINE_ERROR(DegenerateRange)
BEHAV_DEFINE_ERROR(ZeroBaseline)
BEHAV_DEFINE_ERROR(EmptyPath)
BEHAV_DEFINE_ERROR(ZeroLength)
BEHAV_DEFINE_ERROR(NoGoal)
BEHAV_DEFINE_ERROR(InvalidScenario)
BEHAV_DEFINE_ERROR(CorruptLog)

// Transport-level failures. Callers fall back to offline substitutes.
BEHAV_DEFINE_ERROR(BackendUnavailable)

#undef BEHAV_DEFINE_ERROR

class TimedOut : public BackendUnavailable {
 public:
  using BackendUnavailable::BackendUnavailable;
};

// Replay mode found no recorded response for a request digest.
class FixtureMiss : public BackendUnavailable {
 public:
  using BackendUnavailable::BackendUnavailable;
};

// Response did not match the expected schema. `path()` names the offending
// field, e.g. "values[2]" or "y missing".
class MalformedResponse : public Error {
 public:
  explicit MalformedResponse(std::string path)
      : Error("malformed response: " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace behav

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace protolp {

// Error taxonomy. The CLI maps each kind onto an exit code.
enum class ErrorKind {
  kConfig,       // bad user configuration
  kFormat,       // malformed file
  kData,         // non-finite / out-of-domain values
  kConsistency,  // shapes or counts that disagree
  kSampling,     // episode cannot be drawn from the store
  kSolver,       // numerically singular system
  kContract,     // violated precondition of a numerical routine
  kIo,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// A failure inside one benchmark episode, wrapping the original cause.
class EpisodeError : public Error {
 public:
  EpisodeError(std::size_t episode, const Error& cause)
      : Error(cause.kind(), "episode " + std::to_string(episode) + ": " +
                                cause.what()),
        episode_(episode) {}

  std::size_t episode() const noexcept { return episode_; }

 private:
  std::size_t episode_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace protolp

#pragma once
// Error taxonomy shared across the library. The CLI maps these onto distinct
// process exit codes, so keep the classes coarse but disjoint.

#include <stdexcept>
#include <string>

namespace bnnkit {

class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Shape or divisibility violations, including a model file whose header
// contradicts its payload.
class dimension_error : public error {
public:
  using error::error;
};

// Parameter sets that cannot be turned into an executable layer.
class compile_error : public error {
public:
  using error::error;
};

// A value does not fit its declared fixed-point width. Never wrap silently.
class overflow_error : public error {
public:
  using error::error;
};

// File and stream problems.
class io_error : public error {
public:
  using error::error;
};

// Model file with an unsupported format version.
class format_version_error : public io_error {
public:
  using io_error::io_error;
};

// Model file shorter than its header promises.
class truncated_blob_error : public io_error {
public:
  using io_error::io_error;
};

// Throughput target that no legal configuration can meet. Carries the best
// rate the topology could still reach so callers can report it.
class infeasible_error : public error {
public:
  infeasible_error(const std::string& what, double max_achievable_fps)
      : error(what), max_achievable_fps(max_achievable_fps) {}
  double max_achievable_fps;
};

}  // namespace bnnkit

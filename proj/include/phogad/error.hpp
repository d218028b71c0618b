#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phogad {

enum class Errc {
  unknown_endpoint_key,
  inconsistent_dimension,
  missing_column,
  unparseable_cell,
  empty_file,
  target_unreachable,
  too_few_edges,
  empty_selection,
  dimension_mismatch,
  stale_cache,
  single_class_split,
  invalid_argument,
  io_error,
  bad_format,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// CLI and the tests can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace phogad

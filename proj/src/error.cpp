#include "phogad/error.hpp"

namespace phogad {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::unknown_endpoint_key: return "UnknownEndpointKey";
    case Errc::inconsistent_dimension: return "InconsistentDimension";
    case Errc::missing_column: return "MissingColumn";
    case Errc::unparseable_cell: return "UnparseableCell";
    case Errc::empty_file: return "EmptyFile";
    case Errc::target_unreachable: return "TargetUnreachable";
    case Errc::too_few_edges: return "TooFewEdges";
    case Errc::empty_selection: return "EmptySelection";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::stale_cache: return "StaleCache";
    case Errc::single_class_split: return "SingleClassSplit";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_error: return "IoError";
    case Errc::bad_format: return "BadFormat";
  }
  return "Unknown";
}

}  // namespace phogad

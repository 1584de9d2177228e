#include "acrm/error.hpp"

namespace acrm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Config: return "config";
    case ErrorKind::Input: return "input";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Arithmetic: return "arithmetic";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Input: return 3;
    case ErrorKind::Io: return 4;
    case ErrorKind::Format: return 5;
    case ErrorKind::Dimension: return 6;
    case ErrorKind::Contract: return 7;
    case ErrorKind::Arithmetic: return 8;
  }
  return 1;
}

}  // namespace acrm
